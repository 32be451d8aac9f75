"""Bounded rate loss under squared error.

Two additive-Gaussian test channels W1' and W2' give an achievable rate pair
for every (D1, D2). The noise variance is split in two ways depending on
which distortion is larger:

* D1 >= D2: W1' = X + T1 + T2, W2' = X + T2 with var(T1) + var(T2) = D1,
  var(T2) = D2; R1 = I(X; W1' | Y1), R1 + R2 = I(X; W2' | Y2).
* D1 <= D2: W1' = X + T1, W2' = X + T1 + T2 with var(T1) = D1,
  var(T1) + var(T2) = D2; R1 = I(X; W1' | Y1) and
  R1 + R2 = I(X; W2' | Y2) + I(X; W1' | Y1, W2').

The certificate compares these rates with the Wyner-Ziv rate of the first
decoder and the Heegard-Berger rate. For Gaussian instances every quantity
is in closed form. For quantized sources (a discrete X with discrete side
informations) the test-channel rates are differential-entropy integrals of
Gaussian mixtures and the references come from the heuristic optimizers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from .gaussian import GaussianChain, hb_rate_gaussian, wyner_ziv_gaussian
from .probcore import DistortionMeasure, JointSource, ValidationError
from .rdopt import heegard_berger_rate, wyner_ziv_rate
from .regions import RatePair
from .search import OptimizerConfig

BUDGET_R1 = 0.5
BUDGET_SUM = 1.0
GAUSSIAN_TOL = 1e-6
DEFAULT_LEVELS = 8
_QUANT_CARD = 4

__all__ = [
    "BUDGET_R1",
    "BUDGET_SUM",
    "GapCertificate",
    "MseInstance",
    "gap_certificate",
    "inner_rates_mse",
    "noise_split",
]


def _pos(v, name):
    v = float(v)
    if not (math.isfinite(v) and v > 0):
        raise ValidationError(f"{name} must be finite and > 0, got {v!r}")
    return v


@dataclass(frozen=True)
class MseInstance:
    """Squared-error instance with degraded side informations Y1, Y2.

    Gaussian form: X ~ N(0, var_x), Y1 = X + N1, Y2 = Y1 + N2 with
    ``n2=None`` meaning Y2 is a constant. Quantized form: ``source`` holds a
    discrete joint law of (X, Y1, Y2) and ``levels`` the real value of each
    letter of X.
    """

    D1: float
    D2: float
    var_x: float | None = None
    n1: float | None = None
    n2: float | None = None
    source: JointSource | None = None
    levels: tuple | None = None
    quantization_mse: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "D1", _pos(self.D1, "D1"))
        object.__setattr__(self, "D2", _pos(self.D2, "D2"))
        if self.source is None:
            if self.var_x is None or self.n1 is None:
                raise ValidationError("a Gaussian instance needs var_x and n1")
            object.__setattr__(self, "var_x", _pos(self.var_x, "var_x"))
            object.__setattr__(self, "n1", _pos(self.n1, "n1"))
            if self.n2 is not None:
                object.__setattr__(self, "n2", _pos(self.n2, "n2"))
        else:
            if self.levels is None or len(self.levels) != self.source.nx:
                raise ValidationError("levels must give one real value per source letter")
            lv = tuple(float(v) for v in self.levels)
            if not all(math.isfinite(v) for v in lv):
                raise ValidationError("levels must be finite")
            object.__setattr__(self, "levels", lv)

    @property
    def gaussian(self) -> bool:
        return self.source is None

    @property
    def case(self) -> str:
        return "d1>=d2" if self.D1 >= self.D2 else "d1<d2"

    def chain(self) -> GaussianChain:
        if not self.gaussian:
            raise ValidationError("only Gaussian instances have a chain")
        if self.n2 is None:
            return GaussianChain.with_blind_last(self.var_x, (self.n1,))
        return GaussianChain(self.var_x, (self.n1, self.n2))

    def distortion(self) -> DistortionMeasure:
        return DistortionMeasure.squared_error(self.levels)

    @classmethod
    def quantized(
        cls,
        var_x: float,
        n1: float,
        D1: float,
        D2: float,
        n2: float | None = None,
        levels: int = DEFAULT_LEVELS,
        span: float = 3.0,
        y_bins: int | None = None,
    ) -> "MseInstance":
        """Discretize the Gaussian instance on equal-width cells.

        X takes the cell centres of ``levels`` cells over +-span standard
        deviations (tails folded into the end cells); Y1 and Y2 are binned
        likewise around their own spreads. The mean squared quantization
        error of X is recorded.
        """
        var_x, n1 = _pos(var_x, "var_x"), _pos(n1, "n1")
        if levels < 2:
            raise ValidationError("need at least 2 levels")
        y_bins = y_bins or levels
        sx = math.sqrt(var_x)
        centres, px, qmse = _quantize(sx, levels, span)
        y1c, ch1 = _bin_channel(centres, math.sqrt(n1), math.sqrt(var_x + n1), y_bins, span)
        if n2 is None:
            ch2 = np.ones((y_bins, 1))
        else:
            n2 = _pos(n2, "n2")
            _, ch2 = _bin_channel(y1c, math.sqrt(n2), math.sqrt(var_x + n1 + n2), y_bins, span)
        src = JointSource.from_channels(px, ch1, ch2)
        return cls(D1, D2, source=src, levels=tuple(centres), quantization_mse=qmse)


def _edges(scale, bins, span):
    return np.linspace(-span * scale, span * scale, bins + 1)


def _quantize(sx, levels, span):
    edges = _edges(sx, levels, span)
    centres = 0.5 * (edges[:-1] + edges[1:])
    cdf = norm.cdf(edges / sx)
    cdf[0], cdf[-1] = 0.0, 1.0
    px = np.diff(cdf)
    # E[(X - c_i)^2] over each cell from the truncated-normal moments
    a = np.concatenate([[-np.inf], edges[1:-1]]) / sx
    b = np.concatenate([edges[1:-1], [np.inf]]) / sx
    m1 = sx * (norm.pdf(a) - norm.pdf(b))
    with np.errstate(invalid="ignore"):
        ta = np.where(np.isfinite(a), a * norm.pdf(a), 0.0)
        tb = np.where(np.isfinite(b), b * norm.pdf(b), 0.0)
    m2 = sx**2 * (px + ta - tb)
    qmse = float(np.sum(m2 - 2 * centres * m1 + centres**2 * px))
    return centres, px, qmse


def _bin_channel(inputs, noise_sd, spread, bins, span):
    edges = _edges(spread, bins, span)
    centres = 0.5 * (edges[:-1] + edges[1:])
    cdf = norm.cdf((edges[None, :] - np.asarray(inputs)[:, None]) / noise_sd)
    cdf[:, 0], cdf[:, -1] = 0.0, 1.0
    ch = np.diff(cdf, axis=1)
    ch = np.clip(ch, 0.0, None)
    return centres, ch / ch.sum(axis=1, keepdims=True)


def noise_split(D1: float, D2: float) -> tuple[float, float]:
    """(var(T1), var(T2)) for the case selected by D1 vs D2."""
    D1, D2 = _pos(D1, "D1"), _pos(D2, "D2")
    if D1 >= D2:
        return D1 - D2, D2
    return D1, D2 - D1


# --- mutual informations of additive test channels -----------------------------


def _gauss_cmi(var_x, s, tau):
    """I(X; X + T | Y) for Y = X + N(0, s); s = inf means no side information."""
    prec = 1.0 / var_x + (0.0 if math.isinf(s) else 1.0 / s)
    return 0.5 * math.log2((prec + 1.0 / tau) / prec)


def _mixture_entropy(levels, weights, tau):
    """Differential entropy (bits) of sum_i weights_i N(levels_i, tau)."""
    keep = weights > 0
    mu, w = np.asarray(levels)[keep], weights[keep] / weights[keep].sum()
    sd = math.sqrt(tau)
    lo, hi = mu.min() - 9 * sd, mu.max() + 9 * sd
    npts = int(min(max(4001, 40 * (hi - lo) / sd), 400001))
    t = np.linspace(lo, hi, npts)
    logc = -0.5 * math.log(2 * math.pi * tau)
    logf = logsumexp(logc - (t[None, :] - mu[:, None]) ** 2 / (2 * tau), axis=0, b=w[:, None])
    f = np.exp(logf)
    return float(-np.trapezoid(f * logf, t) / math.log(2))


def _quant_cmi(inst, side, tau):
    """I(X; X + T | Y_side) for the discrete source by 1-D integration."""
    pxy = inst.source.pair(side)
    h_noise = 0.5 * math.log2(2 * math.pi * math.e * tau)
    h = 0.0
    for y in range(pxy.shape[1]):
        py = pxy[:, y].sum()
        if py > 0:
            h += py * _mixture_entropy(inst.levels, pxy[:, y] / py, tau)
    return max(h - h_noise, 0.0)


def _cmi(inst, side, tau):
    if inst.gaussian:
        if side == "y1":
            s = inst.n1
        else:
            s = math.inf if inst.n2 is None else inst.n1 + inst.n2
        return _gauss_cmi(inst.var_x, s, tau)
    return _quant_cmi(inst, side, tau)


def inner_rates_mse(inst: MseInstance) -> RatePair:
    """Achievable (R1, R1 + R2) of the split additive-Gaussian construction."""
    t1, t2 = noise_split(inst.D1, inst.D2)
    if inst.D1 >= inst.D2:
        r1 = _cmi(inst, "y1", t1 + t2)
        r_sum = _cmi(inst, "y2", t2)
    else:
        fine, coarse = t1, t1 + t2
        r1 = _cmi(inst, "y1", fine)
        # W2' is a degraded copy of W1', so the refinement term telescopes
        extra = _cmi(inst, "y1", fine) - _cmi(inst, "y1", coarse)
        r_sum = _cmi(inst, "y2", coarse) + max(extra, 0.0)
    r_sum = max(r_sum, r1)
    return RatePair(float(r1), float(r_sum))


# --- certificate ---------------------------------------------------------------


@dataclass(frozen=True)
class GapCertificate:
    case: str
    inner: RatePair
    wz_reference: float
    hb_reference: float
    gap_r1: float
    gap_sum: float
    tol: float
    quantization_mse: float = 0.0
    budget_r1: float = BUDGET_R1
    budget_sum: float = BUDGET_SUM

    @property
    def within_budget(self) -> bool:
        return self.gap_r1 <= self.budget_r1 + self.tol and self.gap_sum <= self.budget_sum + self.tol

    @property
    def ordered(self) -> bool:
        """Inner rates are no smaller than the references, up to ``tol``."""
        return self.gap_r1 >= -self.tol and self.gap_sum >= -self.tol

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "r1_inner": self.inner.r1,
            "r_sum_inner": self.inner.r_sum,
            "wz_reference": self.wz_reference,
            "hb_reference": self.hb_reference,
            "gap_r1": self.gap_r1,
            "gap_sum": self.gap_sum,
            "tol": self.tol,
            "quantization_mse": self.quantization_mse,
            "within_budget": self.within_budget,
        }


def _quant_cfg(cfg):
    cfg = cfg or OptimizerConfig()
    return replace(
        cfg,
        card_v=cfg.card_v or _QUANT_CARD,
        card_w1=cfg.card_w1 or _QUANT_CARD,
        card_w2=cfg.card_w2 or _QUANT_CARD,
    )


def gap_certificate(inst: MseInstance, cfg: OptimizerConfig | None = None) -> GapCertificate:
    """Gaps of the inner construction to the WZ and HB references.

    Quantized references use auxiliary alphabets of size 4 unless ``cfg``
    sets them; their tolerance is ``cfg.tolerance``.
    """
    inner = inner_rates_mse(inst)
    if inst.gaussian:
        chain = inst.chain()
        wz = wyner_ziv_gaussian(chain, 1, inst.D1)
        hb, _ = hb_rate_gaussian(chain, [inst.D1, inst.D2])
        tol = GAUSSIAN_TOL
    else:
        qcfg = _quant_cfg(cfg)
        d = inst.distortion()
        wz = wyner_ziv_rate(inst.source, d, inst.D1, qcfg)
        hb = heegard_berger_rate(inst.source, d, d, inst.D1, inst.D2, qcfg)
        tol = qcfg.tolerance
    return GapCertificate(
        case=inst.case,
        inner=inner,
        wz_reference=float(wz),
        hb_reference=float(hb),
        gap_r1=float(inner.r1 - wz),
        gap_sum=float(inner.r_sum - hb),
        tol=tol,
        quantization_mse=inst.quantization_mse,
    )
