"""Inner and outer bounds for the side-information scalable rate region.

Each bound is reported as a ``RegionFrontier``: for a grid of first-stage
rates r1, the smallest sum rate R1 + R2 the bound admits with R1 <= r1.
Both coordinates are lower bounds on the rates, so this envelope describes
the whole region.

Auxiliary channels are held as ``ScalableAux``: a tensor P(v, w1, w2 | x)
plus decoder tables, tagged with the bound whose rate expressions apply.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import rdopt
from .probcore import (
    DistortionMeasure,
    Entropies,
    JointSource,
    ValidationError,
    _check_alphabet,
    binary_entropy,
    cond_entropy,
    cond_mutual_info,
    zero_rate_distortion,
)
from .search import (
    FEAS_TOL,
    ChannelProblem,
    Decoder,
    Infeasible,
    OptimizerConfig,
    RateCap,
    solve,
)

INNER = "inner"
INNER_HAT = "inner_hat"
OUTER_OUT = "outer_out"
OUTER_CAP = "outer_cap"
LOSSLESS = "lossless"
DETERMINISTIC = "deterministic"
CONVERSE_ONLY = "deterministic_converse_only"

# rate expressions used by each kind of witness
_IN_RATES = "in"
_OUT_RATES = "out"

CASCADE_ORDERS = ("w1-w2-x", "w2-w1-x")

# per-bound offsets for the restart streams
_STREAM = {INNER: 11, INNER_HAT: 12, OUTER_OUT: 13}


@dataclass(frozen=True)
class RatePair:
    """(R1, R1 + R2) in bits per source symbol."""

    r1: float
    r_sum: float

    def __post_init__(self):
        for name in ("r1", "r_sum"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < -1e-12:
                raise ValidationError(f"{name} must be finite and >= 0, got {val!r}")
        if self.r_sum < self.r1 - 1e-9:
            raise ValidationError(f"sum rate {self.r_sum} is below r1 {self.r1}")


@dataclass(frozen=True)
class ScalableAux:
    """P(v, w1, w2 | x) with decoders f1(w1, y1) and f2(w2, y2).

    ``rates`` selects the expressions: "in" uses I(X;V,W1|Y1) and
    I(X;V,W2|Y2) + I(X;W1|Y1,V); "out" uses I(X;W1|Y1) and
    I(X;W2|Y2) + I(X;W1|Y1,W2) (V is then a dummy of size 1). With
    ``markov`` set, W1 - (X,V) - W2 is checked on construction.
    """

    channel: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    rates: str = _IN_RATES
    markov: bool = False

    def __post_init__(self):
        ch = np.asarray(self.channel, dtype=float)
        if ch.ndim != 4:
            raise ValidationError("channel must have axes (x, v, w1, w2)")
        if np.any(np.abs(ch.sum(axis=(1, 2, 3)) - 1.0) > 1e-9):
            raise ValidationError("channel rows must sum to 1")
        if self.rates not in (_IN_RATES, _OUT_RATES):
            raise ValidationError(f"unknown rate expressions {self.rates!r}")
        if self.markov:
            pv = ch.sum(axis=(2, 3))
            p1 = ch.sum(axis=3)
            p2 = ch.sum(axis=2)
            with np.errstate(invalid="ignore", divide="ignore"):
                prod = np.where(pv[:, :, None, None] > 0, p1[..., None] * p2[:, :, None, :] / pv[:, :, None, None], 0.0)
            if np.max(np.abs(prod - ch)) > 1e-9:
                raise ValidationError("W1 - (X,V) - W2 does not hold for this channel")
        object.__setattr__(self, "channel", ch)
        object.__setattr__(self, "f1", np.asarray(self.f1, dtype=int))
        object.__setattr__(self, "f2", np.asarray(self.f2, dtype=int))

    @property
    def cards(self):
        return self.channel.shape[1:]

    def joint(self, src: JointSource) -> np.ndarray:
        """P(x, y1, y2, v, w1, w2)."""
        return src.joint[..., None, None, None] * self.channel[:, None, None]

    def rate_pair(self, src: JointSource) -> tuple[float, float]:
        return _rates(self.joint(src), self.rates)

    def distortions(self, src, d1, d2) -> tuple[float, float]:
        j = self.joint(src)
        p1 = j.sum(axis=(2, 3, 5))  # x, y1, w1
        p2 = j.sum(axis=(1, 3, 4))  # x, y2, w2
        e1 = np.einsum("xyw,xwy->", p1, d1.matrix[:, self.f1])
        e2 = np.einsum("xyw,xwy->", p2, d2.matrix[:, self.f2])
        return float(e1), float(e2)

    def to_dict(self) -> dict:
        return {
            "rates": self.rates,
            "cards": list(self.cards),
            "channel": self.channel.tolist(),
            "f1": self.f1.tolist(),
            "f2": self.f2.tolist(),
        }


def _rates(joint, kind):
    # joint axes: x0 y1 y2 v3 w1_4 w2_5
    e = Entropies(joint)
    if kind == _IN_RATES:
        r1 = e.cmi((0,), (3, 4), (1,))
        rs = e.cmi((0,), (3, 5), (2,)) + e.cmi((0,), (4,), (1, 3))
    else:
        r1 = e.cmi((0,), (4,), (1,))
        rs = e.cmi((0,), (5,), (2,)) + e.cmi((0,), (4,), (1, 5))
    return r1, rs


@dataclass
class FrontierPoint:
    r1: float
    r_sum: float
    witness: ScalableAux | None = None
    witness_rates: tuple | None = None


@dataclass
class RegionFrontier:
    """Sampled lower envelope {(r1, min r_sum)} of a rate region."""

    points: list
    bound_tag: str
    notes: list = field(default_factory=list)

    def __post_init__(self):
        prev = np.inf
        for pt in self.points:
            RatePair(pt.r1, pt.r_sum)
            if pt.r_sum > prev + 1e-9:
                raise ValidationError("frontier sum rates must be non-increasing in r1")
            prev = pt.r_sum
        r1s = [pt.r1 for pt in self.points]
        if r1s != sorted(r1s):
            raise ValidationError("frontier r1 grid must be ascending")

    @property
    def r1(self) -> np.ndarray:
        return np.array([pt.r1 for pt in self.points])

    @property
    def r_sum(self) -> np.ndarray:
        return np.array([pt.r_sum for pt in self.points])

    def corner(self) -> RatePair:
        pt = self.points[0]
        return RatePair(pt.r1, pt.r_sum)

    def sum_at(self, r1: float, atol: float = 1e-12) -> float | None:
        for pt in self.points:
            if abs(pt.r1 - r1) <= atol:
                return pt.r_sum
        return None

    def contains(self, r1: float, r_sum: float) -> bool:
        """True if (r1, r_sum) is on or above the sampled envelope."""
        ok = [pt.r_sum for pt in self.points if pt.r1 <= r1 + 1e-12]
        return bool(ok) and r_sum >= min(ok) - 1e-12 and r_sum >= r1 - 1e-12

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r1", "r_sum", "bound_tag"])
        for pt in self.points:
            w.writerow([f"{pt.r1:.12g}", f"{pt.r_sum:.12g}", self.bound_tag])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "bound_tag": self.bound_tag,
                "notes": self.notes,
                "points": [
                    {
                        "r1": pt.r1,
                        "r_sum": pt.r_sum,
                        "witness_rates": list(pt.witness_rates) if pt.witness_rates else None,
                        "witness": pt.witness.to_dict() if pt.witness is not None else None,
                    }
                    for pt in self.points
                ],
            }
        )


# --- families of auxiliary channels --------------------------------------------


@dataclass
class _Family:
    """A parameterization of auxiliaries in blocks plus its rate expressions."""

    shapes: list
    build_channel: Callable[[list], np.ndarray]  # blocks -> (x, v, w1, w2)
    rates: str
    row_mass: Callable | None
    from_channel: Callable[[np.ndarray], list | None]  # (x, v, w1, w2) -> blocks
    markov: bool = False


def _cond(num, den):
    num = np.asarray(num, dtype=float)
    den = np.broadcast_to(den, num.shape)
    out = np.zeros_like(num)
    mask = den > 0
    out[mask] = num[mask] / den[mask]
    return out


def _fit(block_cols, width):
    """Pad columns to ``width`` or return None if mass lies beyond it."""
    rows, cols = block_cols.shape
    if cols <= width:
        return np.hstack([block_cols, np.zeros((rows, width - cols))])
    if np.any(block_cols[:, width:] > 0):
        return None
    return block_cols[:, :width]


def _rows_default(mat):
    mat = mat.copy()
    empty = mat.sum(axis=1) <= 0
    mat[empty, 0] = 1.0
    return mat


def _inner_family(nx, cv, c1, c2):
    def build(blocks):
        pv = blocks[0]
        p1 = blocks[1].reshape(nx, cv, c1)
        p2 = blocks[2].reshape(nx, cv, c2)
        return pv[:, :, None, None] * p1[:, :, :, None] * p2[:, :, None, :]

    def row_mass(blocks):
        m = (blocks[0] > 0).ravel().astype(float)
        return [np.ones(nx), m, m]

    def from_channel(ch):
        if ch.shape[1] > cv and np.any(ch.sum(axis=(2, 3))[:, cv:] > 0):
            return None
        pv_full = ch.sum(axis=(2, 3))
        pv = _fit(pv_full, cv)
        if pv is None:
            return None
        p1 = _cond(ch.sum(axis=3), pv_full[:, :, None])
        p2 = _cond(ch.sum(axis=2), pv_full[:, :, None])
        b1, b2 = [], []
        for v in range(cv):
            if v < ch.shape[1]:
                r1, r2 = _fit(p1[:, v, :], c1), _fit(p2[:, v, :], c2)
                if r1 is None or r2 is None:
                    return None
            else:
                r1, r2 = np.zeros((nx, c1)), np.zeros((nx, c2))
            b1.append(_rows_default(r1))
            b2.append(_rows_default(r2))
        b1 = np.stack(b1, axis=1).reshape(nx * cv, c1)
        b2 = np.stack(b2, axis=1).reshape(nx * cv, c2)
        return [pv, b1, b2]

    return _Family([(nx, cv), (nx * cv, c1), (nx * cv, c2)], build, _IN_RATES, row_mass, from_channel, True)


def _out_family(nx, c1, c2):
    def build(blocks):
        p2 = blocks[0]
        p1 = blocks[1].reshape(nx, c2, c1)
        return (p2[:, :, None] * p1).transpose(0, 2, 1)[:, None]

    def row_mass(blocks):
        return [np.ones(nx), (blocks[0] > 0).ravel().astype(float)]

    def from_channel(ch):
        if ch.shape[1] != 1:
            ch = _merge_v(ch)
        joint = ch[:, 0]
        p2 = _fit(joint.sum(axis=1), c2)
        if p2 is None:
            return None
        padded = np.zeros((nx, c1, c2))
        a, b = min(c1, joint.shape[1]), min(c2, joint.shape[2])
        if np.any(joint[:, a:, :] > 0) or np.any(joint[:, :, b:] > 0):
            return None
        padded[:, :a, :b] = joint[:, :a, :b]
        p1 = _cond(padded.transpose(0, 2, 1), p2[:, :, None])
        p1 = _rows_default(p1.reshape(nx * c2, c1))
        return [p2, p1]

    return _Family([(nx, c2), (nx * c2, c1)], build, _OUT_RATES, row_mass, from_channel)


def _hat_family(nx, c1, c2, order):
    """Cascade X -> W_fine -> W_coarse; order names the Markov string."""
    fine_is_w2 = order == "w1-w2-x"
    cf, cc = (c2, c1) if fine_is_w2 else (c1, c2)

    def build(blocks):
        pf = blocks[0]  # (x, fine)
        pc = blocks[1]  # (fine, coarse)
        t = pf[:, :, None] * pc[None, :, :]  # (x, fine, coarse)
        if fine_is_w2:
            t = t.transpose(0, 2, 1)  # (x, w1, w2)
        return t[:, None]

    def row_mass(blocks):
        return [np.ones(nx), (blocks[0].sum(axis=0) > 0).astype(float)]

    def from_channel(ch):
        if ch.shape[1] != 1:
            return None
        t = ch[:, 0]
        if fine_is_w2:
            t = t.transpose(0, 2, 1)
        pf = t.sum(axis=2)
        mass = pf.sum(axis=0)
        pc = _cond(t.sum(axis=0), mass[:, None])
        # the cascade must reproduce the channel exactly
        if np.max(np.abs(pf[:, :, None] * pc[None] - t)) > 1e-9:
            return None
        pf2 = _fit(pf, cf)
        if pf2 is None:
            return None
        pc2 = np.zeros((cf, cc))
        a, b = min(cf, pc.shape[0]), min(cc, pc.shape[1])
        if np.any(pc[:, b:] > 0):
            return None
        pc2[:a, :b] = pc[:a, :b]
        return [pf2, _rows_default(pc2)]

    return _Family([(nx, cf), (cf, cc)], build, _OUT_RATES, row_mass, from_channel)


def _merge_v(ch):
    """Map (V, W1, W2) to W1' = (V, W1), W2' = (V, W2) with a dummy V."""
    nx, cv, c1, c2 = ch.shape
    out = np.zeros((nx, cv * c1, cv * c2))
    for v in range(cv):
        out[:, v * c1 : (v + 1) * c1, v * c2 : (v + 1) * c2] = ch[:, v]
    return out[:, None]


def _problem(src, fam, d1, d2, D1, D2, r1_cap):
    def build(blocks):
        ch = fam.build_channel(blocks)
        return src.joint[..., None, None, None] * ch[:, None, None]

    last = [None, None]  # the cap and the objective see the same tensor

    def pair(joint):
        if last[0] is not joint:
            last[0], last[1] = joint, _rates(joint, fam.rates)
        return last[1]

    def objective(joint):
        return pair(joint)[1]

    def r1(joint):
        return pair(joint)[0]

    caps = [] if r1_cap is None else [RateCap(r1, r1_cap, "R1")]
    return ChannelProblem(
        fam.shapes,
        build,
        objective,
        decoders=[Decoder(4, 1, d1.matrix, D1, "D1"), Decoder(5, 2, d2.matrix, D2, "D2")],
        caps=caps,
        aux_axes=(3, 4, 5),
        row_mass=fam.row_mass,
    ), r1


def _to_aux(fam, ev):
    ch = fam.build_channel(ev.blocks)
    ch = ch / ch.sum(axis=(1, 2, 3), keepdims=True)
    return ScalableAux(ch, ev.decoders[0], ev.decoders[1], fam.rates, fam.markov)


def _independent_channel(p_w1, p_w2):
    return (np.asarray(p_w1)[:, :, None] * np.asarray(p_w2)[:, None, :])[:, None]


def _check_instance(src, d1, d2, D1, D2):
    for d, D, name in ((d1, D1, "D1"), (d2, D2, "D2")):
        _check_alphabet(src, d)
        if not np.isfinite(D) or D < 0:
            raise ValidationError(f"{name} must be a finite value >= 0")
        rdopt._check_feasible(src, d, D, name)


def _corner_channel(src, d1, d2, D1, D2, cfg, c1, c2):
    wz1 = rdopt.solve_wyner_ziv(src, d1, D1, cfg, "y1", card=c1)
    wz2 = rdopt.solve_wyner_ziv(src, d2, D2, cfg, "y2", card=c2)
    return wz1, _independent_channel(wz1.witness.cond, wz2.witness.cond)


def _frontier(src, fam, d1, d2, D1, D2, cfg, tag, grid, grid_size, warm, corner_ch, corner_r1):
    seeds_ch = [corner_ch] + [w for w in warm if w is not None]
    seed_blocks = [b for b in (fam.from_channel(ch) for ch in seeds_ch) if b is not None]
    if not seed_blocks:
        raise Infeasible("no feasible starting channel for this bound")
    free_prob, r1_fn = _problem(src, fam, d1, d2, D1, D2, None)
    free = solve(free_prob, seed_blocks, cfg, tag=_STREAM[tag])
    free_r1 = r1_fn(free_prob.build(free.blocks))
    notes = []
    if grid is None:
        hi = max(free_r1, corner_r1)
        grid = np.linspace(corner_r1, hi, grid_size) if hi > corner_r1 + 1e-9 else np.array([corner_r1])
    grid = np.sort(np.asarray(grid, dtype=float))
    points = []
    best = None
    for gi, rho in enumerate(grid):
        if rho < corner_r1 - 1e-9:
            notes.append(f"r1={rho:.6g} lies below the first-stage minimum {corner_r1:.6g}")
            continue
        prob, r1_fn = _problem(src, fam, d1, d2, D1, D2, rho)
        seeds = list(seed_blocks)
        if best is not None:
            seeds.insert(0, best.blocks)
        seeds.append(free.blocks)
        sub = replace(cfg, seed=cfg.seed + 7919 * (gi + 1))
        try:
            ev = solve(prob, seeds, sub, tag=_STREAM[tag])
        except Infeasible:
            notes.append(f"r1={rho:.6g}: no feasible seed")
            continue
        if best is not None and best.objective < ev.objective:
            ev = prob.evaluate(best.blocks)
        best = ev
        if rho > ev.objective + 1e-12:
            notes.append(f"r1={rho:.6g} exceeds the smallest sum rate; grid truncated")
            break
        aux = _to_aux(fam, ev)
        wr = aux.rate_pair(src)
        points.append(FrontierPoint(float(rho), float(ev.objective), aux, wr))
    return RegionFrontier(points, tag, notes)


def _cfg(cfg):
    return OptimizerConfig() if cfg is None else cfg


def _trivial_frontier(src, d1, d2, D1, D2, tag, rates):
    """Both distortions met with constant auxiliaries: the point (0, 0)."""
    if D1 >= zero_rate_distortion(src, d1, "y1") - FEAS_TOL and D2 >= zero_rate_distortion(src, d2, "y2") - FEAS_TOL:
        ch = np.zeros((src.nx, 1, 1, 1))
        ch[:] = 1.0
        f1 = np.argmin(src.pair("y1").T @ d1.matrix, axis=1)[None, :]
        f2 = np.argmin(src.pair("y2").T @ d2.matrix, axis=1)[None, :]
        aux = ScalableAux(ch, f1, f2, rates)
        return RegionFrontier([FrontierPoint(0.0, 0.0, aux, (0.0, 0.0))], tag, ["zero-rate distortions"])
    return None


def inner_region(
    src: JointSource,
    d1: DistortionMeasure,
    d2: DistortionMeasure,
    D1: float,
    D2: float,
    cfg: OptimizerConfig | None = None,
    r1_grid: Sequence[float] | None = None,
    grid_size: int = 33,
    warm: Sequence[ScalableAux] = (),
) -> RegionFrontier:
    """Achievable frontier over (V, W1, W2) with W1 - (X,V) - W2."""
    cfg = _cfg(cfg)
    _check_instance(src, d1, d2, D1, D2)
    triv = _trivial_frontier(src, d1, d2, D1, D2, INNER, _IN_RATES)
    if triv is not None:
        return triv
    nx = src.nx
    cv = cfg.card_v or nx + 3
    c1 = cfg.card_w1 or nx * (nx + 3) + 1
    c2 = cfg.card_w2 or nx * (nx + 3) + 1
    fam = _inner_family(nx, cv, c1, c2)
    wz1, corner = _corner_channel(src, d1, d2, D1, D2, cfg, c1, c2)
    warm_ch = [_v_copies_w2(src, d2, D2, cfg, wz1, cv, c2)] + [_hat_as_inner(w) for w in warm]
    return _frontier(src, fam, d1, d2, D1, D2, cfg, INNER, r1_grid, grid_size, warm_ch, corner, wz1.rate)


def _v_copies_w2(src, d2, D2, cfg, wz1, cv, c2):
    """V = W2 from the Y2 Wyner-Ziv witness, W1 independent of V given X."""
    card = min(cv, c2)
    wz2 = rdopt.solve_wyner_ziv(src, d2, D2, cfg, "y2", card=card)
    w1 = wz1.witness.cond
    nx = src.nx
    ch = np.zeros((nx, card, w1.shape[1], card))
    for v in range(card):
        ch[:, v, :, v] = wz2.witness.cond[:, v, None] * w1
    return ch


def _hat_as_inner(aux: ScalableAux):
    """Re-express a cascade witness with the inner-bound rate expressions.

    For W2 - W1 - X take V = W2; for W1 - W2 - X take V = W1. Either way the
    Markov condition holds because V copies one of the auxiliaries, and the
    rate pair is unchanged.
    """
    if aux.rates == _IN_RATES:
        return aux.channel
    t = aux.channel[:, 0]  # (x, w1, w2)
    nx, c1, c2 = t.shape
    if np.max(np.abs(_cascade_residual(t, fine="w1"))) <= 1e-9:
        ch = np.zeros((nx, c2, c1, c2))
        for w2 in range(c2):
            ch[:, w2, :, w2] = t[:, :, w2]
        return ch
    if np.max(np.abs(_cascade_residual(t, fine="w2"))) <= 1e-9:
        ch = np.zeros((nx, c1, c1, c2))
        for w1 in range(c1):
            ch[:, w1, w1, :] = t[:, w1, :]
        return ch
    return None


def _cascade_residual(t, fine):
    if fine == "w2":
        t = t.transpose(0, 2, 1)
    pf = t.sum(axis=2)
    pc = _cond(t.sum(axis=0), pf.sum(axis=0)[:, None])
    return pf[:, :, None] * pc[None] - t


def inner_region_hat(
    src, d1, d2, D1, D2, cfg=None, r1_grid=None, grid_size=33, orders=CASCADE_ORDERS
) -> RegionFrontier:
    """Achievable frontier restricted to cascades W1-W2-X or W2-W1-X.

    The frontier is the pointwise minimum over the requested orders.
    """
    cfg = _cfg(cfg)
    _check_instance(src, d1, d2, D1, D2)
    triv = _trivial_frontier(src, d1, d2, D1, D2, INNER_HAT, _OUT_RATES)
    if triv is not None:
        return triv
    nx = src.nx
    cap = (nx + 3) * (nx * (nx + 3) + 1)
    c1 = cfg.card_w1 or cap
    c2 = cfg.card_w2 or cap
    # the product of two WZ witnesses is no cascade; cascade seeds instead
    wz1 = rdopt.solve_wyner_ziv(src, d1, D1, cfg, "y1", card=c1)
    corners = _cascade_corners(src, c1, c2, wz1)
    fronts = []
    for order in orders:
        if order not in CASCADE_ORDERS:
            raise ValidationError(f"unknown cascade order {order!r}")
        fam = _hat_family(nx, c1, c2, order)
        fronts.append(
            _frontier(src, fam, d1, d2, D1, D2, cfg, INNER_HAT, r1_grid, grid_size, corners[order][1], corners[order][0], corners[order][2])
        )
    if len(fronts) == 1:
        return fronts[0]
    return _merge_fronts(fronts, INNER_HAT, r1_grid is None)


def _cascade_corners(src, c1, c2, wz1):
    """Starting channels per cascade order: (corner, extra seeds, corner r1)."""
    nx = src.nx
    w1 = wz1.witness.cond
    both_x = None
    if c1 >= nx and c2 >= nx:
        both_x = (rdopt._identity_channel(nx, c1)[:, :, None] * rdopt._identity_channel(nx, c2)[:, None, :])[:, None]
    # W2 - W1 - X: W1 from its WZ witness and W2 a copy of W1
    copy = (w1[:, :, None] * _copy_map(c1, c2)[None])[:, None]
    out = {"w2-w1-x": (copy, [both_x], wz1.rate)}
    # W1 - W2 - X: W2 = X and W1 drawn from W2 through the WZ witness
    if c2 >= nx:
        t = np.zeros((nx, c1, c2))
        for x in range(nx):
            t[x, :, x] = w1[x]
        out["w1-w2-x"] = (t[:, None], [both_x], wz1.rate)
    else:
        out["w1-w2-x"] = (copy, [both_x], wz1.rate)
    return out


def _copy_map(c_from, c_to):
    m = np.zeros((c_from, c_to))
    m[np.arange(c_from), np.minimum(np.arange(c_from), c_to - 1)] = 1.0
    return m


def _merge_fronts(fronts, tag, own_grid):
    """Pointwise minimum of frontiers over the union of their grids."""
    grid = sorted({pt.r1 for f in fronts for pt in f.points})
    points = []
    for rho in grid:
        cands = [pt for f in fronts for pt in f.points if pt.r1 <= rho + 1e-12]
        if not cands:
            continue
        best = min(cands, key=lambda pt: pt.r_sum)
        if rho > best.r_sum + 1e-12:
            break
        points.append(FrontierPoint(rho, best.r_sum, best.witness, best.witness_rates))
    notes = [n for f in fronts for n in f.notes]
    return RegionFrontier(points, tag, notes)


def outer_region_out(
    src, d1, d2, D1, D2, cfg=None, r1_grid=None, grid_size=33, warm: Sequence[ScalableAux] = ()
) -> RegionFrontier:
    """Heuristic envelope of the outer bound over joint P(w1, w2 | x).

    Minimization is heuristic, so the sampled envelope can sit above the
    true outer bound; the tag records this. Alphabets grow to hold any warm
    witness, whose (V, W_j) pairs are merged into single letters.
    """
    cfg = _cfg(cfg)
    _check_instance(src, d1, d2, D1, D2)
    triv = _trivial_frontier(src, d1, d2, D1, D2, OUTER_OUT, _OUT_RATES)
    if triv is not None:
        return triv
    nx = src.nx
    c1 = cfg.card_w1 or nx * (nx + 3) + 2
    c2 = cfg.card_w2 or nx + 3
    for w in warm:
        _, cv, a, b = w.channel.shape
        c1, c2 = max(c1, cv * a), max(c2, cv * b)
    cfg = replace(cfg, card_w1=c1, card_w2=c2)
    fam = _out_family(nx, c1, c2)
    wz1, corner = _corner_channel(src, d1, d2, D1, D2, cfg, c1, c2)
    hb = rdopt.solve_heegard_berger(src, d1, d2, D1, D2, replace(cfg, card_w1=c1, card_w2=c2))
    warm_ch = [hb.witness.cond.reshape(nx, 1, c1, c2)] + [w.channel for w in warm]
    front = _frontier(src, fam, d1, d2, D1, D2, cfg, OUTER_OUT, r1_grid, grid_size, warm_ch, corner, wz1.rate)
    front.notes.append("heuristic minimization: inner approximation of the outer bound")
    return front


def outer_region_cap(src, d1, d2, D1, D2, cfg=None, r1_grid=None, grid_size=33) -> RegionFrontier:
    """r1 >= R_WZ(D1) and r_sum >= max(r1, R_HB(D1, D2))."""
    cfg = _cfg(cfg)
    _check_instance(src, d1, d2, D1, D2)
    wz = rdopt.solve_wyner_ziv(src, d1, D1, cfg, "y1")
    hb = rdopt.solve_heegard_berger(src, d1, d2, D1, D2, cfg)
    lo, hi = wz.rate, max(hb.rate, wz.rate)
    if r1_grid is None:
        r1_grid = np.linspace(lo, hi, grid_size) if hi > lo + 1e-9 else [lo]
    points, notes = [], []
    for rho in sorted(r1_grid):
        if rho < lo - 1e-9:
            notes.append(f"r1={rho:.6g} lies below R_WZ(D1)={lo:.6g}")
            continue
        if rho > hi + 1e-12:
            notes.append(f"r1={rho:.6g} exceeds R_HB; grid truncated")
            break
        points.append(FrontierPoint(float(rho), float(hi)))
    return RegionFrontier(points, OUTER_CAP, notes)


# --- exact special cases -------------------------------------------------------


def lossless_region(
    src: JointSource,
    mode: str,
    other_d: DistortionMeasure,
    other_D: float,
    cfg: OptimizerConfig | None = None,
    lossless_d: DistortionMeasure | None = None,
    grid_size: int = 33,
) -> RegionFrontier:
    """Region with one decoder lossless.

    mode "first": r1 >= H(X|Y1), r_sum >= min_W2 I(X;W2|Y2) + H(X|Y1,W2).
    mode "second": r1 >= R_WZ(D1) with Y1, r_sum >= H(X|Y2).
    """
    cfg = _cfg(cfg)
    if lossless_d is not None and not lossless_d.in_gamma_d:
        raise ValidationError("the lossless decoder needs a distortion with d(x,x)=0 and d(x,y)>0 otherwise")
    _check_alphabet(src, other_d)
    nx = src.nx
    if mode == "first":
        lo = rdopt.slepian_wolf_rate(src, "y1")
        res = rdopt.solve_hb_lossless_first(src, other_d, other_D, cfg)
        hi = max(res.rate, lo)
        w2 = res.witness.cond
        c2 = w2.shape[1]
        # W1 = X and V = W2
        ch = np.zeros((nx, c2, nx, c2))
        for x in range(nx):
            ch[x, :, x, :] = np.diag(w2[x])
        f1 = np.tile(np.arange(nx)[:, None], (1, src.ny1))
        aux = ScalableAux(ch, f1, res.witness.decoders[0], _IN_RATES, markov=True)
    elif mode == "second":
        lo_res = rdopt.solve_wyner_ziv(src, other_d, other_D, cfg, "y1")
        lo = lo_res.rate
        hi = max(rdopt.slepian_wolf_rate(src, "y2"), lo)
        w1 = lo_res.witness.cond
        ch = (w1[:, :, None] * np.eye(nx)[:, None, :])[:, None]
        f2 = np.tile(np.arange(nx)[:, None], (1, src.ny2))
        aux = ScalableAux(ch, lo_res.witness.decoders[0], f2, _IN_RATES, markov=True)
    else:
        raise ValidationError(f"mode must be 'first' or 'second', got {mode!r}")
    grid = np.linspace(lo, hi, grid_size) if hi > lo + 1e-12 else np.array([lo])
    wr = aux.rate_pair(src)
    return RegionFrontier([FrontierPoint(float(r), float(hi), aux, wr) for r in grid], LOSSLESS)


def _is_function_of(a, b):
    """True if a = Q'(b) for some map Q' (tables over the same X)."""
    a, b = np.asarray(a), np.asarray(b)
    seen = {}
    for ai, bi in zip(a, b):
        if seen.setdefault(int(bi), int(ai)) != int(ai):
            return False
    return True


def deterministic_entropies(src: JointSource, q1, q2) -> tuple[float, float]:
    """(H(Z1|Y1), H(Z2|Y2) + H(Z1|Y1,Z2)) for Z_i = q_i(X)."""
    q1, q2 = np.asarray(q1, dtype=int), np.asarray(q2, dtype=int)
    if q1.shape != (src.nx,) or q2.shape != (src.nx,):
        raise ValidationError("function tables must have one entry per source letter")
    if q1.min() < 0 or q2.min() < 0:
        raise ValidationError("function tables must be non-negative integers")
    n1, n2 = q1.max() + 1, q2.max() + 1
    m1 = np.eye(n1)[q1]
    m2 = np.eye(n2)[q2]
    # tensor (x, y1, y2, z1, z2)
    t = src.joint[..., None, None] * (m1[:, :, None] * m2[:, None, :])[:, None, None]
    r1 = cond_entropy(t, (3,), (1,))
    rs = cond_entropy(t, (4,), (2,)) + cond_entropy(t, (3,), (1, 4))
    return r1, rs


def deterministic_region(
    src: JointSource, q1, q2, diagnostics: bool = False, grid_size: int = 33
) -> RegionFrontier:
    """Region for lossless recovery of Z1 = q1(X) at decoder 1 and Z2 = q2(X) at decoder 2.

    Needs q2 to factor through q1 or q1 through q2. Otherwise the same
    entropic expressions are only an outer bound; ``diagnostics=True``
    returns them tagged as such instead of raising.
    """
    q1, q2 = np.asarray(q1, dtype=int), np.asarray(q2, dtype=int)
    r1, rs = deterministic_entropies(src, q1, q2)
    rs = max(rs, r1)
    degraded = _is_function_of(q2, q1) or _is_function_of(q1, q2)
    if not degraded and not diagnostics:
        raise ValidationError(
            "neither function factors through the other; the entropic bound is a converse only "
            "(rerun with diagnostics to obtain it)"
        )
    tag = DETERMINISTIC if degraded else CONVERSE_ONLY
    points = []
    witness = None
    if degraded:
        witness = _deterministic_witness(src, q1, q2)
    wr = witness.rate_pair(src) if witness is not None else None
    grid = np.linspace(r1, rs, grid_size) if rs > r1 + 1e-12 else np.array([r1])
    for r in grid:
        points.append(FrontierPoint(float(r), float(rs), witness, wr))
    notes = [] if degraded else ["converse expressions only: not shown achievable"]
    return RegionFrontier(points, tag, notes)


def _deterministic_witness(src, q1, q2):
    """W1 = Z1 and V = W2 = Z2."""
    n1, n2 = q1.max() + 1, q2.max() + 1
    ch = np.zeros((src.nx, n2, n1, n2))
    ch[np.arange(src.nx), q2, q1, q2] = 1.0
    f1 = np.tile(np.arange(n1)[:, None], (1, src.ny1))
    f2 = np.tile(np.arange(n2)[:, None], (1, src.ny2))
    return ScalableAux(ch, f1, f2, _IN_RATES, markov=True)


# --- perfect scalability ----------------------------------------------------------


@dataclass
class ScalabilityCertificate:
    """Outcome of the perfect-scalability search.

    ``status`` is "certified", "impossible" (an analytic test fired) or
    "inconclusive" (nothing found; this proves nothing).
    """

    status: str
    rates: tuple | None = None
    wz_rates: tuple | None = None
    witness: ScalableAux | None = None
    reason: str = ""
    sufficiency_only: bool = False

    @property
    def found(self) -> bool:
        return self.status == "certified"


def _dsbs_parameter(src: JointSource):
    """Crossover p if src is a DSBS with constant Y2, else None."""
    if src.nx != 2 or src.ny1 != 2 or src.ny2 != 1:
        return None
    m = np.asarray(src.px_y1)
    p = 2 * m[0, 1]
    ref = 0.5 * np.array([[1 - p, p], [p, 1 - p]])
    if np.max(np.abs(m - ref)) > 1e-12 or not 0 < p < 0.5:
        return None
    return float(p)


def perfect_scalability_certificate(
    src: JointSource,
    d1: DistortionMeasure,
    d2: DistortionMeasure,
    D1: float,
    D2: float,
    cfg: OptimizerConfig | None = None,
) -> ScalabilityCertificate:
    """Search for a cascade W1 - W2 - X meeting both Wyner-Ziv rates."""
    from . import dsbs as _dsbs

    cfg = _cfg(cfg)
    _check_instance(src, d1, d2, D1, D2)
    hamming = all(np.array_equal(d.matrix, 1 - np.eye(2)) for d in (d1, d2)) if src.nx == 2 else False
    p = _dsbs_parameter(src)
    if p is not None and hamming and D1 <= 0.5 and D2 <= 0.5:
        if _dsbs.classify_region(p, D1, D2) == _dsbs.Region.I_D and _dsbs.rhb_exceeds_second_wz(p, D1, D2):
            rate = _dsbs.hb_dsbs_region_ID(p, D1, D2).rate
            return ScalabilityCertificate(
                "impossible",
                wz_rates=(_dsbs.wz_dsbs(p, D1), 1 - binary_entropy(D2)),
                reason=f"R_HB={rate:.6g} exceeds 1 - h_b(D2)={1 - binary_entropy(D2):.6g}",
            )
    support = src.support_condition()
    nx = src.nx
    c1 = cfg.card_w1 or nx + 1
    c2 = cfg.card_w2 or nx + 1
    wz1 = rdopt.solve_wyner_ziv(src, d1, D1, cfg, "y1", card=c1)
    wz2 = rdopt.solve_wyner_ziv(src, d2, D2, cfg, "y2", card=c2)
    target = (wz1.rate, wz2.rate)
    fam = _hat_family(nx, c1, c2, "w1-w2-x")

    def build(blocks):
        ch = fam.build_channel(blocks)
        return src.joint[..., None, None, None] * ch[:, None, None]

    def objective(j):
        return cond_mutual_info(j, (0,), (4,), (1,)) + cond_mutual_info(j, (0,), (5,), (2,))

    prob = ChannelProblem(
        fam.shapes,
        build,
        objective,
        decoders=[Decoder(4, 1, d1.matrix, D1, "D1"), Decoder(5, 2, d2.matrix, D2, "D2")],
        aux_axes=(4, 5),
        row_mass=fam.row_mass,
    )
    eye2 = rdopt._identity_channel(nx, c2)
    seeds = []
    # W2 = X, W1 = WZ witness applied to W2
    pc = np.zeros((c2, c1))
    pc[: min(nx, c2)] = wz1.witness.cond[: min(nx, c2)]
    pc = _rows_default(pc)
    seeds.append([eye2, pc])
    # W2 from its WZ witness, W1 = W2 folded
    seeds.append([wz2.witness.cond, _copy_map(c2, c1)])
    seeds.append([eye2, _copy_map(c2, c1)])
    try:
        ev = solve(prob, seeds, cfg, tag=5)
    except Infeasible as exc:
        return ScalabilityCertificate("inconclusive", wz_rates=target, reason=str(exc), sufficiency_only=not support)
    j = prob.build(ev.blocks)
    r1 = cond_mutual_info(j, (0,), (4,), (1,))
    r2 = cond_mutual_info(j, (0,), (5,), (2,))
    aux = _to_aux(fam, ev)
    ok = r1 <= target[0] + cfg.tolerance and r2 <= target[1] + cfg.tolerance
    status = "certified" if ok else "inconclusive"
    reason = "" if ok else f"best cascade rates ({r1:.6g}, {r2:.6g}) vs WZ ({target[0]:.6g}, {target[1]:.6g})"
    return ScalabilityCertificate(status, (r1, r2), target, aux, reason, sufficiency_only=not support)
