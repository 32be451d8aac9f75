"""Heuristic optimizers for the Wyner-Ziv and Heegard-Berger functions.

Every solver returns an ``RdResult`` carrying the rate together with the
auxiliary channel that achieves it, so a caller can recompute the rate from
the witness alone. Joint tensors use axes ``(x, y1, y2, aux...)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .probcore import (
    DistortionMeasure,
    JointSource,
    ValidationError,
    _check_alphabet,
    cond_entropy,
    cond_mutual_info,
    min_distortion,
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

__all__ = [
    "AuxChannel",
    "Infeasible",
    "OptimizerConfig",
    "RdResult",
    "heegard_berger_rate",
    "hb_lossless_first",
    "slepian_wolf_rate",
    "solve_heegard_berger",
    "solve_hb_lossless_first",
    "solve_wyner_ziv",
    "wyner_ziv_curve",
    "wyner_ziv_rate",
]

_SIDE_AXIS = {"y1": 1, "y2": 2}


@dataclass(frozen=True)
class AuxChannel:
    """P(aux | x) with aux = (a_1, ..., a_m) flattened row-major.

    ``decoders[j][a_j, y]`` is the reconstruction index for auxiliary letter
    ``a_j`` and side-information letter ``y``.
    """

    cond: np.ndarray
    cards: tuple
    decoders: tuple
    labels: tuple

    def __post_init__(self):
        cond = np.asarray(self.cond, dtype=float)
        if np.any(np.abs(cond.sum(axis=1) - 1.0) > 1e-12):
            raise ValidationError("auxiliary channel rows must sum to 1")
        if cond.shape[1] != int(np.prod(self.cards)):
            raise ValidationError("auxiliary channel width does not match cards")
        object.__setattr__(self, "cond", cond)

    def joint(self, src: JointSource) -> np.ndarray:
        """P(x, y1, y2, a_1, ..., a_m)."""
        ch = self.cond.reshape((src.nx, 1, 1) + tuple(self.cards))
        return src.joint.reshape(src.joint.shape + (1,) * len(self.cards)) * ch

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "cards": list(self.cards),
            "cond": self.cond.tolist(),
            "decoders": [np.asarray(t).tolist() for t in self.decoders],
        }


@dataclass(frozen=True)
class RdResult:
    rate: float
    witness: AuxChannel
    distortions: tuple


def _config(cfg):
    return OptimizerConfig() if cfg is None else cfg


def _check_D(D, name="D"):
    if not np.isfinite(D) or D < 0:
        raise ValidationError(f"{name} must be a finite value >= 0, got {D!r}")


def _check_feasible(src, d, D, name):
    dmin = min_distortion(src, d)
    if D < dmin - FEAS_TOL:
        raise Infeasible(
            f"{name}={D} is below the smallest achievable distortion {dmin}", name
        )


def _pad(mat, width):
    mat = np.asarray(mat, dtype=float)
    if mat.shape[1] >= width:
        return mat[:, :width]
    return np.hstack([mat, np.zeros((mat.shape[0], width - mat.shape[1]))])


def _identity_channel(nx, card):
    """W = X when card >= |X|; otherwise X folded onto the first letters."""
    ch = np.zeros((nx, card))
    ch[np.arange(nx), np.minimum(np.arange(nx), card - 1)] = 1.0
    return ch


def _constant_channel(nx, card):
    ch = np.zeros((nx, card))
    ch[:, 0] = 1.0
    return ch


def _erasure_channel(nx, card, lam):
    """W = X with probability 1 - lam, the spare letter otherwise."""
    ch = (1 - lam) * _identity_channel(nx, card)
    ch[:, card - 1] += lam
    return ch


def slepian_wolf_rate(src: JointSource, which_side: str = "y1") -> float:
    """H(X | Y_side), the lossless rate with decoder side information."""
    if which_side not in _SIDE_AXIS:
        raise ValidationError(f"unknown side {which_side!r}")
    return cond_entropy(src.joint, (0,), (_SIDE_AXIS[which_side],))


# --- Wyner-Ziv -------------------------------------------------------------------


def _wz_problem(src, d, D, side, card):
    s_ax = _SIDE_AXIS[side]

    def build(blocks):
        return src.joint[..., None] * blocks[0][:, None, None, :]

    def objective(joint):
        return cond_mutual_info(joint, (0,), (3,), (s_ax,))

    return ChannelProblem(
        [(src.nx, card)],
        build,
        objective,
        decoders=[Decoder(3, s_ax, d.matrix, D, "D")],
    )


def _wz_seeds(src, d, D, side, card):
    prob = _wz_problem(src, d, D, side, card)
    seeds = [[_identity_channel(src.nx, card)]]
    if card > src.nx:
        lo, hi = 0.0, 1.0
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if prob.evaluate([_erasure_channel(src.nx, card, mid)]).feasible:
                lo = mid
            else:
                hi = mid
        seeds.append([_erasure_channel(src.nx, card, lo)])
    return prob, seeds


def solve_wyner_ziv(
    src: JointSource,
    d: DistortionMeasure,
    D: float,
    cfg: OptimizerConfig | None = None,
    side: str = "y1",
    card: int | None = None,
    extra_seeds=(),
) -> RdResult:
    """Heuristic min of I(X; W | Y_side) subject to E d(X, f(W, Y_side)) <= D."""
    cfg = _config(cfg)
    _check_alphabet(src, d)
    _check_D(D)
    if side not in _SIDE_AXIS:
        raise ValidationError(f"unknown side {side!r}")
    card = card or cfg.card_w1 or src.nx + 1
    _check_feasible(src, d, D, "D")
    prob, seeds = _wz_seeds(src, d, D, side, card)
    if D >= zero_rate_distortion(src, d, side) - FEAS_TOL:
        ev = prob.evaluate([_constant_channel(src.nx, card)])
        if ev.feasible:
            return _wz_out(ev, card, src)
    seeds = seeds + [[_pad(b, card)] for b in extra_seeds]
    ev = solve(prob, seeds, cfg, tag=1)
    return _wz_out(ev, card, src)


def _wz_out(ev, card, src):
    witness = AuxChannel(ev.blocks[0], (card,), tuple(ev.decoders), ("W",))
    return RdResult(ev.objective, witness, tuple(ev.distortions))


def wyner_ziv_rate(src, d, D, cfg=None, side="y1") -> float:
    return solve_wyner_ziv(src, d, D, cfg, side).rate


def wyner_ziv_curve(src, d, Ds, cfg=None, side="y1") -> list[RdResult]:
    """Solve on each D, reusing witnesses from smaller D as seeds.

    A channel feasible at D stays feasible at any larger D, so carrying the
    best one forward makes the returned rates non-increasing in D.
    """
    order = np.argsort(np.asarray(Ds, dtype=float), kind="stable")
    out = [None] * len(order)
    prev = None
    for i in order:
        extra = [prev.witness.cond] if prev is not None else ()
        res = solve_wyner_ziv(src, d, float(Ds[i]), cfg, side, extra_seeds=extra)
        if prev is not None and prev.rate < res.rate:
            prob = _wz_problem(src, d, float(Ds[i]), side, prev.witness.cards[0])
            ev = prob.evaluate([prev.witness.cond])
            res = _wz_out(ev, prev.witness.cards[0], src)
        out[i] = res
        prev = res
    return out


# --- Heegard-Berger ----------------------------------------------------------------


def _hb_build(src, c1, c2):
    def build(blocks):
        p_w2 = blocks[0]  # (x, w2)
        p_w1 = blocks[1].reshape(src.nx, c2, c1)  # (x, w2, w1)
        ch = (p_w2[:, :, None] * p_w1).transpose(0, 2, 1)  # (x, w1, w2)
        return src.joint[..., None, None] * ch[:, None, None, :, :]

    def row_mass(blocks):
        return [np.ones(src.nx), (blocks[0] > 0).ravel().astype(float)]

    return build, row_mass


def hb_objective(joint) -> float:
    """I(X; W2 | Y2) + I(X; W1 | W2, Y1) on a tensor (x, y1, y2, w1, w2)."""
    return cond_mutual_info(joint, (0,), (4,), (2,)) + cond_mutual_info(
        joint, (0,), (3,), (4, 1)
    )


def _hb_problem(src, d1, d2, D1, D2, c1, c2, r1_cap=None):
    build, row_mass = _hb_build(src, c1, c2)
    caps = []
    if r1_cap is not None:
        caps.append(
            RateCap(lambda j: cond_mutual_info(j, (0,), (3,), (1,)), r1_cap, "R1")
        )
    return ChannelProblem(
        [(src.nx, c2), (src.nx * c2, c1)],
        build,
        hb_objective,
        decoders=[Decoder(3, 1, d1.matrix, D1, "D1"), Decoder(4, 2, d2.matrix, D2, "D2")],
        caps=caps,
        aux_axes=(3, 4),
        row_mass=row_mass,
    )


def hb_blocks_from_joint(cond, nx, c1, c2):
    """Split P(w1, w2 | x) (w1-major columns) into P(w2|x), P(w1|x,w2)."""
    ch = np.asarray(cond, dtype=float).reshape(nx, c1, c2)
    p_w2 = ch.sum(axis=1)
    p_w1 = np.zeros((nx, c2, c1))
    for x in range(nx):
        for w2 in range(c2):
            if p_w2[x, w2] > 0:
                p_w1[x, w2] = ch[x, :, w2] / p_w2[x, w2]
            else:
                p_w1[x, w2, 0] = 1.0
    return [p_w2, p_w1.reshape(nx * c2, c1)]


def independent_pair(p_w1, p_w2):
    """P(w1, w2 | x) = P(w1|x) P(w2|x), flattened w1-major."""
    p_w1, p_w2 = np.asarray(p_w1), np.asarray(p_w2)
    return (p_w1[:, :, None] * p_w2[:, None, :]).reshape(p_w1.shape[0], -1)


def hb_cards(src, cfg):
    c1 = cfg.card_w1 or src.nx * (src.nx + 3) + 2
    c2 = cfg.card_w2 or src.nx + 3
    return c1, c2


def solve_heegard_berger(
    src: JointSource,
    d1: DistortionMeasure,
    d2: DistortionMeasure,
    D1: float,
    D2: float,
    cfg: OptimizerConfig | None = None,
    r1_cap: float | None = None,
    extra_seeds=(),
) -> RdResult:
    """Heuristic R_HB(D1, D2), optionally with I(X; W1 | Y1) <= r1_cap.

    The witness is a joint P(w1, w2 | x) with no structure imposed between
    W1 and W2 beyond the Markov chain through X.
    """
    cfg = _config(cfg)
    for d, D, name in ((d1, D1, "D1"), (d2, D2, "D2")):
        _check_alphabet(src, d)
        _check_D(D, name)
        _check_feasible(src, d, D, name)
    c1, c2 = hb_cards(src, cfg)
    prob = _hb_problem(src, d1, d2, D1, D2, c1, c2, r1_cap)
    trivial = [_constant_channel(src.nx, c2), np.tile(_constant_channel(1, c1), (src.nx * c2, 1))]
    ev = prob.evaluate(trivial)
    if ev.feasible:
        return _hb_out(ev, c1, c2)
    cfg_single = cfg
    wz1 = solve_wyner_ziv(src, d1, D1, cfg_single, "y1", card=c1)
    wz2 = solve_wyner_ziv(src, d2, D2, cfg_single, "y2", card=c2)
    seeds = [
        hb_blocks_from_joint(
            independent_pair(_identity_channel(src.nx, c1), _identity_channel(src.nx, c2)),
            src.nx, c1, c2,
        ),
        hb_blocks_from_joint(independent_pair(wz1.witness.cond, wz2.witness.cond), src.nx, c1, c2),
    ]
    seeds += [hb_blocks_from_joint(s, src.nx, c1, c2) for s in extra_seeds]
    # random restarts anchor on the first feasible seed; prefer the WZ pair
    seeds = [seeds[1], seeds[0]] + seeds[2:]
    ev = solve(prob, seeds, cfg, tag=2)
    return _hb_out(ev, c1, c2)


def _hb_out(ev, c1, c2):
    p_w2 = ev.blocks[0]
    p_w1 = ev.blocks[1].reshape(p_w2.shape[0], c2, c1)
    ch = (p_w2[:, :, None] * p_w1).transpose(0, 2, 1).reshape(p_w2.shape[0], -1)
    ch = ch / ch.sum(axis=1, keepdims=True)
    witness = AuxChannel(ch, (c1, c2), tuple(ev.decoders), ("W1", "W2"))
    return RdResult(ev.objective, witness, tuple(ev.distortions))


def heegard_berger_rate(src, d1, d2, D1, D2, cfg=None) -> float:
    return solve_heegard_berger(src, d1, d2, D1, D2, cfg).rate


# --- lossless first decoder -----------------------------------------------------


def _lossless_first_problem(src, d2, D2, card):
    def build(blocks):
        return src.joint[..., None] * blocks[0][:, None, None, :]

    def objective(joint):
        return cond_mutual_info(joint, (0,), (3,), (2,)) + cond_entropy(joint, (0,), (3, 1))

    return ChannelProblem(
        [(src.nx, card)], build, objective, decoders=[Decoder(3, 2, d2.matrix, D2, "D2")]
    )


def solve_hb_lossless_first(
    src: JointSource,
    d2: DistortionMeasure,
    D2: float,
    cfg: OptimizerConfig | None = None,
) -> RdResult:
    """min over W2 of I(X; W2 | Y2) + H(X | W2, Y1): R_HB with D1 = 0."""
    cfg = _config(cfg)
    _check_alphabet(src, d2)
    _check_D(D2, "D2")
    _check_feasible(src, d2, D2, "D2")
    card = cfg.card_w2 or src.nx + 3
    prob = _lossless_first_problem(src, d2, D2, card)
    ev = prob.evaluate([_constant_channel(src.nx, card)])
    if ev.feasible:
        return RdResult(ev.objective, AuxChannel(ev.blocks[0], (card,), tuple(ev.decoders), ("W2",)), tuple(ev.distortions))
    wz = solve_wyner_ziv(src, d2, D2, cfg, "y2", card=card)
    ev = solve(prob, [[_identity_channel(src.nx, card)], [wz.witness.cond]], cfg, tag=3)
    witness = AuxChannel(ev.blocks[0], (card,), tuple(ev.decoders), ("W2",))
    return RdResult(ev.objective, witness, tuple(ev.distortions))


def hb_lossless_first(src, d2, D2, cfg=None) -> float:
    return solve_hb_lossless_first(src, d2, D2, cfg).rate
