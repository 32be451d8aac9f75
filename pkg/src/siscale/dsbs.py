"""Closed forms for the doubly symmetric binary source under Hamming distortion.

X is uniform on {0, 1}, Y1 is X through a BSC with crossover ``p`` and the
second decoder sees no side information.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .probcore import ValidationError, binary_convolve, binary_entropy

_LN2 = math.log(2.0)


class Region(str, enum.Enum):
    I_D = "I-D"
    I_C = "I-C"
    UNRESOLVED = "UNRESOLVED(I-A/I-B)"
    DEGENERATE = "DEGENERATE"


@dataclass(frozen=True)
class DsbsInstance:
    p: float
    D1: float
    D2: float

    def __post_init__(self):
        _check_p(self.p)
        for name in ("D1", "D2"):
            val = getattr(self, name)
            if not 0.0 <= val <= 0.5:
                raise ValidationError(f"{name} must lie in [0, 0.5], got {val!r}")


def _check_p(p):
    if not 0.0 < p < 0.5:
        raise ValidationError(f"crossover p must lie in (0, 0.5), got {p!r}")


def _check_u(u, hi=0.5):
    if not 0.0 <= u <= hi:
        raise ValidationError(f"argument must lie in [0, {hi}], got {u!r}")


def g_function(p: float, u: float) -> float:
    """G(u) = h_b(p*u) - h_b(u), evaluated as written."""
    _check_p(p)
    _check_u(u)
    return binary_entropy(binary_convolve(p, u)) - binary_entropy(u)


def g_prime(p: float, u: float) -> float:
    """Analytic derivative of G on (0, 0.5)."""
    v = binary_convolve(p, u)
    return (1 - 2 * p) * math.log2((1 - v) / v) - math.log2((1 - u) / u)


def _g_second(p, u):
    v = binary_convolve(p, u)
    return (1.0 / (u * (1 - u)) - (1 - 2 * p) ** 2 / (v * (1 - v))) / _LN2


def _tangent_gap(p, d):
    # zero where the line from (p, 0) touches G at d
    return g_function(p, d) - (d - p) * g_prime(p, d)


def critical_distortion(p: float) -> float:
    """The tangent point d_c in (0, p) where G(d)/(d - p) = G'(d)."""
    _check_p(p)
    lo, hi = 1e-9, p - 1e-9
    f_lo, f_hi = _tangent_gap(p, lo), _tangent_gap(p, hi)
    if f_lo * f_hi > 0:
        raise ArithmeticError(f"tangent condition not bracketed for p={p}")
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        f_mid = _tangent_gap(p, mid)
        if f_mid == 0:
            lo = hi = mid
            break
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    d = 0.5 * (lo + hi)
    # one Newton step: F'(d) = -(d - p) G''(d)
    slope = -(d - p) * _g_second(p, d)
    if slope != 0:
        cand = d - _tangent_gap(p, d) / slope
        if 0 < cand < p and abs(_tangent_gap(p, cand)) <= abs(_tangent_gap(p, d)):
            d = cand
    return d


def wz_dsbs(p: float, D: float) -> float:
    """Wyner-Ziv rate R*_{X|Y}(D) for the DSBS."""
    _check_p(p)
    _check_u(D)
    dc = critical_distortion(p)
    if D <= dc:
        return g_function(p, D)
    if D < p:
        return g_function(p, dc) * (p - D) / (p - dc)
    return 0.0


def wz_test_channel(p: float, D: float) -> np.ndarray:
    """Optimal forward channel P(w|x) for ``wz_dsbs``: columns (0, 1, erase).

    Below d_c it is a BSC(D); between d_c and p it time-shares a BSC(d_c)
    with a zero-rate letter on which the decoder falls back to Y.
    """
    dc = critical_distortion(p)
    if D <= dc:
        a, lam = D, 1.0
    elif D < p:
        a, lam = dc, (p - D) / (p - dc)
    else:
        a, lam = 0.0, 0.0
    return np.array(
        [[lam * (1 - a), lam * a, 1 - lam], [lam * a, lam * (1 - a), 1 - lam]]
    )


@dataclass(frozen=True)
class CascadeWitness:
    """W1 = X through BSC(D1); W2 = W1 through BSC(eta), so D1*eta = D2."""

    rate: float
    eta: float
    p_w1_given_x: np.ndarray
    p_w2_given_w1: np.ndarray

    def distortions(self) -> tuple[float, float]:
        px = np.array([0.5, 0.5])
        p_w2_given_x = self.p_w1_given_x @ self.p_w2_given_w1
        d1 = float(px @ (self.p_w1_given_x * (1 - np.eye(2))).sum(axis=1))
        d2 = float(px @ (p_w2_given_x * (1 - np.eye(2))).sum(axis=1))
        return d1, d2


def hb_dsbs_region_ID(p: float, D1: float, D2: float) -> CascadeWitness:
    """R_HB(D1, D2) = 1 - h_b(D2*p) + G(D1) on Region I-D, with its witness."""
    DsbsInstance(p, D1, D2)
    dc = critical_distortion(p)
    if D1 > min(dc, D2):
        raise ValidationError(
            f"(D1={D1}, D2={D2}) lies in {classify_region(p, D1, D2).value}, not I-D"
        )
    rate = 1 - binary_entropy(binary_convolve(D2, p)) + g_function(p, D1)
    eta = 0.5 if D1 == 0.5 else (D2 - D1) / (1 - 2 * D1)
    bsc = lambda a: np.array([[1 - a, a], [a, 1 - a]])
    return CascadeWitness(rate, eta, bsc(D1), bsc(eta))


def ic_eta(p: float, D1: float, D2: float) -> float | None:
    """A crossover eta with D2 <= D2*eta = eta' <= d_c, or None if none exists.

    eta' is the X-to-W1 crossover of the cascade X -> W2 -> W1 in which
    W2 is X through BSC(D2). eta' is pushed as close to d_c (or to D1
    when D1 < d_c) as the chain allows.
    """
    dc = critical_distortion(p)
    if D2 > dc or D2 >= 0.5:
        return None
    target = min(D1, dc)
    if target < D2:
        return None
    return (target - D2) / (1 - 2 * D2)


def classify_region(p: float, D1: float, D2: float) -> Region:
    inst = DsbsInstance(p, D1, D2)
    dc = critical_distortion(p)
    if inst.D1 <= min(dc, inst.D2):
        return Region.I_D
    if inst.D1 >= p or inst.D2 >= 0.5:
        return Region.DEGENERATE
    if ic_eta(p, D1, D2) is not None:
        return Region.I_C
    return Region.UNRESOLVED


def rhb_exceeds_second_wz(p: float, D1: float, D2: float) -> bool:
    """Analytic impossibility test for perfect scalability on Region I-D.

    Compares R_HB(D1, D2) with R(D2) = 1 - h_b(D2), the rate the second
    decoder alone would need.
    """
    rate = hb_dsbs_region_ID(p, D1, D2).rate
    return rate > 1 - binary_entropy(D2) + 1e-12
