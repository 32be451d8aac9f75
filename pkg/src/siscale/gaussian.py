"""Quadratic-Gaussian source with N degraded side informations.

Y_k = X + N_1 + ... + N_k with independent Gaussian increments, so Y_1 is
the best side information. Decoders are labelled 1..N and ranks are
1-based throughout, matching those labels.

Two independent routes give the Heegard-Berger rate: the lower-bound
formula on a subset of active decoders, and mutual informations of the
explicit Gaussian test channel W*_k = X + Z'_1 + ... + Z'_{rank(k)}.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .probcore import ValidationError

NO_SIDE_INFO_SCALE = 1e12


@dataclass(frozen=True)
class GaussianChain:
    var_x: float
    noise_increments: tuple

    def __post_init__(self):
        inc = tuple(float(v) for v in self.noise_increments)
        if not (math.isfinite(self.var_x) and self.var_x > 0):
            raise ValidationError(f"var_x must be finite and > 0, got {self.var_x!r}")
        if not inc:
            raise ValidationError("at least one decoder is needed")
        if any(not (math.isfinite(v) and v > 0) for v in inc):
            raise ValidationError("noise increments must be finite and > 0")
        object.__setattr__(self, "var_x", float(self.var_x))
        object.__setattr__(self, "noise_increments", inc)

    @classmethod
    def with_blind_last(cls, var_x: float, increments: Sequence[float]) -> "GaussianChain":
        """Append a decoder without side information (a huge final increment)."""
        return cls(var_x, tuple(increments) + (NO_SIDE_INFO_SCALE * var_x,))

    @property
    def N(self) -> int:
        return len(self.noise_increments)

    @property
    def s(self) -> np.ndarray:
        """Cumulative noise variances s_k, k = 1..N (index k-1)."""
        return np.cumsum(self.noise_increments)

    def sub_chain(self, members: Sequence[int]) -> "GaussianChain":
        """Chain seen by decoders ``members`` only: skipped increments merge."""
        s = self.s
        members = sorted(members)
        cum = [s[k - 1] for k in members]
        inc = [cum[0]] + [b - a for a, b in zip(cum, cum[1:])]
        return GaussianChain(self.var_x, tuple(inc))


def _check_k(chain, k):
    if not 1 <= k <= chain.N:
        raise ValidationError(f"decoder index must lie in 1..{chain.N}, got {k!r}")


def conditional_variance(chain: GaussianChain, k: int) -> float:
    """MMSE of X from Y_k."""
    _check_k(chain, k)
    return 1.0 / (1.0 / chain.var_x + 1.0 / chain.s[k - 1])


def _posterior_var(chain, k, tau):
    # var(X | Y_k, X + Z) with var(Z) = tau; k = 0 means X itself is known
    if k == 0:
        return 0.0
    a = 1.0 / chain.var_x + 1.0 / chain.s[k - 1]
    return 1.0 / (a + (0.0 if math.isinf(tau) else 1.0 / tau))


def solve_test_noise(chain: GaussianChain, k: int, D: float) -> float:
    """var(Z_k) with E[X - E(X | Y_k, X + Z_k)]^2 = D.

    Returns ``math.inf`` when D is at or above the side-information MMSE:
    the constraint is then met without W_k and is ignored.
    """
    _check_k(chain, k)
    if not (math.isfinite(D) and D > 0):
        raise ValidationError(f"distortion must be finite and > 0, got {D!r}")
    gap = 1.0 / D - 1.0 / chain.var_x - 1.0 / chain.s[k - 1]
    if gap <= 0:
        return math.inf
    return 1.0 / gap


def wyner_ziv_gaussian(chain: GaussianChain, k: int, D: float) -> float:
    """1/2 log2+(var(X|Y_k) / D)."""
    cv = conditional_variance(chain, k)
    if D >= cv:
        return 0.0
    return 0.5 * math.log2(cv / D)


@dataclass(frozen=True)
class WStarConstruction:
    """Ranked Gaussian test channels for a distortion vector.

    ``omega[k-1]`` is the rank of decoder k (1 = smallest test noise, the
    finest description); ``increments[r-1]`` is var(Z'_r). Ignored
    decoders carry infinite test noise and rank last.
    """

    test_noise: tuple
    omega: tuple
    increments: tuple
    active_set: tuple

    @property
    def N(self):
        return len(self.omega)

    def decoder_of_rank(self, r: int) -> int:
        return self.omega.index(r) + 1

    def tau(self, r: int) -> float:
        """var(W*_{rank r} - X): cumulative test noise of rank r."""
        return self.test_noise[self.decoder_of_rank(r) - 1]

    def active_rank(self, k: int) -> int:
        """Rank of k within the active set, ordered by decoder index."""
        return self.active_set.index(k) + 1


def _check_D(chain, D):
    D = [float(v) for v in D]
    if len(D) != chain.N:
        raise ValidationError(f"need {chain.N} distortions, got {len(D)}")
    for v in D:
        if not (math.isfinite(v) and v > 0):
            raise ValidationError(f"distortions must be finite and > 0, got {v!r}")
    return D


def construct_w_star(chain: GaussianChain, D: Sequence[float]) -> WStarConstruction:
    D = _check_D(chain, D)
    tn = [float(solve_test_noise(chain, k, D[k - 1])) for k in range(1, chain.N + 1)]
    # ascending variance, ties broken by decoder index
    order = sorted(range(chain.N), key=lambda i: (tn[i], i))
    omega = [0] * chain.N
    for r, i in enumerate(order, start=1):
        omega[i] = r
    inc = []
    prev = 0.0
    for i in order:
        if math.isinf(tn[i]):
            inc.append(math.inf)
        else:
            inc.append(float(tn[i] - prev))
            prev = tn[i]
    active = tuple(
        k
        for k in range(1, chain.N + 1)
        if not math.isinf(tn[k - 1]) and all(omega[k - 1] < omega[j - 1] for j in range(k + 1, chain.N + 1))
    )
    return WStarConstruction(tuple(tn), tuple(omega), tuple(inc), active)


def _clip_D(chain, D):
    return [min(d, conditional_variance(chain, k)) for k, d in enumerate(D, start=1)]


def hb_lower_bound_subset(chain: GaussianChain, D: Sequence[float], subset: Iterable[int]) -> float:
    """Lower bound on R_HB from the constraints of ``subset`` alone.

    The derivation is applied to the sub-chain of the subset's side
    informations. Distortions above a decoder's MMSE are clipped to it,
    which leaves R_HB unchanged.
    """
    D = _clip_D(chain, _check_D(chain, D))
    members = sorted(set(int(k) for k in subset))
    if not members:
        raise ValidationError("subset must be non-empty")
    for k in members:
        _check_k(chain, k)
    sub = chain.sub_chain(members)
    Ds = [D[k - 1] for k in members]
    s = sub.s
    vx = sub.var_x
    # var(X | Y_last) over the product of the variances of the prediction errors
    log_num = math.log2(vx * s[-1] / (vx + s[-1]))
    log_den = math.log2(Ds[0])
    for l in range(1, sub.N):
        s_prev, s_cur = s[l - 1], s[l]
        inc = sub.noise_increments[l]
        g = s_prev / s_cur
        log_num += math.log2(s_prev * inc / s_cur)
        log_den += math.log2((1 - g) ** 2 * (Ds[l] + s_prev) + g**2 * inc)
    return 0.5 * (log_num - log_den)


def hb_rate_gaussian(chain: GaussianChain, D: Sequence[float]) -> tuple[float, tuple]:
    """(R_HB, active set) from the subset bound evaluated on the active set."""
    cons = construct_w_star(chain, D)
    if not cons.active_set:
        return 0.0, ()
    return hb_lower_bound_subset(chain, D, cons.active_set), cons.active_set


def hb_subset_max(chain: GaussianChain, D: Sequence[float]) -> tuple[float, tuple]:
    """Brute-force max of the subset bound over all non-empty subsets."""
    best, arg = -math.inf, ()
    for n in range(1, chain.N + 1):
        for sub in itertools.combinations(range(1, chain.N + 1), n):
            val = hb_lower_bound_subset(chain, D, sub)
            if val > best:
                best, arg = val, sub
    return best, arg


def _mi_x_w_given_y(chain, k, tau):
    """I(X; X + Z | Y_k) with var(Z) = tau, in bits."""
    if math.isinf(tau) or k == 0:
        return 0.0
    return 0.5 * math.log2(_posterior_var(chain, k, math.inf) / _posterior_var(chain, k, tau))


def hb_rate_telescoping(chain: GaussianChain, D: Sequence[float]) -> float:
    """Sum over the active set of I(X; W*_k | Y_k, W*_next) for the explicit channel."""
    cons = construct_w_star(chain, D)
    total = 0.0
    act = cons.active_set
    for idx, k in enumerate(act):
        tau_k = cons.test_noise[k - 1]
        tau_next = cons.test_noise[act[idx + 1] - 1] if idx + 1 < len(act) else math.inf
        # W_next is W_k plus independent noise, so W_k screens it off from X
        total += _mi_x_w_given_y(chain, k, tau_k) - _mi_x_w_given_y(chain, k, tau_next)
    return total


@dataclass(frozen=True)
class CoverGrid:
    """Cell rates R[i-1, j-1] = I(W_(rank i); Y_{j-1} | Y_j, W_(rank i+1)), Y_0 = X."""

    cells: np.ndarray
    omega: tuple

    @property
    def N(self):
        return self.cells.shape[0]

    def rectangle(self, k: int) -> np.ndarray:
        """Cells of decoder k: ranks >= omega(k), side-information levels <= k."""
        mask = np.zeros_like(self.cells, dtype=bool)
        mask[self.omega[k - 1] - 1 :, :k] = True
        return mask

    def covered(self, decoders: Iterable[int]) -> np.ndarray:
        mask = np.zeros_like(self.cells, dtype=bool)
        for k in decoders:
            mask |= self.rectangle(k)
        return mask

    def covered_rate(self, decoders: Iterable[int]) -> float:
        return float(self.cells[self.covered(decoders)].sum())

    def slice_sum(self, i: int, k: int) -> float:
        """Sum over j <= k of the rank-i row."""
        return float(self.cells[i - 1, :k].sum())

    def to_csv(self) -> str:
        lines = ["rank_i,level_j,rate"]
        for i in range(self.N):
            for j in range(self.N):
                lines.append(f"{i + 1},{j + 1},{self.cells[i, j]:.12g}")
        return "\n".join(lines) + "\n"


def cover_grid(chain: GaussianChain, D: Sequence[float]) -> CoverGrid:
    cons = construct_w_star(chain, D)
    N = chain.N
    taus = [cons.tau(r) for r in range(1, N + 1)] + [math.inf]
    cells = np.zeros((N, N))
    for i in range(N):
        t_i, t_next = taus[i], taus[i + 1]
        if math.isinf(t_i) or t_i == t_next:
            continue
        for j in range(1, N + 1):
            # I(W_i; X | Y_j, W_next) minus the same with Y_{j-1}
            hi = _mi_x_w_given_y(chain, j, t_i) - _mi_x_w_given_y(chain, j, t_next)
            lo = _mi_x_w_given_y(chain, j - 1, t_i) - _mi_x_w_given_y(chain, j - 1, t_next)
            cells[i, j - 1] = hi - lo
    return CoverGrid(cells, cons.omega)


def instance_mi_slice(chain: GaussianChain, D: Sequence[float], i: int, k: int) -> float:
    """I(W_(rank i); X | Y_k, W_(rank i+1)) computed directly."""
    cons = construct_w_star(chain, D)
    t_i = cons.tau(i)
    t_next = cons.tau(i + 1) if i < chain.N else math.inf
    return _mi_x_w_given_y(chain, k, t_i) - _mi_x_w_given_y(chain, k, t_next)


def _check_order(chain, order):
    order = [int(k) for k in order]
    if sorted(order) != list(range(1, chain.N + 1)):
        raise ValidationError(f"order must be a permutation of 1..{chain.N}, got {order}")
    return order


def scalable_rates(chain: GaussianChain, D: Sequence[float], order: Sequence[int]) -> np.ndarray:
    """Stage rates for serving decoders in ``order``: the newly covered area."""
    order = _check_order(chain, order)
    grid = cover_grid(chain, D)
    rates = []
    mask = np.zeros_like(grid.cells, dtype=bool)
    for k in order:
        new = grid.rectangle(k) & ~mask
        rates.append(float(grid.cells[new].sum()))
        mask |= new
    return np.array(rates)


def prefix_hb_rates(chain: GaussianChain, D: Sequence[float], order: Sequence[int]) -> np.ndarray:
    """R_HB of the first k decoders of ``order``, the others unconstrained."""
    order = _check_order(chain, order)
    D = _check_D(chain, D)
    out = []
    for n in range(1, chain.N + 1):
        keep = set(order[:n])
        Dp = [d if k in keep else conditional_variance(chain, k) for k, d in enumerate(D, start=1)]
        out.append(hb_rate_gaussian(chain, Dp)[0])
    return np.array(out)


@dataclass(frozen=True)
class ScalabilityReport:
    per_stage: tuple
    offending: int | None

    @property
    def all_stages(self) -> bool:
        return all(self.per_stage)


def perfect_scalability_gaussian(
    chain: GaussianChain, D: Sequence[float], order: Sequence[int], tol: float = 1e-9
) -> ScalabilityReport:
    """Stage k passes iff R_HB of the first k decoders equals the WZ rate of the k-th."""
    order = _check_order(chain, order)
    prefix = prefix_hb_rates(chain, D, order)
    flags = []
    for n, k in enumerate(order):
        wz = wyner_ziv_gaussian(chain, k, float(D[k - 1]))
        flags.append(bool(abs(prefix[n] - wz) <= tol))
    offending = next((order[n] for n, ok in enumerate(flags) if not ok), None)
    return ScalabilityReport(tuple(flags), offending)
