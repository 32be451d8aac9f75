"""Multi-start search over tuples of row-stochastic matrices.

A problem is a list of stochastic blocks (the auxiliary channels), a builder
mapping blocks to a joint tensor with axes ``(x, y1, y2, aux...)``, an
objective on that tensor, decoder constraints and optional rate caps. The
search is primal-feasible: a candidate is accepted only if every expected
distortion (under its optimal decoders) and every capped rate stays within
its bound plus ``FEAS_TOL``.

Each restart runs quantized coordinate descent over rows, then a continuous
polish (SLSQP with decoders frozen) whose result is pulled back toward the
incumbent until feasible.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .probcore import joint_entropy, marginal

FEAS_TOL = 1e-12
_GRID_LIMIT = 400


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs for the heuristic minimizers.

    ``card_*`` override the auxiliary alphabet caps; ``None`` means the
    default cap of the operation being run.
    """

    grid_resolution: int = 8
    restarts: int = 4
    descent_iterations: int = 20
    tolerance: float = 5e-3
    seed: int = 20060417
    polish: bool = True
    card_v: int | None = None
    card_w1: int | None = None
    card_w2: int | None = None

    def __post_init__(self):
        if self.grid_resolution < 2:
            raise ValueError("grid_resolution must be >= 2")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.restarts < 0 or self.descent_iterations < 1:
            raise ValueError("restarts must be >= 0 and descent_iterations >= 1")


class Infeasible(ValueError):
    """No auxiliary choice meets the stated constraint."""

    def __init__(self, message, constraint=None):
        super().__init__(message)
        self.constraint = constraint


@dataclass(frozen=True)
class Decoder:
    """Reconstruction from (aux axis, side axis) of the joint tensor."""

    aux_axis: int
    side_axis: int
    dist: np.ndarray
    bound: float
    name: str = "D"

    def cost(self, joint):
        # P(x, s, a) in axis order (0, side, aux) since side < aux
        pxsa = marginal(joint, (0, self.side_axis, self.aux_axis))
        return np.einsum("xsa,xk->ask", pxsa, self.dist)

    def optimal(self, joint):
        cost = self.cost(joint)
        table = np.argmin(cost, axis=2)  # ties -> lowest reconstruction index
        return table, float(cost.min(axis=2).sum())

    def fixed(self, joint, table):
        cost = self.cost(joint)
        a, s = np.indices(table.shape)
        return float(cost[a, s, table].sum())


@dataclass(frozen=True)
class RateCap:
    func: Callable[[np.ndarray], float]
    bound: float
    name: str = "rate"


@dataclass
class Evaluation:
    objective: float
    feasible: bool
    decoders: list
    distortions: list
    caps: list
    aux_entropy: float
    blocks: list = field(repr=False, default_factory=list)

    def key(self):
        return (self.objective, self.aux_entropy)


class ChannelProblem:
    def __init__(
        self,
        shapes: Sequence[tuple[int, int]],
        build: Callable[[list], np.ndarray],
        objective: Callable[[np.ndarray], float],
        decoders: Sequence[Decoder] = (),
        caps: Sequence[RateCap] = (),
        aux_axes: Sequence[int] = (3,),
        row_mass: Callable[[list], list] | None = None,
    ):
        self.shapes = [tuple(s) for s in shapes]
        self.build = build
        self.objective = objective
        self.decoders = list(decoders)
        self.caps = list(caps)
        self.aux_axes = tuple(aux_axes)
        # row_mass(blocks)[i][r]: probability of reaching row r of block i;
        # rows that are never reached are skipped by the descent
        self.row_mass = row_mass

    def evaluate(self, blocks) -> Evaluation:
        joint = self.build(blocks)
        tables, dists = [], []
        feasible = True
        for dec in self.decoders:
            table, dist = dec.optimal(joint)
            tables.append(table)
            dists.append(dist)
            feasible &= dist <= dec.bound + FEAS_TOL
        capvals = [cap.func(joint) for cap in self.caps]
        for cap, val in zip(self.caps, capvals):
            feasible &= val <= cap.bound + FEAS_TOL
        return Evaluation(
            objective=float(self.objective(joint)),
            feasible=bool(feasible),
            decoders=tables,
            distortions=dists,
            caps=capvals,
            aux_entropy=joint_entropy(joint, self.aux_axes),
            blocks=[np.array(b) for b in blocks],
        )

    # -- flattening for the continuous polish
    def flatten(self, blocks):
        return np.concatenate([np.asarray(b).ravel() for b in blocks])

    def unflatten(self, z):
        out, pos = [], 0
        for r, c in self.shapes:
            out.append(np.asarray(z[pos : pos + r * c]).reshape(r, c))
            pos += r * c
        return out


@lru_cache(maxsize=None)
def _simplex_grid(k: int, res: int) -> np.ndarray:
    """All points of the k-simplex with coordinates in multiples of 1/res."""
    pts = []
    for bars in itertools.combinations(range(res + k - 1), k - 1):
        prev, parts = -1, []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(res + k - 1 - prev - 1)
        pts.append(parts)
    return np.array(pts, dtype=float) / res


def _row_candidates(row: np.ndarray, res: int) -> np.ndarray:
    k = row.size
    if k == 1:
        return row[None, :]
    if math.comb(res + k - 1, k - 1) <= _GRID_LIMIT:
        return _simplex_grid(k, res)
    cands = [np.eye(k)]
    steps = sorted({1.0 / res * 2**j for j in range(int(math.log2(res)) + 1)} | {1.0})
    moves = []
    for step in steps:
        for a in range(k):
            if row[a] <= 0:
                continue
            amt = min(step, row[a])
            for b in range(k):
                if a == b:
                    continue
                new = row.copy()
                new[a] -= amt
                new[b] += amt
                moves.append(new)
    if moves:
        cands.append(np.array(moves))
    return np.vstack(cands)


def _better(ev: Evaluation, best: Evaluation | None) -> bool:
    if not ev.feasible:
        return False
    if best is None:
        return True
    if ev.objective < best.objective - 1e-12:
        return True
    return abs(ev.objective - best.objective) <= 1e-12 and ev.aux_entropy < best.aux_entropy - 1e-9


def _descend(problem: ChannelProblem, start: Evaluation, cfg: OptimizerConfig) -> Evaluation:
    best = start
    for _ in range(cfg.descent_iterations):
        improved = False
        for bi, (nrow, _) in enumerate(problem.shapes):
            for r in range(nrow):
                if problem.row_mass is not None and problem.row_mass(best.blocks)[bi][r] <= 0:
                    continue
                row = best.blocks[bi][r]
                for cand in _row_candidates(row, cfg.grid_resolution):
                    if np.array_equal(cand, row):
                        continue
                    blocks = [b.copy() for b in best.blocks]
                    blocks[bi][r] = cand
                    ev = problem.evaluate(blocks)
                    if _better(ev, best):
                        best = ev
                        improved = True
        if not improved:
            break
    return best


def _normalize(blocks):
    out = []
    for b in blocks:
        b = np.where(b < 1e-12, 0.0, b)
        s = b.sum(axis=1, keepdims=True)
        s[s == 0] = 1.0
        out.append(b / s)
    return out


def _polish(problem: ChannelProblem, inc: Evaluation) -> Evaluation:
    tables = inc.decoders
    z0 = problem.flatten(inc.blocks)
    n = z0.size
    pos, eq_rows = 0, []
    for r, c in problem.shapes:
        for i in range(r):
            eq_rows.append((pos + i * c, pos + (i + 1) * c))
        pos += r * c

    def blocks_of(z):
        return problem.unflatten(np.clip(z, 0.0, 1.0))

    # objective and constraints are differenced at the same points
    cache = {}

    def values(z):
        key = z.tobytes()
        hit = cache.get(key)
        if hit is None:
            joint = problem.build(blocks_of(z))
            hit = (
                problem.objective(joint),
                np.array(
                    [dec.bound - 1e-10 - dec.fixed(joint, t) for dec, t in zip(problem.decoders, tables)]
                    + [cap.bound - 1e-10 - cap.func(joint) for cap in problem.caps]
                ),
            )
            if len(cache) > 512:
                cache.clear()
            cache[key] = hit
        return hit

    cons = [
        {
            "type": "eq",
            "fun": lambda z: np.array([z[a:b].sum() - 1.0 for a, b in eq_rows]),
        }
    ]
    if problem.decoders or problem.caps:
        cons.append({"type": "ineq", "fun": lambda z: values(z)[1]})
    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore")
        try:
            res = minimize(
                lambda z: values(z)[0],
                z0,
                method="SLSQP",
                bounds=[(0.0, 1.0)] * n,
                constraints=cons,
                options={"maxiter": 100, "ftol": 1e-12},
            )
        except (ValueError, np.linalg.LinAlgError):
            return inc
    if not np.all(np.isfinite(res.x)):
        return inc
    cand_blocks = _normalize(blocks_of(res.x))
    ev = problem.evaluate(cand_blocks)
    if not ev.feasible:
        # pull back toward the feasible incumbent
        lo, hi = 0.0, 1.0  # weight on incumbent
        found = None
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            mixed = [(1 - mid) * c + mid * b for c, b in zip(cand_blocks, inc.blocks)]
            ev_mid = problem.evaluate(mixed)
            if ev_mid.feasible:
                found, hi = ev_mid, mid
            else:
                lo = mid
        if found is None:
            return inc
        ev = found
    return ev if _better(ev, inc) else inc


def random_blocks(shapes, rng: np.random.Generator, alpha=0.7):
    return [rng.dirichlet(np.full(c, alpha), size=r) for r, c in shapes]


def solve(
    problem: ChannelProblem,
    seeds: Sequence[list],
    cfg: OptimizerConfig,
    tag: int = 0,
) -> Evaluation:
    """Best feasible evaluation found from ``seeds`` plus seeded random restarts.

    ``seeds[0]`` must be feasible; it anchors the random restarts, which are
    mixtures of it with random channels (largest feasible random weight).
    """
    seed_evals = [problem.evaluate(_normalize([np.asarray(b, float) for b in s])) for s in seeds]
    feasible_seeds = [ev for ev in seed_evals if ev.feasible]
    if not feasible_seeds:
        viol = []
        ev = seed_evals[0]
        for dec, val in zip(problem.decoders, ev.distortions):
            if val > dec.bound + FEAS_TOL:
                viol.append(dec.name)
        for cap, val in zip(problem.caps, ev.caps):
            if val > cap.bound + FEAS_TOL:
                viol.append(cap.name)
        raise Infeasible(f"no feasible starting channel for constraint(s) {viol}", viol)
    anchor = feasible_seeds[0]
    starts = list(feasible_seeds)
    for r in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, tag, r])
        rand = random_blocks(problem.shapes, rng)
        for t in (1.0, 0.5, 0.25, 0.125, 0.0625):
            mixed = [t * a + (1 - t) * b for a, b in zip(rand, anchor.blocks)]
            ev = problem.evaluate(mixed)
            if ev.feasible:
                starts.append(ev)
                break
    best = None
    for start in starts:
        ev = _descend(problem, start, cfg)
        if cfg.polish:
            for _ in range(3):
                new = _polish(problem, ev)
                if new is ev:
                    break
                ev = _descend(problem, new, _light(cfg))
        if _better(ev, best):
            best = ev
    return best


def _light(cfg: OptimizerConfig) -> OptimizerConfig:
    from dataclasses import replace

    return replace(cfg, descent_iterations=2)
