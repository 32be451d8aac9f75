"""Finite-probability primitives: pmfs, the three-variable source, distortions.

All information quantities are in bits. Masses below ``ZERO_MASS`` are treated
as exact zeros inside entropy sums.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ZERO_MASS = 1e-15
SUM_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


def _as_prob_array(probs, name="pmf"):
    arr = np.asarray(probs, dtype=float)
    if arr.size == 0:
        raise ValidationError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise ValidationError(f"{name} has negative entries")
    return arr


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over ``len(probs)`` symbols."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _as_prob_array(self.probs).ravel()
        if abs(arr.sum() - 1.0) > SUM_TOL:
            raise ValidationError(f"pmf sums to {arr.sum()!r}, not 1")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def __len__(self):
        return self.probs.size


def _check_joint(joint):
    arr = _as_prob_array(joint, "joint")
    if abs(arr.sum() - 1.0) > 1e-9:
        raise ValidationError(f"joint sums to {arr.sum()!r}, not 1")
    return arr


def _h(p):
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > ZERO_MASS]
    return float(-np.sum(p * np.log2(p)))


def entropy(p) -> float:
    """Shannon entropy in bits; ``0 log 0 = 0``."""
    arr = np.asarray(Pmf(p) if not isinstance(p, Pmf) else p)
    return max(_h(arr), 0.0)


def conditional_entropy(joint) -> float:
    """H(row | column) for a joint matrix with rows indexing the target."""
    arr = _check_joint(joint)
    return max(_h(arr) - _h(arr.sum(axis=0)), 0.0)


def mutual_information(joint) -> float:
    """I(row; column) of a joint matrix."""
    arr = _check_joint(joint)
    val = _h(arr.sum(axis=1)) + _h(arr.sum(axis=0)) - _h(arr)
    return max(val, 0.0)


def binary_entropy(u: float) -> float:
    if not 0.0 <= u <= 1.0:
        raise ValidationError(f"binary_entropy needs u in [0,1], got {u!r}")
    if u in (0.0, 1.0):
        return 0.0
    return float(-u * np.log2(u) - (1 - u) * np.log2(1 - u))


def binary_convolve(u: float, v: float) -> float:
    """u * v = u(1-v) + v(1-u), the crossover of two cascaded BSCs."""
    for name, val in (("u", u), ("v", v)):
        if not 0.0 <= val <= 1.0:
            raise ValidationError(f"{name} must lie in [0,1], got {val!r}")
    return u * (1 - v) + v * (1 - u)


# --- tensor helpers ---------------------------------------------------------


def marginal(joint: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Marginal of ``joint`` on ``axes`` (kept in ascending order)."""
    axes = tuple(sorted(set(axes)))
    drop = tuple(i for i in range(joint.ndim) if i not in axes)
    return joint.sum(axis=drop) if drop else joint


def joint_entropy(joint: np.ndarray, axes: Sequence[int]) -> float:
    if not axes:
        return 0.0
    return _h(marginal(joint, axes))


def cond_mutual_info(joint: np.ndarray, a, b, c=()) -> float:
    """I(A; B | C) where A, B, C are tuples of axes of ``joint``."""
    a, b, c = tuple(a), tuple(b), tuple(c)
    val = (
        joint_entropy(joint, a + c)
        + joint_entropy(joint, b + c)
        - joint_entropy(joint, a + b + c)
        - joint_entropy(joint, c)
    )
    return max(val, 0.0)


class Entropies:
    """Memoized marginal entropies of one tensor, for repeated information terms."""

    def __init__(self, joint: np.ndarray):
        self.joint = joint
        self._memo = {}

    def h(self, axes) -> float:
        key = tuple(sorted(set(axes)))
        if key not in self._memo:
            self._memo[key] = joint_entropy(self.joint, key)
        return self._memo[key]

    def cmi(self, a, b, c=()) -> float:
        a, b, c = tuple(a), tuple(b), tuple(c)
        return max(self.h(a + c) + self.h(b + c) - self.h(a + b + c) - self.h(c), 0.0)

    def ch(self, a, c=()) -> float:
        a, c = tuple(a), tuple(c)
        return max(self.h(a + c) - self.h(c), 0.0)


def cond_entropy(joint: np.ndarray, a, c=()) -> float:
    """H(A | C) over axes of ``joint``."""
    a, c = tuple(a), tuple(c)
    return max(joint_entropy(joint, a + c) - joint_entropy(joint, c), 0.0)


# --- source and distortion objects -------------------------------------------


def _row_stochastic(mat, name):
    arr = _as_prob_array(mat, name)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a matrix")
    if np.any(np.abs(arr.sum(axis=1) - 1.0) > SUM_TOL):
        raise ValidationError(f"{name} rows must sum to 1")
    return arr


@dataclass(frozen=True)
class JointSource:
    """P(x, y1, y2) = P(x, y1) P(y2 | y1), so X - Y1 - Y2 holds exactly."""

    px_y1: np.ndarray
    ch_y2_given_y1: np.ndarray
    joint: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pxy = _as_prob_array(self.px_y1, "px_y1")
        if pxy.ndim != 2:
            raise ValidationError("px_y1 must be a matrix")
        if abs(pxy.sum() - 1.0) > SUM_TOL:
            raise ValidationError(f"px_y1 sums to {pxy.sum()!r}, not 1")
        ch = _row_stochastic(self.ch_y2_given_y1, "py2_given_y1")
        if ch.shape[0] != pxy.shape[1]:
            raise ValidationError("py2_given_y1 must have one row per y1 symbol")
        joint = pxy[:, :, None] * ch[None, :, :]
        for arr in (pxy, ch, joint):
            arr.setflags(write=False)
        object.__setattr__(self, "px_y1", pxy)
        object.__setattr__(self, "ch_y2_given_y1", ch)
        object.__setattr__(self, "joint", joint)

    @property
    def nx(self) -> int:
        return self.px_y1.shape[0]

    @property
    def ny1(self) -> int:
        return self.px_y1.shape[1]

    @property
    def ny2(self) -> int:
        return self.ch_y2_given_y1.shape[1]

    @property
    def px(self) -> np.ndarray:
        return self.px_y1.sum(axis=1)

    def pair(self, side: str) -> np.ndarray:
        """Joint matrix P(x, y_side) for side in {"y1", "y2"}."""
        if side == "y1":
            return np.array(self.px_y1)
        if side == "y2":
            return self.joint.sum(axis=1)
        raise ValidationError(f"unknown side {side!r}")

    def support_condition(self) -> bool:
        """True iff some y1 has P(x, y1) > 0 for every x."""
        return bool(np.any(np.all(self.px_y1 > 0, axis=0)))

    @classmethod
    def from_channels(cls, px, ch_y1_given_x, ch_y2_given_y1) -> "JointSource":
        px = np.asarray(Pmf(px))
        ch1 = _row_stochastic(ch_y1_given_x, "py1_given_x")
        return cls(px[:, None] * ch1, ch_y2_given_y1)

    @classmethod
    def dsbs(cls, p: float, q: float | None = None) -> "JointSource":
        """Uniform binary X, Y1 = X through BSC(p).

        With ``q`` None the second decoder has no side information (Y2 is a
        constant); otherwise Y2 = Y1 through BSC(q).
        """
        if not 0.0 <= p <= 1.0:
            raise ValidationError("crossover must lie in [0,1]")
        pxy = 0.5 * np.array([[1 - p, p], [p, 1 - p]])
        if q is None:
            ch = np.ones((2, 1))
        else:
            ch = np.array([[1 - q, q], [q, 1 - q]])
        return cls(pxy, ch)

    def to_dict(self) -> dict:
        return {
            "px_y1": self.px_y1.tolist(),
            "py2_given_y1": self.ch_y2_given_y1.tolist(),
        }


@dataclass(frozen=True)
class DistortionMeasure:
    """Distortion matrix d[x, xhat] >= 0."""

    matrix: np.ndarray
    in_gamma_d: bool = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.matrix, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise ValidationError("distortion must be a non-empty matrix")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError("distortion entries must be finite and >= 0")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)
        gamma = False
        if arr.shape[0] == arr.shape[1]:
            off = ~np.eye(arr.shape[0], dtype=bool)
            gamma = bool(np.all(np.diag(arr) == 0) and np.all(arr[off] > 0))
        object.__setattr__(self, "in_gamma_d", gamma)

    @property
    def shape(self):
        return self.matrix.shape

    @classmethod
    def hamming(cls, n: int) -> "DistortionMeasure":
        return cls(1.0 - np.eye(n))

    @classmethod
    def of_function(cls, q: Sequence[int], nz: int | None = None) -> "DistortionMeasure":
        """Hamming distortion on Z = q(X): d(x, z) = [q(x) != z]."""
        q = np.asarray(q, dtype=int)
        nz = int(q.max()) + 1 if nz is None else nz
        return cls((q[:, None] != np.arange(nz)[None, :]).astype(float))

    @classmethod
    def squared_error(cls, levels, recon=None) -> "DistortionMeasure":
        levels = np.asarray(levels, dtype=float)
        recon = levels if recon is None else np.asarray(recon, dtype=float)
        return cls((levels[:, None] - recon[None, :]) ** 2)


def expected_distortion(joint_x_xhat, d: DistortionMeasure) -> float:
    """E d(X, Xhat) for a joint matrix P(x, xhat)."""
    arr = _check_joint(joint_x_xhat)
    if arr.shape != d.shape:
        raise ValidationError(f"joint shape {arr.shape} does not match distortion {d.shape}")
    return float(np.sum(arr * d.matrix))


def min_distortion(src: JointSource, d: DistortionMeasure) -> float:
    """Smallest achievable E d: every x reproduced by its cheapest letter."""
    _check_alphabet(src, d)
    return float(src.px @ d.matrix.min(axis=1))


def zero_rate_distortion(src: JointSource, d: DistortionMeasure, side: str) -> float:
    """Distortion of the best estimate from the side information alone."""
    _check_alphabet(src, d)
    pxy = src.pair(side)
    cost = pxy.T @ d.matrix  # [y, xhat]
    return float(cost.min(axis=1).sum())


def _check_alphabet(src: JointSource, d: DistortionMeasure):
    if d.shape[0] != src.nx:
        raise ValidationError(
            f"distortion has {d.shape[0]} source rows but X has {src.nx} symbols"
        )


def load_source_json(path_or_text) -> tuple[JointSource, DistortionMeasure | None, DistortionMeasure | None]:
    """Parse ``{"px_y1", "py2_given_y1", "d1", "d2"}`` (distortions optional)."""
    if isinstance(path_or_text, dict):
        data = path_or_text
    else:
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        data = json.loads(text)
    return source_from_dict(data)


def source_from_dict(data: dict):
    for key in ("px_y1", "py2_given_y1"):
        if key not in data:
            raise ValidationError(f"source JSON is missing field {key!r}")
    src = JointSource(np.array(data["px_y1"], dtype=float), np.array(data["py2_given_y1"], dtype=float))
    d1 = DistortionMeasure(np.array(data["d1"], dtype=float)) if "d1" in data else None
    d2 = DistortionMeasure(np.array(data["d2"], dtype=float)) if "d2" in data else None
    return src, d1, d2
