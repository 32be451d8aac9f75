"""Monte Carlo simulation of the nested-binning scalable code.

A ``V`` codebook is split into coarse bins (read by the strong-side decoder)
and finer bins nested inside them (read by the weak-side decoder, which gets
the extra index). Each V codeword carries its own W1 and W2 codebooks drawn
letter by letter from P(w1 | v) and P(w2 | v), binned independently.
Encoding and decoding use exhaustive strong-typicality search in codeword
index order, so the first typical codeword is the one chosen.

Every trial records the twelve error events E0..E11 against the true
source sequence, which lets the frequencies of the Markov-lemma events be
read off directly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .probcore import DistortionMeasure, Entropies, JointSource, ValidationError
from .regions import ScalableAux

MAX_CODEWORDS = 2**24
MEMORY_BUDGET = 512 * 2**20  # bytes of stored codeword symbols
DEFAULT_DELTA = 0.05
DEFAULT_SEED = 20060417
N_EVENTS = 12
_CHUNK_SYMBOLS = 1 << 22

__all__ = [
    "CodebookSpec",
    "CodebookSuite",
    "CodebookTooLarge",
    "RateCondition",
    "TrialRecord",
    "build_codebooks",
    "check_rate_conditions",
    "decode_stage1",
    "decode_stage2",
    "encode",
    "erasure_aux",
    "jointly_typical",
    "rates_with_margin",
    "run_trials",
    "strongly_typical",
]


class CodebookTooLarge(ValidationError):
    pass


# --- typicality ----------------------------------------------------------------


def _ref_array(ref):
    arr = np.asarray(ref, dtype=float)
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-9:
        raise ValidationError("reference must be a probability array")
    return arr


def strongly_typical(x_vec, ref, delta: float) -> bool:
    """Strong typicality of one sequence against a pmf.

    Every letter of positive mass must have empirical frequency within
    ``delta`` (strictly) of its probability; letters of zero mass must not
    occur at all.
    """
    return jointly_typical((x_vec,), ref, delta)


def jointly_typical(seqs, ref, delta: float) -> bool:
    """The same test applied to the tuple counts of ``seqs`` against ``ref``."""
    ref = _ref_array(ref)
    seqs = [np.asarray(s) for s in seqs]
    if len(seqs) != ref.ndim:
        raise ValidationError(f"{len(seqs)} sequences for a {ref.ndim}-dimensional reference")
    n = seqs[0].size
    if n == 0 or any(s.size != n for s in seqs):
        raise ValidationError("sequences must be non-empty and of equal length")
    for s, k in zip(seqs, ref.shape):
        if s.min() < 0 or s.max() >= k:
            raise ValidationError(f"sequence symbol outside alphabet of size {k}")
    idx = np.ravel_multi_index(tuple(seqs), ref.shape)
    counts = np.bincount(idx, minlength=ref.size).reshape(ref.shape)
    return _typical_counts(counts[None], ref, delta, n)[0]


def _typical_counts(counts, ref, delta, n):
    # counts: (m, *ref.shape)
    freq = counts / n
    pos = ref > 0
    ok_pos = np.all(np.where(pos, np.abs(freq - ref) < delta, True).reshape(len(counts), -1), axis=1)
    ok_zero = np.all(np.where(pos, True, counts == 0).reshape(len(counts), -1), axis=1)
    return ok_pos & ok_zero


def _typical_rows(cands, fixed_idx, n_fixed, ref2d, delta):
    """Typicality of each row of ``cands`` joined with a fixed tuple sequence.

    ``ref2d`` has shape (|cand alphabet|, n_fixed); ``fixed_idx`` holds the
    flattened index of the fixed sequences.
    """
    m, n = cands.shape
    if m == 0:
        return np.zeros(0, dtype=bool)
    k = ref2d.shape[0]
    cells = k * n_fixed
    out = np.empty(m, dtype=bool)
    step = max(1, _CHUNK_SYMBOLS // n)
    for a in range(0, m, step):
        block = cands[a : a + step].astype(np.int64)
        rows = block.shape[0]
        flat = (np.arange(rows)[:, None] * cells + block * n_fixed + fixed_idx[None, :]).ravel()
        counts = np.bincount(flat, minlength=rows * cells).reshape(rows, k, n_fixed)
        out[a : a + rows] = _typical_counts(counts, ref2d, delta, n)
    return out


def _first_typical(cands, fixed_idx, n_fixed, ref2d, delta):
    m, n = cands.shape
    step = max(1, min(4096, _CHUNK_SYMBOLS // n))
    for a in range(0, m, step):
        hits = np.flatnonzero(_typical_rows(cands[a : a + step], fixed_idx, n_fixed, ref2d, delta))
        if hits.size:
            return a + int(hits[0])
    return None


# --- codebooks -----------------------------------------------------------------


@dataclass(frozen=True)
class CodebookSpec:
    """Blocklength, typicality slack and the seven rates in bits per symbol.

    ``r_a`` indexes coarse V bins, ``r_a_fine`` the finer bins inside each
    coarse bin, ``r_b`` and ``r_c`` the W1 and W2 bins.
    """

    n: int
    r_v: float = 0.0
    r_w1: float = 0.0
    r_w2: float = 0.0
    r_a: float = 0.0
    r_a_fine: float = 0.0
    r_b: float = 0.0
    r_c: float = 0.0
    delta: float = DEFAULT_DELTA
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"blocklength must be a positive integer, got {self.n!r}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValidationError("delta must be > 0")
        for name in ("r_v", "r_w1", "r_w2", "r_a", "r_a_fine", "r_b", "r_c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {v!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")

    def bits(self, name: str) -> int:
        # 1e-9 guards against n * R landing a hair above an integer
        return int(math.ceil(self.n * getattr(self, name) - 1e-9))

    def sizes(self) -> dict:
        return {name: 2 ** self.bits(name) for name in ("r_v", "r_w1", "r_w2", "r_a", "r_a_fine", "r_b", "r_c")}

    @property
    def r1(self) -> float:
        return self.r_a + self.r_b

    @property
    def r_sum(self) -> float:
        return self.r_a + self.r_a_fine + self.r_b + self.r_c


@dataclass
class _AuxLaw:
    """Marginals of P(x, y1, y2, v, w1, w2) used by the coder."""

    joint: np.ndarray
    nx: int

    @classmethod
    def of(cls, aux: ScalableAux, src: JointSource):
        if aux.channel.shape[0] != src.nx:
            raise ValidationError("auxiliary channel does not match the source alphabet")
        return cls(aux.joint(src), src.nx)

    def marg(self, axes):
        keep = tuple(axes)
        drop = tuple(a for a in range(6) if a not in keep)
        m = self.joint.sum(axis=drop)
        return np.transpose(m, [sorted(keep).index(a) for a in keep])

    def pv(self):
        return self.marg((3,))

    def cond(self, a, given):
        """P(a | given) as an array (given, a); unreachable rows are uniform."""
        pj = self.marg((given, a))
        s = pj.sum(axis=1, keepdims=True)
        return np.where(s > 0, pj / np.where(s > 0, s, 1.0), 1.0 / pj.shape[1])


X, Y1, Y2, V, W1, W2 = range(6)


@dataclass
class CodebookSuite:
    spec: CodebookSpec
    aux: ScalableAux
    v: np.ndarray  # (M_V, n)
    v_fine: np.ndarray  # finer-bin index of each V codeword
    w1: np.ndarray  # (M_V, M_W1, n)
    w1_bin: np.ndarray  # (M_V, M_W1)
    w2: np.ndarray
    w2_bin: np.ndarray
    law: _AuxLaw = field(repr=False)

    @property
    def fine_bits(self) -> int:
        return self.spec.bits("r_a_fine")

    def coarse_of(self, idx):
        return self.v_fine[idx] >> self.fine_bits

    def fine_within(self, idx):
        return self.v_fine[idx] & ((1 << self.fine_bits) - 1)


def _memory_report(spec, cv, c1, c2):
    s = spec.sizes()
    n_words = s["r_v"] * (1 + s["r_w1"] + s["r_w2"])
    return n_words, n_words * spec.n


def _sample_rows(rng, probs, shape):
    """Draw one letter per entry of ``shape`` from the pmf rows selected below."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(shape + (1,))
    return (u > cdf[..., :-1]).sum(axis=-1).astype(np.uint8)


def build_codebooks(spec: CodebookSpec, aux: ScalableAux, src: JointSource) -> CodebookSuite:
    """Random codebooks and bins, reproducible from ``spec.seed``."""
    cv, c1, c2 = aux.cards
    if max(cv, c1, c2, src.nx, src.ny1, src.ny2) > 255:
        raise ValidationError("alphabets above 255 letters are not supported")
    n_words, n_symbols = _memory_report(spec, cv, c1, c2)
    if n_words > MAX_CODEWORDS or n_symbols > MEMORY_BUDGET:
        raise CodebookTooLarge(
            f"codebooks need {n_words} codewords and {n_symbols} bytes; "
            f"limits are {MAX_CODEWORDS} codewords and {MEMORY_BUDGET} bytes "
            f"(sizes {spec.sizes()}, n={spec.n})"
        )
    law = _AuxLaw.of(aux, src)
    s = spec.sizes()
    n = spec.n
    rng = np.random.default_rng([spec.seed, 0xC0DE])
    v = _sample_rows(rng, law.pv()[None, None, :], (s["r_v"], n))
    fine_total = spec.bits("r_a") + spec.bits("r_a_fine")
    v_fine = rng.integers(0, 2**fine_total, size=s["r_v"], dtype=np.int64)
    p1 = law.cond(W1, V)  # (v, w1)
    p2 = law.cond(W2, V)
    w1 = _sample_rows(rng, p1[v.astype(np.int64)][:, None, :, :], (s["r_v"], s["r_w1"], n))
    w1_bin = rng.integers(0, s["r_b"], size=(s["r_v"], s["r_w1"]), dtype=np.int64)
    w2 = _sample_rows(rng, p2[v.astype(np.int64)][:, None, :, :], (s["r_v"], s["r_w2"], n))
    w2_bin = rng.integers(0, s["r_c"], size=(s["r_v"], s["r_w2"]), dtype=np.int64)
    return CodebookSuite(spec, aux, v, v_fine, w1, w1_bin, w2, w2_bin, law)


# --- encoder and decoders -------------------------------------------------------


@dataclass(frozen=True)
class Encoding:
    i: int
    j: int
    k: int
    l: int
    v_index: int
    w1_index: int
    w2_index: int
    errors: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.errors


def _ref2d(law, cand_axis, fixed_axes):
    ref = law.marg((cand_axis,) + tuple(fixed_axes))
    return ref.reshape(ref.shape[0], -1)


def _fixed_index(law, fixed_axes, seqs):
    shape = tuple(law.joint.shape[a] for a in fixed_axes)
    return np.ravel_multi_index(tuple(np.asarray(s, dtype=np.int64) for s in seqs), shape), int(np.prod(shape))


def _check_seq(seq, size, n, name):
    seq = np.asarray(seq)
    if seq.shape != (n,):
        raise ValidationError(f"{name} must have length {n}")
    if seq.min() < 0 or seq.max() >= size:
        raise ValidationError(f"{name} has symbols outside its alphabet of size {size}")
    return seq.astype(np.int64)


def _search(suite, cands, axis, fixed_axes, seqs, slack):
    idx, nf = _fixed_index(suite.law, fixed_axes, seqs)
    return _first_typical(cands, idx, nf, _ref2d(suite.law, axis, fixed_axes), slack)


def encode(suite: CodebookSuite, x_vec) -> Encoding:
    """Least-index typical codewords and their bin indices.

    Failures fall back to codeword 0 and are listed in ``errors``: E0 for an
    atypical source sequence, E1 when no V codeword fits, E2/E3 when no W1/W2
    codeword fits.
    """
    law, d = suite.law, suite.spec.delta
    x = _check_seq(x_vec, law.nx, suite.spec.n, "x_vec")
    errors = []
    v_idx = w1_idx = w2_idx = 0
    if not strongly_typical(x, law.marg((X,)), d):
        errors.append("E0")
    else:
        found = _search(suite, suite.v, V, (X,), (x,), 2 * d)
        if found is None:
            errors.append("E1")
        else:
            v_idx = found
            v = suite.v[v_idx]
            f1 = _search(suite, suite.w1[v_idx], W1, (V, X), (v, x), 3 * d)
            f2 = _search(suite, suite.w2[v_idx], W2, (V, X), (v, x), 3 * d)
            if f1 is None:
                errors.append("E2")
            else:
                w1_idx = f1
            if f2 is None:
                errors.append("E3")
            else:
                w2_idx = f2
    return Encoding(
        i=int(suite.coarse_of(v_idx)),
        j=int(suite.fine_within(v_idx)),
        k=int(suite.w1_bin[v_idx, w1_idx]),
        l=int(suite.w2_bin[v_idx, w2_idx]),
        v_index=int(v_idx),
        w1_index=int(w1_idx),
        w2_index=int(w2_idx),
        errors=tuple(errors),
    )


@dataclass(frozen=True)
class Decoding:
    xhat: np.ndarray | None
    v_index: int | None = None
    w_index: int | None = None
    error: str | None = None  # "v_none", "v_ambiguous", "w_none", "w_ambiguous"

    @property
    def ok(self) -> bool:
        return self.error is None


def _unique(members, hits, what):
    found = members[hits]
    if found.size == 0:
        return None, f"{what}_none"
    if found.size > 1:
        return None, f"{what}_ambiguous"
    return int(found[0]), None


def _all_typical(suite, cands, axis, fixed_axes, seqs, slack):
    idx, nf = _fixed_index(suite.law, fixed_axes, seqs)
    return _typical_rows(cands, idx, nf, _ref2d(suite.law, axis, fixed_axes), slack)


def _decode(suite, v_members, w_book, w_bins, w_bin, side_axis, w_axis, y, f):
    law = suite.law
    slack_v = 3 * law.nx * suite.spec.delta
    slack_w = 4 * law.nx * suite.spec.delta
    hits = _all_typical(suite, suite.v[v_members], V, (side_axis,), (y,), slack_v)
    v_idx, err = _unique(v_members, hits, "v")
    if err:
        return Decoding(None, error=err)
    members = np.flatnonzero(w_bins[v_idx] == w_bin)
    v = suite.v[v_idx]
    hits = _all_typical(suite, w_book[v_idx][members], w_axis, (V, side_axis), (v, y), slack_w)
    w_idx, err = _unique(members, hits, "w")
    if err:
        return Decoding(None, v_index=v_idx, error=err)
    xhat = f[w_book[v_idx, w_idx].astype(np.int64), y]
    return Decoding(xhat, v_idx, w_idx)


def decode_stage1(suite: CodebookSuite, i: int, k: int, y1_vec) -> Decoding:
    """Unique V in coarse bin ``i`` typical with y1, then unique W1 in bin ``k``."""
    y1 = _check_seq(y1_vec, suite.law.joint.shape[Y1], suite.spec.n, "y1_vec")
    _check_index(i, 2 ** suite.spec.bits("r_a"), "i")
    _check_index(k, 2 ** suite.spec.bits("r_b"), "k")
    members = np.flatnonzero(suite.coarse_of(np.arange(len(suite.v))) == i)
    return _decode(suite, members, suite.w1, suite.w1_bin, k, Y1, W1, y1, suite.aux.f1)


def decode_stage2(suite: CodebookSuite, i: int, j: int, l: int, y2_vec) -> Decoding:
    """Unique V in finer bin (i, j) typical with y2, then unique W2 in bin ``l``."""
    y2 = _check_seq(y2_vec, suite.law.joint.shape[Y2], suite.spec.n, "y2_vec")
    _check_index(i, 2 ** suite.spec.bits("r_a"), "i")
    _check_index(j, 2 ** suite.spec.bits("r_a_fine"), "j")
    _check_index(l, 2 ** suite.spec.bits("r_c"), "l")
    fine = (i << suite.fine_bits) | j
    members = np.flatnonzero(suite.v_fine == fine)
    return _decode(suite, members, suite.w2, suite.w2_bin, l, Y2, W2, y2, suite.aux.f2)


def _check_index(val, size, name):
    if not 0 <= int(val) < size:
        raise ValidationError(f"index {name}={val} outside 0..{size - 1}")


# --- rate conditions -----------------------------------------------------------


@dataclass(frozen=True)
class RateCondition:
    name: str
    rate: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.bound <= 0 or self.rate > self.bound


def _info(aux, src):
    e = Entropies(aux.joint(src))
    return {
        "I(X;V)": e.cmi((X,), (V,)),
        "I(X;W1|V)": e.cmi((X,), (W1,), (V,)),
        "I(X;W2|V)": e.cmi((X,), (W2,), (V,)),
        "I(Y1;V)": e.cmi((Y1,), (V,)),
        "I(Y2;V)": e.cmi((Y2,), (V,)),
        "I(Y1;W1|V)": e.cmi((Y1,), (W1,), (V,)),
        "I(Y2;W2|V)": e.cmi((Y2,), (W2,), (V,)),
    }


def check_rate_conditions(spec: CodebookSpec, aux: ScalableAux, src: JointSource) -> list[RateCondition]:
    """The seven sufficient conditions, each as rate > bound."""
    i = _info(aux, src)
    return [
        RateCondition("R_V > I(X;V)", spec.r_v, i["I(X;V)"]),
        RateCondition("R_W1 > I(X;W1|V)", spec.r_w1, i["I(X;W1|V)"]),
        RateCondition("R_W2 > I(X;W2|V)", spec.r_w2, i["I(X;W2|V)"]),
        RateCondition("R_A > R_V - I(Y1;V)", spec.r_a, spec.r_v - i["I(Y1;V)"]),
        RateCondition("R_A + R_A' > R_V - I(Y2;V)", spec.r_a + spec.r_a_fine, spec.r_v - i["I(Y2;V)"]),
        RateCondition("R_B > R_W1 - I(Y1;W1|V)", spec.r_b, spec.r_w1 - i["I(Y1;W1|V)"]),
        RateCondition("R_C > R_W2 - I(Y2;W2|V)", spec.r_c, spec.r_w2 - i["I(Y2;W2|V)"]),
    ]


def rates_with_margin(aux: ScalableAux, src: JointSource, n: int, margin: float = 0.1, **kw) -> CodebookSpec:
    """Rates ``(1 + margin)`` times each sufficient bound (zero when the bound is not positive)."""
    if margin < 0:
        raise ValidationError("margin must be >= 0")
    i = _info(aux, src)
    up = 1.0 + margin

    def scaled(b):
        return up * b if b > 1e-12 else 0.0

    r_v = scaled(i["I(X;V)"])
    r_w1 = scaled(i["I(X;W1|V)"])
    r_w2 = scaled(i["I(X;W2|V)"])
    r_a = scaled(r_v - i["I(Y1;V)"])
    r_a_fine = max(scaled(r_v - i["I(Y2;V)"]) - r_a, 0.0)
    r_b = scaled(r_w1 - i["I(Y1;W1|V)"])
    r_c = scaled(r_w2 - i["I(Y2;W2|V)"])
    return CodebookSpec(n, r_v, r_w1, r_w2, r_a, r_a_fine, r_b, r_c, **kw)


# --- trials --------------------------------------------------------------------


@dataclass
class TrialRecord:
    events: tuple  # E0..E11 flags
    distortion1: float | None
    distortion2: float | None
    indices: tuple  # (i, j, k, l)

    @property
    def error(self) -> bool:
        return any(self.events)


def _events(suite, enc, x, y1, y2):
    law, d = suite.law, suite.spec.delta
    e = [False] * N_EVENTS
    e[0] = not (
        strongly_typical(x, law.marg((X,)), d)
        and strongly_typical(y1, law.marg((Y1,)), d)
        and strongly_typical(y2, law.marg((Y2,)), d)
    )
    if e[0]:
        return e
    e[1] = "E1" in enc.errors
    if e[1]:
        return e
    e[2] = "E2" in enc.errors
    e[3] = "E3" in enc.errors
    vi = enc.v_index
    v = suite.v[vi]
    e[4] = not jointly_typical((v, x, y1), law.marg((V, X, Y1)), 2 * d)
    e[5] = not jointly_typical((v, x, y2), law.marg((V, X, Y2)), 2 * d)
    slack_v = 3 * law.nx * d
    slack_w = 4 * law.nx * d
    everyone = np.arange(len(suite.v))
    coarse = np.flatnonzero((suite.coarse_of(everyone) == enc.i) & (everyone != vi))
    fine = coarse[suite.fine_within(coarse) == enc.j]
    e[6] = bool(_all_typical(suite, suite.v[coarse], V, (Y1,), (y1,), slack_v).any())
    e[7] = bool(_all_typical(suite, suite.v[fine], V, (Y2,), (y2,), slack_v).any())
    if not (e[2] or e[4] or e[6]):
        w = suite.w1[vi, enc.w1_index]
        e[8] = not jointly_typical((w, v, x, y1), law.marg((W1, V, X, Y1)), 3 * d)
        others = np.flatnonzero(suite.w1_bin[vi] == enc.k)
        others = others[others != enc.w1_index]
        e[10] = bool(_all_typical(suite, suite.w1[vi][others], W1, (V, Y1), (v, y1), slack_w).any())
    if not (e[3] or e[5] or e[7]):
        w = suite.w2[vi, enc.w2_index]
        e[9] = not jointly_typical((w, v, x, y2), law.marg((W2, V, X, Y2)), 3 * d)
        others = np.flatnonzero(suite.w2_bin[vi] == enc.l)
        others = others[others != enc.w2_index]
        e[11] = bool(_all_typical(suite, suite.w2[vi][others], W2, (V, Y2), (v, y2), slack_w).any())
    return e


def sample_source(src: JointSource, n: int, rng: np.random.Generator):
    joint = src.joint
    flat = rng.choice(joint.size, size=n, p=joint.ravel())
    x, y1, y2 = np.unravel_index(flat, joint.shape)
    return x.astype(np.int64), y1.astype(np.int64), y2.astype(np.int64)


def run_trial(suite, src, d1, d2, rng) -> TrialRecord:
    x, y1, y2 = sample_source(src, suite.spec.n, rng)
    enc = encode(suite, x)
    dec1 = decode_stage1(suite, enc.i, enc.k, y1)
    dec2 = decode_stage2(suite, enc.i, enc.j, enc.l, y2)
    dist1 = float(d1.matrix[x, dec1.xhat].mean()) if dec1.ok else None
    dist2 = float(d2.matrix[x, dec2.xhat].mean()) if dec2.ok else None
    ev = _events(suite, enc, x, y1, y2)
    return TrialRecord(tuple(bool(b) for b in ev), dist1, dist2, (enc.i, enc.j, enc.k, enc.l))


def _mean_ci(vals):
    if not vals:
        return None, None
    a = np.asarray(vals)
    half = 1.96 * a.std(ddof=1) / math.sqrt(a.size) if a.size > 1 else float("inf")
    return float(a.mean()), [float(a.mean() - half), float(a.mean() + half)]


def run_trials(
    spec: CodebookSpec,
    aux: ScalableAux,
    src: JointSource,
    trials: int,
    d1: DistortionMeasure,
    d2: DistortionMeasure,
    source_seed: int = 0,
    suite: CodebookSuite | None = None,
) -> dict:
    """Simulate ``trials`` independent blocks; returns a JSON-ready summary.

    Trial ``t`` draws its source block from the generator seeded with
    ``(spec.seed, source_seed, t)``, so any trial can be replayed alone.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    conds = check_rate_conditions(spec, aux, src)
    suite = suite or build_codebooks(spec, aux, src)
    records = [
        run_trial(suite, src, d1, d2, np.random.default_rng([spec.seed, source_seed, t])) for t in range(trials)
    ]
    ev = np.array([r.events for r in records], dtype=bool)
    ok1 = [r.distortion1 for r in records if r.distortion1 is not None and not r.error]
    ok2 = [r.distortion2 for r in records if r.distortion2 is not None and not r.error]
    m1, ci1 = _mean_ci(ok1)
    m2, ci2 = _mean_ci(ok2)
    label = "guaranteed-achievable" if all(c.ok for c in conds) else "margin-violated"
    e1, e2 = aux.distortions(src, d1, d2)
    return {
        "label": label,
        "trials": trials,
        "source_seed": source_seed,
        "spec": asdict(spec),
        "codebook_sizes": spec.sizes(),
        "rates": {"r1": spec.r1, "r_sum": spec.r_sum},
        "rate_conditions": [
            {"name": c.name, "rate": c.rate, "bound": c.bound, "ok": c.ok} for c in conds
        ],
        "event_frequencies": {f"E{i}": float(ev[:, i].mean()) for i in range(N_EVENTS)},
        "error_frequency": float(ev.any(axis=1).mean()),
        "stage1_decoded": float(np.mean([r.distortion1 is not None for r in records])),
        "stage2_decoded": float(np.mean([r.distortion2 is not None for r in records])),
        "distortion1": {"mean": m1, "ci95": ci1, "single_letter": e1, "count": len(ok1)},
        "distortion2": {"mean": m2, "ci95": ci2, "single_letter": e2, "count": len(ok2)},
        "aux": aux.to_dict(),
    }


def erasure_aux(a1: float, keep1: float, a2: float, keep2: float) -> ScalableAux:
    """Binary-source auxiliary with a trivial V and independent W1, W2.

    W_j equals X through a BSC(a_j) with probability ``keep_j`` and an
    erasure letter otherwise. Decoders output W_j when it is not erased and
    fall back to Y_j (or to 0 when Y_j is constant) on an erasure.
    """
    for v in (a1, keep1, a2, keep2):
        if not 0.0 <= v <= 1.0:
            raise ValidationError("crossovers and keep probabilities must lie in [0, 1]")

    def ch(a, keep):
        return np.array([[keep * (1 - a), keep * a, 1 - keep], [keep * a, keep * (1 - a), 1 - keep]])

    joint = np.einsum("xa,xb->xab", ch(a1, keep1), ch(a2, keep2))[:, None]
    f = np.array([[0, 0], [1, 1], [0, 1]])
    return ScalableAux(joint, f, f)
