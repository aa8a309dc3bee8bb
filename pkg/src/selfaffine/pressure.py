"""
Singular value function, finite-level pressure and dimension brackets.

For a tuple ``(A_1, ..., A_N)`` the level sums
``a_n(s) = log sum_{|w| = n} phi^s(A_w)`` are subadditive in ``n``, so every
``a_m(s)/m`` bounds the limit pressure from above and so does their minimum
(the *envelope*). The zero of the envelope in ``s`` is therefore a certified
upper bound on the affinity dimension. With a premultiplying matrix ``Q`` the
same machinery gives the empirical exponent of ``sum phi^s(Q A_w)``; that
sequence is not subadditive, so its envelope zero is reported as empirical.

All level sums are accumulated in the log domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np

from .errors import BudgetError, DomainError, PreconditionError, ShapeError
from .linalg import as_matrix, batch_singular_values, numerical_rank, singular_values
from .maps import MatrixTuple, as_tuple
from .wordspace import (
    DEFAULT_BUDGET,
    check_budget,
    iter_shard_blocks,
    map_shards,
    word_digits,
    word_product,
)

DEFAULT_TOL = 1e-4
MAX_BISECTION_STEPS = 60
DEFAULT_KAPPA_BUDGET = 10**6


# ---------------------------------------------------------------- log-sum-exp


class LogSumExp:
    """Streaming ``log(sum(exp(x)))`` with a running maximum.

    ``-inf`` terms (zero summands) are ignored; an empty or all-zero sum has
    value ``-inf``.
    """

    __slots__ = ("peak", "scaled")

    def __init__(self):
        self.peak = -math.inf
        self.scaled = 0.0

    def add(self, values) -> "LogSumExp":
        x = np.asarray(values, dtype=float).ravel()
        if x.size == 0:
            return self
        top = float(x.max())
        if top == -math.inf:
            return self
        if top > self.peak:
            self.scaled = self.scaled * math.exp(self.peak - top) if self.peak > -math.inf else 0.0
            self.peak = top
        self.scaled += float(np.exp(x - self.peak).sum())
        return self

    def merge(self, other: "LogSumExp") -> "LogSumExp":
        out = LogSumExp()
        out.peak = max(self.peak, other.peak)
        if out.peak == -math.inf:
            return out
        out.scaled = sum(
            part.scaled * math.exp(part.peak - out.peak) for part in (self, other) if part.peak > -math.inf
        )
        return out

    @property
    def value(self) -> float:
        if self.peak == -math.inf or self.scaled == 0.0:
            return -math.inf
        return self.peak + math.log(self.scaled)


# ------------------------------------------------------- singular value function


def _check_s(s: float) -> float:
    s = float(s)
    if not s >= 0 or not math.isfinite(s):
        raise DomainError(f"exponent s must be a finite non-negative number, got {s}")
    return s


def log_svf(log_sv: np.ndarray, s: float) -> np.ndarray:
    """``log phi^s`` from log singular values (last axis, non-increasing).

    Zero singular values (``-inf``) make ``phi^s`` vanish exactly when they
    enter the product.
    """
    log_sv = np.asarray(log_sv, dtype=float)
    d = log_sv.shape[-1]
    s = _check_s(s)
    if s > d:
        return log_sv.sum(axis=-1) * (s / d)
    whole = int(math.floor(s))
    frac = s - whole
    out = log_sv[..., :whole].sum(axis=-1)
    if frac > 0:
        out = out + frac * log_sv[..., whole]
    return out


def svf(m, s: float) -> float:
    """The singular value function ``phi^s(M)``.

    ``sigma_1 ... sigma_floor(s) * sigma_ceil(s)^(s - floor(s))`` for
    ``0 <= s <= d`` and ``|det M|^(s/d)`` beyond.
    """
    s = _check_s(s)
    sv = singular_values(m)
    with np.errstate(divide="ignore"):
        return float(np.exp(log_svf(np.log(sv), s)))


# ------------------------------------------------------------ result records


@dataclass(frozen=True)
class PressureEstimate:
    s: float
    level: int
    value: float  # a_n(s) / n
    envelope: float  # min_{m <= n} a_m(s) / m
    level_values: tuple = field(repr=False)  # a_m(s) / m for m = 1..n


@dataclass(frozen=True)
class DimensionBracket:
    """Bisection bracket ``lower < zero <= upper`` of an envelope in ``s``.

    ``certified`` is true when the envelope at ``upper`` is non-positive and
    the envelope dominates the limit quantity (unprojected pressure).
    """

    lower: float
    upper: float
    level: int
    tol: float
    iterations: int
    envelope_lower: float
    envelope_upper: float
    certified: bool
    label: str

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "tol": self.tol,
            "iterations": self.iterations,
            "envelope_at_lower": self.envelope_lower,
            "envelope_at_upper": self.envelope_upper,
            "certified_upper_bound": self.certified,
            "label": self.label,
        }


@dataclass(frozen=True)
class ProjectedBracket:
    empirical: DimensionBracket  # zero of the envelope
    last_level: DimensionBracket  # zero of a_n(s)/n
    affinity: DimensionBracket
    rank: int
    crude_bound: float  # min(affinity upper, rank Q): certified

    def as_dict(self) -> dict:
        return {
            "empirical_exponent": self.empirical.as_dict(),
            "last_level_exponent": self.last_level.as_dict(),
            "affinity_dimension": self.affinity.as_dict(),
            "rank_Q": self.rank,
            "crude_certified_bound": self.crude_bound,
        }


# ------------------------------------------------------------- level spectra


class LevelSpectra:
    """Log singular values of ``A_w`` (or ``Q A_w``) for every word with ``1 <= |w| <= n``.

    Computed once; pressure at any ``s`` is then a pass over stored arrays.
    The smallest singular value of an invertible product is recovered from
    ``log|det A_w| = sum log|det A_i|`` rather than from the iteration, which
    keeps it accurate for strongly non-conformal products.
    """

    def __init__(self, maps, n: int, Q=None, shards: int = 1, budget: int = DEFAULT_BUDGET, workers: int = 1):
        t = as_tuple(maps)
        if n < 1:
            raise DomainError(f"level must be >= 1, got {n}")
        if shards < 1:
            raise DomainError("shards must be >= 1")
        check_budget(t.count, n, budget)
        self.tuple = t
        self.level = n
        self.shards = shards
        d = t.dim
        self.dim = d
        if Q is None:
            self.Q = None
            self.rank = d
            log_det_q = 0.0
        else:
            q = as_matrix(Q, name="Q")
            if q.shape != (d, d):
                raise ShapeError(f"Q must be {d} x {d}, got {q.shape}")
            self.rank = numerical_rank(q)
            if self.rank == 0:
                raise DomainError("Q must be non-zero")
            self.Q = q
            log_det_q = float(np.log(np.abs(np.linalg.det(q)))) if self.rank == d else -math.inf
        log_dets = t.log_abs_dets()

        def work(shard):
            per_level = [[] for _ in range(n)]
            for blk in iter_shard_blocks(t, n, shard, shards):
                prods = blk.products if self.Q is None else np.matmul(self.Q, blk.products)
                with np.errstate(divide="ignore"):
                    lsv = np.log(batch_singular_values(prods))
                if self.rank < d:
                    lsv[:, self.rank :] = -math.inf
                elif d > 1:
                    digits = word_digits(blk.start, len(prods), blk.level, t.count)
                    ldet = log_dets[digits].sum(axis=1) + log_det_q
                    lsv[:, -1] = ldet - lsv[:, :-1].sum(axis=1)
                per_level[blk.level - 1].append(lsv)
            return [np.concatenate(parts) if parts else np.empty((0, d)) for parts in per_level]

        # spectra[shard][level-1] -> (words, d)
        self.spectra = map_shards(work, shards, workers)

    def log_sums(self, s: float) -> np.ndarray:
        """``a_m(s)`` for ``m = 1..n``; shard partial sums merged in ascending shard order."""
        s = _check_s(s)
        out = np.empty(self.level)
        for m in range(self.level):
            total = LogSumExp()
            for shard in self.spectra:
                part = LogSumExp()
                if shard[m].shape[0]:
                    part.add(log_svf(shard[m], s))
                total = total.merge(part)
            out[m] = total.value
        return out

    def normalised(self, s: float) -> np.ndarray:
        """``a_m(s) / m`` for ``m = 1..n``."""
        return self.log_sums(s) / np.arange(1, self.level + 1)

    def envelope(self, s: float) -> float:
        return float(self.normalised(s).min())

    def pressure(self, s: float) -> PressureEstimate:
        vals = self.normalised(s)
        return PressureEstimate(float(s), self.level, float(vals[-1]), float(vals.min()), tuple(float(v) for v in vals))


def level_pressure(maps, s: float, n: int, Q=None, shards: int = 1, budget: int = DEFAULT_BUDGET) -> PressureEstimate:
    """``a_n(s)/n`` and its envelope, optionally with every product premultiplied by ``Q``.

    A value of ``-inf`` means every summand vanished (``s`` above the rank of ``Q``).
    """
    s = _check_s(s)
    return LevelSpectra(maps, n, Q=Q, shards=shards, budget=budget).pressure(s)


# ------------------------------------------------------------------ bisection


def bisect_envelope(
    spectra: LevelSpectra, tol: float, label: str, certified: bool, last_level: bool = False
) -> DimensionBracket:
    """Bisect the envelope on ``[0, d]`` for the point where it stops being positive.

    With ``last_level`` the function bisected is ``a_n(s)/n`` instead of the
    envelope (used where the sequence is not subadditive).
    """
    f = (lambda s: float(spectra.normalised(s)[-1])) if last_level else spectra.envelope
    lo, hi = 0.0, float(spectra.dim)
    e_lo, e_hi = f(lo), f(hi)
    if e_hi > 0:
        raise PreconditionError(
            f"envelope is positive ({e_hi:.6g}) at s = d = {spectra.dim}; the tuple is not contracting enough"
        )
    steps = 0
    while hi - lo > tol and steps < MAX_BISECTION_STEPS:
        mid = 0.5 * (lo + hi)
        e_mid = f(mid)
        if e_mid > 0:
            lo, e_lo = mid, e_mid
        else:
            hi, e_hi = mid, e_mid
        steps += 1
    return DimensionBracket(lo, hi, spectra.level, tol, steps, e_lo, e_hi, certified and e_hi <= 0, label)


def _check_tol(tol: float):
    if not tol >= 1e-6:
        raise DomainError(f"tolerance must be >= 1e-6, got {tol}")


def affinity_dimension(
    maps,
    n: int,
    tol: float = DEFAULT_TOL,
    shards: int = 1,
    budget: int = DEFAULT_BUDGET,
    spectra: Optional[LevelSpectra] = None,
) -> DimensionBracket:
    """Bracket the zero of the level-``n`` pressure envelope.

    The upper end is a certified upper bound on the affinity dimension.
    """
    t = as_tuple(maps)
    _check_tol(tol)
    t.require_contracting()
    if spectra is None:
        spectra = LevelSpectra(t, n, shards=shards, budget=budget)
    return bisect_envelope(spectra, tol, "affinity dimension (certified upper bound)", certified=True)


def projected_exponent(
    maps,
    Q,
    n: int,
    tol: float = DEFAULT_TOL,
    shards: int = 1,
    budget: int = DEFAULT_BUDGET,
) -> ProjectedBracket:
    """Empirical critical exponent of ``sum phi^s(Q A_w)`` plus the certified crude bound.

    Two finite-level estimates are returned: the envelope zero and the zero of
    ``a_n(s)/n``. Projection can cost a bounded factor on short words, making
    ``a_m/m`` increase in ``m``; the envelope then sits at ``m = 1`` and the
    last-level zero is the more faithful of the two.

    The crude bound is ``min(affinity upper bound, rank Q)``, valid because
    ``phi^s(Q A_w) <= phi^s(Q) phi^s(A_w)``.
    """
    t = as_tuple(maps)
    _check_tol(tol)
    t.require_contracting()
    q_spectra = LevelSpectra(t, n, Q=Q, shards=shards, budget=budget)
    empirical = bisect_envelope(q_spectra, tol, "empirical exponent (not certified)", certified=False)
    last = bisect_envelope(q_spectra, tol, "last-level exponent (not certified)", certified=False, last_level=True)
    aff = affinity_dimension(t, n, tol, shards=shards, budget=budget)
    return ProjectedBracket(empirical, last, aff, q_spectra.rank, min(aff.upper, float(q_spectra.rank)))


# ---------------------------------------------------------------- kappa


@dataclass(frozen=True)
class KappaEstimate:
    k: int
    samples: int
    seed: int
    kappa_hat: float
    witness_projection: np.ndarray = field(repr=False)
    witness_word: tuple
    max_word_length: int
    semantics: str = (
        "sampled minimum over random rank-k orthogonal projections; an upper estimate of the true constant, "
        "not a certificate"
    )

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "samples": self.samples,
            "seed": self.seed,
            "kappa_hat": self.kappa_hat,
            "witness_projection": self.witness_projection.tolist(),
            "witness_word": list(self.witness_word),
            "max_word_length": self.max_word_length,
            "semantics": self.semantics,
        }


def random_projection(d: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal basis ``U`` (d x k) of a uniformly random k-plane; ``U U^T`` is the projection."""
    u, r = np.linalg.qr(rng.standard_normal((d, k)))
    # fix the QR sign ambiguity so the sample is a deterministic function of the draw
    return u * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))


def short_word_products(maps, max_length: int, Q=None, budget: int = DEFAULT_KAPPA_BUDGET):
    """``(Q A_k, words)`` for every word ``k`` with ``1 <= |k| <= max_length``, shortest first."""
    t = as_tuple(maps)
    total = sum(t.count**j for j in range(1, max_length + 1))
    if total > budget:
        raise BudgetError(
            f"{total} words of length <= {max_length} exceed the budget of {budget}; raise it with --budget"
        )
    prods, words = [], []
    for blk in iter_shard_blocks(t, max_length):
        prods.append(blk.products)
        digits = word_digits(blk.start, len(blk.products), blk.level, t.count) + 1
        words.extend(tuple(int(x) for x in w) for w in digits)
    prods = np.concatenate(prods)
    if Q is not None:
        prods = np.matmul(as_matrix(Q, name="Q"), prods)
    return prods, words


def _check_k(t: MatrixTuple, Q, k: int) -> np.ndarray:
    q = np.eye(t.dim) if Q is None else as_matrix(Q, name="Q")
    if q.shape != (t.dim, t.dim):
        raise ShapeError(f"Q must be {t.dim} x {t.dim}, got {q.shape}")
    if not 1 <= k <= numerical_rank(q):
        raise DomainError(f"k={k} must satisfy 1 <= k <= rank Q = {numerical_rank(q)}")
    return q


def kappa_estimate(
    maps,
    Q,
    k: int,
    samples: int,
    seed: int,
    budget: int = DEFAULT_KAPPA_BUDGET,
) -> KappaEstimate:
    """Sampled estimate of ``min_B max_{|k| <= C(d,k)} sigma_k(Q A_k B)`` over rank-k orthogonal projections ``B``."""
    t = as_tuple(maps)
    q = _check_k(t, Q, k)
    if samples < 1:
        raise DomainError("samples must be >= 1")
    length = comb(t.dim, k)
    prods, words = short_word_products(t, length, q, budget)
    rng = np.random.default_rng(seed)
    best, best_u, best_word = math.inf, None, None
    for _ in range(samples):
        u = random_projection(t.dim, k, rng)
        # sigma_k(X U U^T) = sigma_k(X U) since U^T has orthonormal rows
        sk = batch_singular_values(np.matmul(prods, u))[:, k - 1]
        j = int(np.argmax(sk))
        if sk[j] < best:
            best, best_u, best_word = float(sk[j]), u, words[j]
    proj = best_u @ best_u.T
    proj = 0.5 * (proj + proj.T)
    return KappaEstimate(k, samples, seed, best, proj, best_word, length)


@dataclass(frozen=True)
class QuasimultReport:
    k: int
    s: float
    trials: int
    seed: int
    min_ratio: float
    worst_word: tuple
    kappa_hat: float
    threshold: float  # kappa_hat ** s
    passed: bool
    note: str = (
        "the guaranteed bound holds for the true constant; a failure against the sampled estimate "
        "means the estimate overshoots"
    )

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "s": self.s,
            "trials": self.trials,
            "seed": self.seed,
            "min_ratio": self.min_ratio,
            "worst_word": list(self.worst_word),
            "kappa_hat": self.kappa_hat,
            "threshold": self.threshold,
            "passed": self.passed,
            "note": self.note,
        }


def quasimult_check(
    maps,
    Q,
    k: int,
    s: float,
    trials: int,
    seed: int,
    kappa: Optional[KappaEstimate] = None,
    kappa_samples: int = 64,
    max_word_length: int = 12,
    budget: int = DEFAULT_KAPPA_BUDGET,
) -> QuasimultReport:
    """Minimum over random words ``i`` of ``max_k phi^s(Q A_k A_i) / phi^s(A_i)``."""
    t = as_tuple(maps)
    q = _check_k(t, Q, k)
    s = float(s)
    if not 0 < s <= k:
        raise DomainError(f"s must lie in (0, k] = (0, {k}], got {s}")
    if kappa is None:
        kappa = kappa_estimate(t, q, k, kappa_samples, seed, budget)
    prods, _ = short_word_products(t, comb(t.dim, k), q, budget)
    rng = np.random.default_rng(seed)
    worst, worst_word = math.inf, ()
    for _ in range(trials):
        length = int(rng.integers(1, max_word_length + 1))
        word = tuple(int(x) + 1 for x in rng.integers(0, t.count, size=length))
        ai = word_product(t, word)
        ai = ai / np.abs(ai).max()  # the ratio is scale invariant
        with np.errstate(divide="ignore"):
            top = log_svf(np.log(batch_singular_values(np.matmul(prods, ai))), s).max()
            base = log_svf(np.log(singular_values(ai)), s)
        log_ratio = float(top - base)
        if log_ratio < worst:
            worst, worst_word = log_ratio, word
    min_ratio = math.exp(worst)
    threshold = kappa.kappa_hat**s
    return QuasimultReport(k, s, trials, seed, min_ratio, worst_word, kappa.kappa_hat, threshold, min_ratio >= threshold)


# ------------------------------------------------- Kronecker and 2-d bounds


@dataclass(frozen=True)
class KronBound:
    bracket: DimensionBracket
    norm_b: float

    @property
    def value(self) -> float:
        return self.bracket.upper

    def as_dict(self) -> dict:
        return {"bound": self.value, "norm_B": self.norm_b, "bracket": self.bracket.as_dict()}


def kron_projected_bound(
    base_a,
    base_b,
    P,
    n: int,
    tol: float = DEFAULT_TOL,
    shards: int = 1,
    budget: int = DEFAULT_BUDGET,
) -> KronBound:
    """Certified upper bound on the projected exponent of ``(A_i (x) B_i)`` under ``Q = I (x) P``.

    Singular values of ``Q (A_w (x) B_w)`` are ``sigma_j(A_w) sigma_1(P B_w)``
    (and zeros), so the series is dominated by that of ``(|B| A_1, ..., |B| A_N)``
    with ``|B| = max_i sigma_1(B_i)``; the bound is that tuple's affinity
    dimension upper bracket.
    """
    ta, tb = as_tuple(base_a), as_tuple(base_b)
    if ta.dim != 2 or tb.dim != 2:
        raise ShapeError("kron_projected_bound needs 2 x 2 factor tuples")
    if ta.count != tb.count:
        raise ShapeError(f"factor tuples differ in arity: {ta.count} vs {tb.count}")
    p = as_matrix(P, name="P")
    if p.shape != (2, 2):
        raise ShapeError(f"P must be 2 x 2, got {p.shape}")
    if numerical_rank(p) != 1:
        raise DomainError(f"P must have rank 1, got rank {numerical_rank(p)}")
    kron = MatrixTuple(np.array([np.kron(a, b) for a, b in zip(ta.maps, tb.maps)]))
    kron.require_contracting()
    norm_b = float(tb.norms().max())
    bracket = affinity_dimension(ta.scaled(norm_b), n, tol, shards=shards, budget=budget)
    return KronBound(bracket, norm_b)


def _require_planar(maps) -> MatrixTuple:
    t = as_tuple(maps)
    if t.dim != 2:
        raise ShapeError(f"expected 2 x 2 maps, got dimension {t.dim}")
    return t


def pressure_at_one_lower(maps) -> float:
    """``log sum_i sigma_2(A_i)``, a lower bound on the pressure at ``s = 1`` in the plane.

    ``sigma_2`` is supermultiplicative for 2 x 2 matrices.
    """
    t = _require_planar(maps)
    return float(np.log(batch_singular_values(t.maps)[:, 1].sum()))


def pressure_at_two_upper(maps) -> float:
    """``log sum_i sigma_1(A_i)^2``, an upper bound on the pressure of ``(A_i (x) I)`` at ``s = 2``."""
    t = _require_planar(maps)
    return float(np.log((batch_singular_values(t.maps)[:, 0] ** 2).sum()))
