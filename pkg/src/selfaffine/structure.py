"""
Certifiers for the structural hypotheses on a tuple of matrices.

Every certifier returns a :class:`CertificateReport`. ``CERTIFIED`` and
``REFUTED`` verdicts always carry a witness that reproduces the verdict;
``INCONCLUSIVE`` means a finite search found nothing either way.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np

from .errors import BudgetError, DomainError, PreconditionError, ShapeError
from .linalg import as_matrix, batch_eigvals, batch_singular_values, eigen, exterior_power, operator_norm
from .maps import AffineIFS, as_tuple
from .wordspace import iter_shard_blocks, word_digits

DEFAULT_MARGIN = 1e-3
SYMMETRY_TOL = 1e-9
INVARIANCE_TOL = 1e-8
EIGEN_GAP_TOL = 1e-6
MAX_WEDGE_DIM = 8
DEFAULT_SEARCH_BUDGET = 10**6
DEFAULT_SEED = 0x5EED


class Verdict(str, enum.Enum):
    CERTIFIED = "CERTIFIED"
    REFUTED = "REFUTED"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class CertificateReport:
    property: str
    verdict: Verdict
    witness: Optional[dict] = None
    tolerances: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED

    def as_dict(self) -> dict:
        return {
            "property": self.property,
            "verdict": self.verdict.value,
            "witness": self.witness,
            "tolerances": self.tolerances,
            "details": self.details,
        }


# ---------------------------------------------------------------- proximality


def leading_ratio(m) -> float:
    """``|lambda_1| / |lambda_2|`` of a square matrix (``inf`` in dimension 1)."""
    vals = np.abs(eigen(m).values)
    if len(vals) == 1:
        return math.inf
    return math.inf if vals[1] == 0 else float(vals[0] / vals[1])


def proximality_check(
    maps,
    k: int,
    max_len: int = 6,
    margin: float = DEFAULT_MARGIN,
    budget: int = DEFAULT_SEARCH_BUDGET,
) -> CertificateReport:
    """Search words of length ``1..max_len`` for a product whose k-th exterior power is proximal.

    A word qualifies when the two largest eigenvalue moduli of ``A_w^{wedge k}``
    have ratio at least ``1 + margin``. The first qualifying word in
    length-lexicographic order is the witness.
    """
    t = as_tuple(maps)
    if not 1 <= k <= t.dim:
        raise DomainError(f"k={k} outside 1..{t.dim}")
    if margin <= 0:
        raise DomainError("margin must be positive")
    name = f"{k}-proximality"
    tols = {"margin": margin, "max_len": max_len}
    if comb(t.dim, k) == 1:
        return CertificateReport(
            name, Verdict.CERTIFIED, {"word": [1], "ratio": math.inf, "note": "exterior power is one-dimensional"}, tols
        )
    total = sum(t.count**j for j in range(1, max_len + 1))
    if total > budget:
        raise BudgetError(f"{total} words up to length {max_len} exceed the budget of {budget}; raise it with --budget")
    best = 0.0
    for blk in iter_shard_blocks(t, max_len):
        prods = blk.products / np.abs(blk.products).max(axis=(1, 2), keepdims=True)
        mods = np.abs(batch_eigvals(exterior_power(prods, k)))
        with np.errstate(divide="ignore"):
            ratios = np.where(mods[:, 1] > 0, mods[:, 0] / mods[:, 1], np.inf)
        best = max(best, float(ratios.max()))
        hits = np.nonzero(ratios >= 1.0 + margin)[0]
        if hits.size:
            j = int(hits[0])
            word = tuple(int(x) + 1 for x in word_digits(blk.start + j, 1, blk.level, t.count)[0])
            return CertificateReport(
                name,
                Verdict.CERTIFIED,
                {"word": list(word), "ratio": float(ratios[j]), "moduli": [float(x) for x in mods[j]]},
                tols,
            )
    return CertificateReport(name, Verdict.INCONCLUSIVE, None, tols, {"best_ratio": best, "words_searched": total})


# ------------------------------------------------------------ irreducibility


def invariance_residual(generators: np.ndarray, basis: np.ndarray) -> float:
    """Largest relative distance ``|(I - P_W) G u|`` over generators ``G`` and orthonormal basis columns ``u`` of ``W``."""
    worst = 0.0
    for g in generators:
        gu = g @ basis
        res = gu - basis @ (basis.T @ gu)
        worst = max(worst, float(np.linalg.norm(res, 2) / np.linalg.norm(g, 2)))
    return worst


def _real_classes(vals: np.ndarray, vecs: np.ndarray, scale: float) -> list:
    """Real vectors spanning each conjugate-closed eigenspace of a matrix with simple spectrum."""
    classes = []
    for j, lam in enumerate(vals):
        v = vecs[:, j]
        if abs(lam.imag) <= 1e-10 * scale:
            pivot = v[np.argmax(np.abs(v))]
            classes.append([np.real(v * np.conj(pivot) / abs(pivot))])
        elif lam.imag > 0:
            classes.append([v.real, v.imag])
    return classes


def irreducibility_check(maps, k: int, retries: int = 8, seed: int = DEFAULT_SEED) -> CertificateReport:
    """Decide k-irreducibility via the eigenvectors of a random element of the generated algebra.

    If ``X`` (a random combination of short products of the exterior powers)
    has simple spectrum, every common invariant subspace is spanned by a
    conjugate-closed set of its eigenvectors, so testing those finitely many
    candidates decides the question.
    """
    t = as_tuple(maps)
    if not 1 <= k <= t.dim:
        raise DomainError(f"k={k} outside 1..{t.dim}")
    D = comb(t.dim, k)
    if D > MAX_WEDGE_DIM:
        raise BudgetError(f"exterior power dimension {D} exceeds {MAX_WEDGE_DIM}")
    name = f"{k}-irreducibility"
    tols = {"invariance": INVARIANCE_TOL, "eigen_gap": EIGEN_GAP_TOL, "retries": retries, "seed": seed}
    if D == 1:
        return CertificateReport(name, Verdict.CERTIFIED, {"wedge_dimension": 1}, tols)
    gens = exterior_power(t.maps, k)
    gens = gens / np.linalg.norm(gens, axis=(1, 2), keepdims=True)
    length = 1
    while length < D and sum(t.count**j for j in range(1, length + 2)) <= 512:
        length += 1
    level, blocks = gens, [gens]
    for _ in range(length - 1):
        level = np.matmul(level[:, None], gens[None]).reshape(-1, D, D)
        level = level / np.linalg.norm(level, axis=(1, 2), keepdims=True)
        blocks.append(level)
    words = np.concatenate(blocks)
    rng = np.random.default_rng(seed)
    for attempt in range(retries):
        x = np.tensordot(rng.standard_normal(len(words)), words, axes=1)
        vals, vecs = np.linalg.eig(x)
        scale = float(np.abs(vals).max())
        gaps = np.abs(vals[:, None] - vals[None, :])
        np.fill_diagonal(gaps, np.inf)
        if scale == 0 or gaps.min() <= EIGEN_GAP_TOL * scale:
            continue
        classes = _real_classes(vals, vecs, scale)
        tested = 0
        closest = math.inf
        for mask in range(1, 2 ** len(classes) - 1):
            vectors = [v for i, c in enumerate(classes) if mask >> i & 1 for v in c]
            basis, _ = np.linalg.qr(np.array(vectors).T)
            tested += 1
            r = invariance_residual(gens, basis)
            closest = min(closest, r)
            if r < INVARIANCE_TOL:
                return CertificateReport(
                    name,
                    Verdict.REFUTED,
                    {"subspace_basis": basis.T.tolist(), "dimension": basis.shape[1], "residual": r},
                    tols,
                    {"attempt": attempt},
                )
        return CertificateReport(
            name,
            Verdict.CERTIFIED,
            {
                "algebra_element_eigenvalues": [[float(v.real), float(v.imag)] for v in vals],
                "candidates_tested": tested,
                "smallest_residual": closest,
            },
            tols,
            {"attempt": attempt, "word_length": length},
        )
    return CertificateReport(name, Verdict.INCONCLUSIVE, None, tols, {"reason": "eigenvalue collisions on every retry"})


# ---------------------------------------------------- tensor-product criterion


def _check_2x2(m, name):
    a = as_matrix(m, name=name)
    if a.shape != (2, 2):
        raise ShapeError(f"{name} must be 2 x 2, got {a.shape}")
    return a


def _real_pair(m, tol):
    """Eigenvalues ``l1 >= l2`` and unit eigenvectors if both are real and distinct, else ``None``."""
    spec = eigen(m, want_vectors=True)
    if np.any(np.abs(spec.values.imag) > tol):
        return None
    vals = [float(x) for x in spec.values.real]
    if vals[0] - vals[1] <= tol:
        return None
    vecs = []
    for j in range(2):
        v = spec.vectors[:, j].real
        vecs.append(v / np.linalg.norm(v))
    return vals, vecs


def tensor_strong_irreducibility_certificate(A, B, tol: float = SYMMETRY_TOL) -> CertificateReport:
    """Certify strong irreducibility of ``(A (x) B, A^T (x) B^T)`` for positive 2 x 2 matrices.

    The criterion: both factors nonsymmetric, each with two distinct positive
    eigenvalues, ``lambda_1/lambda_2 > mu_1/mu_2`` so the four products are
    distinct, and no two eigenvectors of either factor orthogonal. Failure of
    a later check refutes the criterion only; a symmetric factor yields a
    genuine common invariant subspace.
    """
    a, b = _check_2x2(A, "A"), _check_2x2(B, "B")
    if np.any(a <= 0) or np.any(b <= 0):
        raise PreconditionError("A and B must be entrywise positive")
    name = "strong irreducibility (tensor criterion)"
    tols = {"absolute": tol}
    checks = {}

    def refute(check, witness, scope="criterion"):
        return CertificateReport(name, Verdict.REFUTED, {"failed_check": check, "scope": scope, **witness}, tols, checks)

    asym_a, asym_b = float(np.abs(a - a.T).max()), float(np.abs(b - b.T).max())
    checks["a_nonsymmetric"] = {"A": asym_a, "B": asym_b, "passed": bool(asym_a > tol and asym_b > tol)}
    if not checks["a_nonsymmetric"]["passed"]:
        # a symmetric factor has orthogonal eigenvectors; a tensor slice is then invariant
        if asym_b <= tol:
            v = eigen(b, want_vectors=True).vectors[:, 0].real
            basis = [np.kron(e, v).tolist() for e in np.eye(2)]
        else:
            u = eigen(a, want_vectors=True).vectors[:, 0].real
            basis = [np.kron(u, e).tolist() for e in np.eye(2)]
        return refute("a", {"asymmetry": {"A": asym_a, "B": asym_b}, "invariant_subspace": basis}, scope="property")

    pa, pb = _real_pair(a, tol), _real_pair(b, tol)
    ok_b = pa is not None and pb is not None and pa[0][1] > tol and pb[0][1] > tol
    checks["b_distinct_positive_eigenvalues"] = {
        "A": None if pa is None else pa[0],
        "B": None if pb is None else pb[0],
        "passed": bool(ok_b),
    }
    if not ok_b:
        return refute("b", {"eigenvalues": checks["b_distinct_positive_eigenvalues"]})
    (l1, l2), (u1, u2) = pa
    (m1, m2), (v1, v2) = pb
    ratio_a, ratio_b = l1 / l2, m1 / m2
    checks["c_ratio"] = {"lambda_ratio": ratio_a, "mu_ratio": ratio_b, "passed": bool(ratio_a - ratio_b > tol)}
    checks["c_ratio"]["chain"] = [l1 * m1, l1 * m2, l2 * m1, l2 * m2]
    if not checks["c_ratio"]["passed"]:
        return refute("c", {"lambda_ratio": ratio_a, "mu_ratio": ratio_b})
    ip_a, ip_b = abs(float(u1 @ u2)), abs(float(v1 @ v2))
    checks["d_nonorthogonal"] = {"A": ip_a, "B": ip_b, "passed": bool(ip_a > tol and ip_b > tol)}
    if not checks["d_nonorthogonal"]["passed"]:
        return refute("d", {"inner_products": {"A": ip_a, "B": ip_b}})
    witness = {
        "eigenvalues_A": [l1, l2],
        "eigenvalues_B": [m1, m2],
        "product_chain": checks["c_ratio"]["chain"],
        "eigenvector_inner_products": {"A": ip_a, "B": ip_b},
    }
    return CertificateReport(name, Verdict.CERTIFIED, witness, tols, checks)


# ------------------------------------------------------------ strong separation


def strong_separation_certificate(ifs: AffineIFS, center, radius: float) -> CertificateReport:
    """Ball criterion: ``T_i`` maps ``B(c, R)`` into pairwise disjoint balls inside ``B(c, R)``.

    Success certifies the strong separation condition with ``Z = B(c, R)``.
    Failure only says this ball does not work.
    """
    if not radius > 0:
        raise DomainError("radius must be positive")
    c = np.asarray(center, dtype=float).reshape(-1)
    if c.shape != (ifs.dim,):
        raise ShapeError(f"center must have length {ifs.dim}")
    norms = batch_singular_values(ifs.linear.maps)[:, 0]
    centres = np.array([ifs.apply(i, c) for i in range(ifs.count)])
    radii = norms * radius
    slack = radius - (np.linalg.norm(centres - c, axis=1) + radii)
    gaps = {}
    for i, j in itertools.combinations(range(ifs.count), 2):
        gaps[(i, j)] = float(np.linalg.norm(centres[i] - centres[j]) - radii[i] - radii[j])
    min_gap = min(gaps.values())
    contained = bool(np.all(slack >= 0))
    name = "strong separation (ball criterion)"
    tols = {"center": c.tolist(), "radius": radius}
    data = {
        "image_centres": centres.tolist(),
        "image_radii": radii.tolist(),
        "containment_slack": slack.tolist(),
        "min_pairwise_gap": min_gap,
    }
    if contained and min_gap > 0:
        return CertificateReport(name, Verdict.CERTIFIED, {"center": c.tolist(), "radius": radius, **data}, tols)
    coincide = [
        [i + 1, j + 1]
        for i, j in itertools.combinations(range(ifs.count), 2)
        if np.array_equal(ifs.linear.maps[i], ifs.linear.maps[j])
        and np.array_equal(ifs.translations[i], ifs.translations[j])
    ]
    data["failure"] = "containment" if not contained else "overlap"
    if coincide:
        data["coinciding_maps"] = coincide
    return CertificateReport(name, Verdict.INCONCLUSIVE, None, tols, data)


# ----------------------------------------------------- Kronecker-construction admissibility


def theorem3_constraints_check(A, B) -> CertificateReport:
    """Check the hypotheses on ``(A, B)`` for the four-map Kronecker construction."""
    a, b = _check_2x2(A, "A"), _check_2x2(B, "B")
    norm_a, norm_b = operator_norm(a), operator_norm(b)
    det_a = float(np.linalg.det(a))
    checks = {
        "A_positive": bool(np.all(a > 0)),
        "B_positive": bool(np.all(b > 0)),
        "norm_A_below_one_third": bool(norm_a < 1 / 3),
        "det_A_above_one_tenth": bool(det_a > 0.1),
        "A_nonsymmetric": bool(np.abs(a - a.T).max() > SYMMETRY_TOL),
        "B_nonsymmetric": bool(np.abs(b - b.T).max() > SYMMETRY_TOL),
        "contracting": bool(norm_a * norm_b < 1),
    }
    pa, pb = _real_pair(a, SYMMETRY_TOL), _real_pair(b, SYMMETRY_TOL)
    ratio_ok = pa is not None and pb is not None and pa[0][1] > 0 and pb[0][1] > 0
    ratios = None
    if ratio_ok:
        ratios = (pa[0][0] / pa[0][1], pb[0][0] / pb[0][1])
        ratio_ok = ratios[0] - ratios[1] > SYMMETRY_TOL
    checks["eigenvalue_ratio"] = bool(ratio_ok)
    values = {
        "norm_A": norm_a,
        "det_A": det_a,
        "norm_B": norm_b,
        "norm_A_times_norm_B": norm_a * norm_b,
        "eigenvalue_ratios": ratios,
    }
    failed = [key for key, ok in checks.items() if not ok]
    verdict = Verdict.REFUTED if failed else Verdict.CERTIFIED
    witness = {"failed": failed, "values": values} if failed else {"values": values}
    return CertificateReport("Kronecker-construction admissibility", verdict, witness, {"symmetry": SYMMETRY_TOL}, {"checks": checks})
