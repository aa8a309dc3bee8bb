"""
Constructors for the explicit four-dimensional families and the end-to-end
verification pipeline for the Kronecker construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PreconditionError, ShapeError
from .linalg import as_matrix
from .maps import AffineIFS, MatrixTuple
from .pressure import (
    DEFAULT_TOL,
    affinity_dimension,
    kron_projected_bound,
    pressure_at_one_lower,
    pressure_at_two_upper,
)
from .structure import (
    Verdict,
    proximality_check,
    strong_separation_certificate,
    tensor_strong_irreducibility_certificate,
    theorem3_constraints_check,
)
from .wordspace import DEFAULT_BUDGET

# an admissible pair for the Kronecker construction (see tests for the checks)
ADMISSIBLE_A = np.array([[0.32, 0.01], [0.005, 0.315]])
ADMISSIBLE_B = np.array([[1.0, 0.012], [0.004, 1.0]])

SHEAR = np.array([[1.0, 3.0], [0.0, 1.0]])
SEPARATION_RADIUS = 1.5


def _planar(m, name):
    a = as_matrix(m, name=name)
    if a.shape != (2, 2):
        raise ShapeError(f"{name} must be 2 x 2, got {a.shape}")
    return a


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def coordinate_projection(d: int, coords) -> np.ndarray:
    """Diagonal ``d x d`` orthogonal projection keeping the given 1-based coordinates."""
    q = np.zeros((d, d))
    for c in coords:
        q[c - 1, c - 1] = 1.0
    return q


def rank_one_projection(angle: float) -> np.ndarray:
    """Orthogonal projection of the plane onto the line at ``angle``."""
    u = np.array([math.cos(angle), math.sin(angle)])
    return np.outer(u, u)


@dataclass(frozen=True, eq=False)
class KroneckerInstance:
    """``M_1 = M_2 = A (x) B`` and ``M_3 = M_4 = A^T (x) B^T`` with translations ``v_i``."""

    A: np.ndarray
    B: np.ndarray
    ifs: AffineIFS

    @property
    def maps(self) -> MatrixTuple:
        return self.ifs.linear

    @property
    def base_a(self) -> MatrixTuple:
        return MatrixTuple(np.array([self.A, self.A, self.A.T, self.A.T]))

    @property
    def base_b(self) -> MatrixTuple:
        return MatrixTuple(np.array([self.B, self.B, self.B.T, self.B.T]))


def build_kronecker_example(A, B, translations=None) -> KroneckerInstance:
    a, b = _planar(A, "A"), _planar(B, "B")
    m = np.kron(a, b)
    maps = np.array([m, m, m.T, m.T])
    v = np.eye(4) if translations is None else translations
    return KroneckerInstance(a, b, AffineIFS(MatrixTuple(maps), v))


@dataclass(frozen=True, eq=False)
class RotationShearInstance:
    """``M_1 = (C (x) R_theta)/sqrt(14)`` with ``C = [[1, 3], [0, 1]]`` and ``M_2 = M_1^T``."""

    theta: float
    ifs: AffineIFS
    note: str = field(
        default="strong irreducibility requires theta to be an irrational multiple of pi; "
        "a floating-point theta cannot certify that"
    )

    @property
    def maps(self) -> MatrixTuple:
        return self.ifs.linear

    @property
    def projection_p_i(self) -> np.ndarray:
        """``P (x) I`` with ``P`` onto the first axis: coordinates 1 and 2."""
        return coordinate_projection(4, (1, 2))

    @property
    def projection_i_p(self) -> np.ndarray:
        """``I (x) P`` with ``P`` onto the first axis: coordinates 1 and 3."""
        return coordinate_projection(4, (1, 3))

    @property
    def factor_tuples(self):
        """Factor tuples ``(C/sqrt14, C^T/sqrt14)`` and ``(R_theta, R_theta^T)``."""
        c = SHEAR / math.sqrt(14.0)
        r = rotation(self.theta)
        return MatrixTuple(np.array([c, c.T])), MatrixTuple(np.array([r, r.T]))


def build_rotation_shear(theta: float = 1.0, v1=None, v2=None) -> RotationShearInstance:
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    m1 = np.kron(SHEAR, rotation(theta)) / math.sqrt(14.0)
    v1 = np.zeros(4) if v1 is None else np.asarray(v1, dtype=float)
    v2 = np.array([1.0, 0.0, 1.0, 0.0]) if v2 is None else np.asarray(v2, dtype=float)
    return RotationShearInstance(float(theta), AffineIFS(MatrixTuple(np.array([m1, m1.T])), np.array([v1, v2])))


@dataclass
class KroneckerReport:
    constraints: dict
    tensor: dict
    proximality: list
    separation: dict
    affinity: dict
    projected_bounds: list
    pressure_one_lower: float
    pressure_two_upper: float
    gap_margin: float
    passed: bool
    settings: dict

    def as_dict(self) -> dict:
        return {
            "settings": self.settings,
            "constraints": self.constraints,
            "tensor_strong_irreducibility": self.tensor,
            "proximality": self.proximality,
            "strong_separation": self.separation,
            "affinity_dimension": self.affinity,
            "projected_bounds": self.projected_bounds,
            "pressure_at_1_lower": self.pressure_one_lower,
            "pressure_at_2_upper": self.pressure_two_upper,
            "dimension_gap_margin": {
                "value": self.gap_margin,
                "label": "empirical: 4-dim envelope bracket lower end minus certified projected bound",
            },
            "passed": self.passed,
        }


def certify_kronecker_example(
    instance: KroneckerInstance,
    n: int = 8,
    tol: float = DEFAULT_TOL,
    seed: int = 0x5EED,
    angles: int = 16,
    max_len: int = 6,
    shards: int = 1,
    budget: int = DEFAULT_BUDGET,
) -> KroneckerReport:
    """Run every check of the construction in a fixed order and collect one report.

    Aborts with :class:`PreconditionError` if ``(A, B)`` is not admissible.
    No randomness is used; ``seed`` is recorded for the report only.
    """
    constraints = theorem3_constraints_check(instance.A, instance.B)
    if constraints.verdict is not Verdict.CERTIFIED:
        failed = ", ".join(constraints.witness["failed"])
        raise PreconditionError(f"admissibility check failed: {failed}", report=constraints)
    tensor = tensor_strong_irreducibility_certificate(instance.A, instance.B)
    prox = [proximality_check(instance.maps, k, max_len=max_len) for k in (1, 2, 3)]
    sep = strong_separation_certificate(instance.ifs, np.zeros(4), SEPARATION_RADIUS)
    aff = affinity_dimension(instance.maps, n, tol, shards=shards, budget=budget)
    bounds = []
    for j in range(angles):
        angle = math.pi * j / angles
        kb = kron_projected_bound(
            instance.base_a, instance.base_b, rank_one_projection(angle), n, tol, shards=shards, budget=budget
        )
        bounds.append({"angle": angle, **kb.as_dict()})
    p1 = pressure_at_one_lower(instance.base_a)
    p2 = pressure_at_two_upper(instance.base_a)
    worst = max(b["bound"] for b in bounds)
    margin = aff.lower - worst
    passed = (
        tensor.certified
        and all(r.certified for r in prox)
        and sep.certified
        and p1 > 0
        and p2 < 0
        and margin > 0
    )
    return KroneckerReport(
        constraints=constraints.as_dict(),
        tensor=tensor.as_dict(),
        proximality=[r.as_dict() for r in prox],
        separation=sep.as_dict(),
        affinity=aff.as_dict(),
        projected_bounds=bounds,
        pressure_one_lower=p1,
        pressure_two_upper=p2,
        gap_margin=margin,
        passed=bool(passed),
        settings={"level": n, "tol": tol, "seed": seed, "angles": angles, "max_len": max_len, "shards": shards},
    )


# interface aliases
Theorem3Instance = KroneckerInstance
Theorem3Report = KroneckerReport
DeffyInstance = RotationShearInstance
build_theorem3 = build_kronecker_example
build_deffy = build_rotation_shear
certify_theorem3 = certify_kronecker_example
