"""Core data types: tuples of linear maps and affine iterated function systems."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError, ShapeError
from .linalg import batch_singular_values

INVERTIBILITY_TOL = 1e-14


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MatrixTuple:
    """The linearisation ``(A_1, ..., A_N)``: N >= 2 invertible d x d matrices.

    ``maps`` is stored as a read-only array of shape ``(N, d, d)``.
    """

    maps: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.maps, dtype=float)
        if a.ndim != 3 or a.shape[1] != a.shape[2] or a.shape[1] < 1:
            raise ShapeError(f"expected N square d x d matrices, got shape {a.shape}")
        if a.shape[0] < 2:
            raise DomainError(f"a tuple needs at least 2 maps, got {a.shape[0]}")
        if not np.all(np.isfinite(a)):
            raise DomainError("matrix entries must be finite")
        dets = np.abs(np.linalg.det(a))
        bad = np.nonzero(dets <= INVERTIBILITY_TOL)[0]
        if bad.size:
            raise DomainError(f"map {int(bad[0]) + 1} is not invertible (|det| = {dets[bad[0]]:.3e})")
        object.__setattr__(self, "maps", _frozen(a))

    @property
    def count(self) -> int:
        return self.maps.shape[0]

    @property
    def dim(self) -> int:
        return self.maps.shape[1]

    def __len__(self):
        return self.count

    def __getitem__(self, i):
        return self.maps[i]

    def norms(self) -> np.ndarray:
        """Operator norms ``sigma_1(A_i)``."""
        return batch_singular_values(self.maps)[:, 0]

    @property
    def contraction_norm(self) -> float:
        """Largest operator norm among the maps."""
        return float(self.norms().max())

    def log_abs_dets(self) -> np.ndarray:
        return np.log(np.abs(np.linalg.det(self.maps)))

    def require_contracting(self):
        norms = self.norms()
        for i, r in enumerate(norms):
            if not r < 1.0:
                raise PreconditionError(f"map {i + 1} is not a contraction: operator norm {r:.6g} >= 1")

    def scaled(self, c: float) -> "MatrixTuple":
        return MatrixTuple(c * self.maps)

    def transposed(self) -> "MatrixTuple":
        return MatrixTuple(np.swapaxes(self.maps, 1, 2))


def as_tuple(maps) -> MatrixTuple:
    return maps if isinstance(maps, MatrixTuple) else MatrixTuple(maps)


@dataclass(frozen=True, eq=False)
class AffineIFS:
    """Affine maps ``T_i x = A_i x + v_i``."""

    linear: MatrixTuple
    translations: np.ndarray = field(default=None)

    def __post_init__(self):
        lin = as_tuple(self.linear)
        object.__setattr__(self, "linear", lin)
        if self.translations is None:
            v = np.zeros((lin.count, lin.dim))
        else:
            v = np.asarray(self.translations, dtype=float)
        if v.shape != (lin.count, lin.dim):
            raise ShapeError(f"translations must have shape {(lin.count, lin.dim)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("translations must be finite")
        object.__setattr__(self, "translations", _frozen(v))

    @property
    def count(self) -> int:
        return self.linear.count

    @property
    def dim(self) -> int:
        return self.linear.dim

    def apply(self, i: int, x) -> np.ndarray:
        """``T_i x`` for a 0-based map index; ``x`` may be a stack of points ``(..., d)``."""
        x = np.asarray(x, dtype=float)
        return x @ self.linear.maps[i].T + self.translations[i]

    def fixed_point(self, i: int = 0) -> np.ndarray:
        """The fixed point ``(I - A_i)^{-1} v_i`` of ``T_i`` (0-based index)."""
        a = self.linear.maps[i]
        return np.linalg.solve(np.eye(self.dim) - a, self.translations[i])
