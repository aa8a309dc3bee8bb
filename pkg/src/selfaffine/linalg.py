"""
Small dense linear algebra for matrices of dimension at most 8.

Singular values come from a batched one-sided (Hestenes) Jacobi iteration,
which is accurate to high relative precision at these sizes and vectorises
across a stack of matrices. Eigenvalues are delegated to LAPACK (balanced
Hessenberg reduction followed by shifted QR) and re-sorted so that spectra are
deterministic.
"""
from __future__ import annotations

from itertools import combinations
from math import comb
from typing import NamedTuple, Optional

import numpy as np

from .errors import DomainError, NumericalError, ShapeError

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 60
MAX_EIGEN_DIM = 8


class EigenSpectrum(NamedTuple):
    """Eigenvalues sorted by modulus (descending), ties by argument (ascending).

    ``vectors[:, j]`` is a unit eigenvector for ``values[j]`` when requested;
    it is only meaningful when ``values[j]`` is simple.
    """

    values: np.ndarray
    vectors: Optional[np.ndarray] = None


def as_matrix(m, *, square: bool = True, name: str = "matrix") -> np.ndarray:
    """Validate and convert ``m`` to a finite 2-d float array."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-d array, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite entries")
    return a


def batch_singular_values(a, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Singular values of every matrix in a stack ``(..., m, n)``.

    Returns an array ``(..., min(m, n))`` in non-increasing order. The
    iteration rotates pairs of columns until every pair satisfies
    ``|<a_p, a_q>| <= tol * |a_p| |a_q|``; the singular values are then the
    column norms.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim < 2:
        raise ShapeError(f"expected a stack of matrices, got shape {a.shape}")
    if a.shape[-2] < a.shape[-1]:
        a = np.swapaxes(a, -1, -2)
    batch_shape = a.shape[:-2]
    m, n = a.shape[-2:]
    # layout (column, row, batch): every update is a contiguous sweep over the batch
    cols = np.ascontiguousarray(np.transpose(a.reshape(-1, m, n), (2, 1, 0)))
    live = np.arange(cols.shape[2])
    if n > 1:
        for _ in range(max_sweeps):
            if live.size == 0:
                break
            work = cols[:, :, live] if live.size < cols.shape[2] else cols
            worst = np.zeros(live.size)
            for p in range(n - 1):
                for q in range(p + 1, n):
                    ap, aq = work[p], work[q]
                    alpha = (ap * ap).sum(axis=0)
                    beta = (aq * aq).sum(axis=0)
                    gamma = (ap * aq).sum(axis=0)
                    scale = np.sqrt(alpha * beta)
                    with np.errstate(divide="ignore", invalid="ignore"):
                        rel = np.where(scale > 0, np.abs(gamma) / scale, 0.0)
                    np.maximum(worst, rel, out=worst)
                    active = rel > tol
                    if not active.any():
                        continue
                    with np.errstate(divide="ignore", invalid="ignore"):
                        zeta = np.where(active, (beta - alpha) / (2.0 * gamma), 0.0)
                    t = np.where(active, np.copysign(1.0, zeta) / (np.abs(zeta) + np.hypot(1.0, zeta)), 0.0)
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = c * t
                    new_p = c * ap - s * aq
                    work[q] = s * ap + c * aq
                    work[p] = new_p
            if work is not cols:
                cols[:, :, live] = work
            # a matrix whose sweep needed no rotation is converged
            live = live[worst > tol]
        else:
            if live.size:
                raise NumericalError(f"Jacobi SVD did not converge in {max_sweeps} sweeps ({live.size} matrices)")
    sv = np.sqrt((cols * cols).sum(axis=1)).T
    sv = -np.sort(-sv, axis=-1)
    return sv.reshape(batch_shape + (n,))


def singular_values(m) -> np.ndarray:
    """Singular values ``sigma_1 >= ... >= sigma_d`` of a square matrix."""
    a = as_matrix(m)
    return batch_singular_values(a)


def operator_norm(m) -> float:
    return float(singular_values(m)[0])


def numerical_rank(m, rtol: float = 1e-10) -> int:
    """Number of singular values above ``rtol * sigma_1``."""
    sv = batch_singular_values(as_matrix(m, square=False))
    if sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > rtol * sv[0]))


def _sort_spectrum(values: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Permutation ordering ``values`` by modulus desc, then argument asc."""
    mods = np.abs(values)
    order = list(np.argsort(-mods, kind="stable"))
    out = []
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and abs(mods[order[i]] - mods[order[j]]) <= rtol * max(1.0, mods[order[i]]):
            j += 1
        group = order[i:j]
        group.sort(key=lambda idx: (np.angle(values[idx]), idx))
        out.extend(group)
        i = j
    return np.array(out, dtype=int)


def eigen(m, want_vectors: bool = False) -> EigenSpectrum:
    """Eigenvalues (with algebraic multiplicity) of a square matrix, d <= 8."""
    a = as_matrix(m)
    if a.shape[0] > MAX_EIGEN_DIM:
        raise DomainError(f"eigen supports dimension <= {MAX_EIGEN_DIM}, got {a.shape[0]}")
    try:
        if want_vectors:
            vals, vecs = np.linalg.eig(a)
        else:
            vals, vecs = np.linalg.eigvals(a), None
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed to converge: {exc}") from exc
    vals = np.asarray(vals, dtype=complex)
    # LAPACK returns -0.0 imaginary parts for real eigenvalues; normalise them
    vals = np.where(vals.imag == 0.0, vals.real + 0.0j, vals)
    order = _sort_spectrum(vals)
    vals = vals[order]
    if vecs is not None:
        vecs = np.asarray(vecs, dtype=complex)[:, order]
        for j in range(vecs.shape[1]):
            v = vecs[:, j]
            pivot = v[np.argmax(np.abs(v))]
            v = v * (abs(pivot) / pivot)
            vecs[:, j] = v / np.linalg.norm(v)
    return EigenSpectrum(vals, vecs)


def batch_eigvals(a) -> np.ndarray:
    """Eigenvalues of a stack of square matrices, sorted by modulus descending."""
    a = np.asarray(a, dtype=float)
    try:
        vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed to converge: {exc}") from exc
    order = np.argsort(-np.abs(vals), axis=-1, kind="stable")
    return np.take_along_axis(vals, order, axis=-1)


def kronecker(a, b) -> np.ndarray:
    """Kronecker product ``[a_ij * B]``."""
    return np.kron(as_matrix(a, square=False, name="A"), as_matrix(b, square=False, name="B"))


def _det(sub: np.ndarray) -> np.ndarray:
    """Determinants over the last two axes by cofactor expansion."""
    k = sub.shape[-1]
    if k == 1:
        return sub[..., 0, 0]
    if k == 2:
        return sub[..., 0, 0] * sub[..., 1, 1] - sub[..., 0, 1] * sub[..., 1, 0]
    if k == 3:
        return (
            sub[..., 0, 0] * (sub[..., 1, 1] * sub[..., 2, 2] - sub[..., 1, 2] * sub[..., 2, 1])
            - sub[..., 0, 1] * (sub[..., 1, 0] * sub[..., 2, 2] - sub[..., 1, 2] * sub[..., 2, 0])
            + sub[..., 0, 2] * (sub[..., 1, 0] * sub[..., 2, 1] - sub[..., 1, 1] * sub[..., 2, 0])
        )
    total = np.zeros(sub.shape[:-2])
    rest = np.arange(1, k)
    for j in range(k):
        keep = np.delete(np.arange(k), j)
        minor = sub[..., rest[:, None], keep[None, :]]
        total = total + (-1) ** j * sub[..., 0, j] * _det(minor)
    return total


def wedge_basis(d: int, k: int) -> list:
    """Lexicographic index sets ``i_1 < ... < i_k`` (0-based) of the basis of the k-th exterior power."""
    return list(combinations(range(d), k))


def exterior_power(a, k: int) -> np.ndarray:
    """Matrix of ``A^{wedge k}`` in the lexicographic basis ``e_I``.

    Entry ``(I, J)`` is the minor ``det A[I, J]``. Accepts a single matrix or a
    stack ``(..., d, d)``.
    """
    arr = np.asarray(a, dtype=float)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2]:
        raise ShapeError(f"exterior_power needs square matrices, got shape {arr.shape}")
    d = arr.shape[-1]
    if not 1 <= k <= d:
        raise DomainError(f"exterior power order k={k} outside 1..{d}")
    idx = np.array(wedge_basis(d, k))
    D = comb(d, k)
    sub = arr[..., idx[:, None, :, None], idx[None, :, None, :]]
    out = _det(sub)
    return out.reshape(arr.shape[:-2] + (D, D))
