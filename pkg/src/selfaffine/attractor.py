"""
Attractor sampling, linear projection, box counting and bitmap rendering.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError, EstimationError, ShapeError
from .linalg import as_matrix, numerical_rank
from .maps import AffineIFS
from .wordspace import DEFAULT_BUDGET, check_budget

BURN_IN = 100
MAX_BOX_LEVEL = 14
MIN_BOX_LEVEL = 3
RETAIN_FRACTION = 100  # keep scales with at most points/100 occupied boxes
MIN_IMAGE_SIDE = 16


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if p.ndim != 2 or p.shape[0] == 0:
            raise ShapeError(f"a point cloud needs shape (n, d) with n >= 1, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise DomainError("point coordinates must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


def chaos_game(ifs: AffineIFS, count: int, seed: int) -> PointCloud:
    """Random iteration ``x <- T_i x`` with ``i`` uniform; the first 100 iterates are discarded."""
    if count < 1:
        raise DomainError("count must be positive")
    ifs.linear.require_contracting()
    rng = np.random.default_rng(seed)
    choice = rng.integers(0, ifs.count, size=BURN_IN + count)
    a, v = ifs.linear.maps, ifs.translations
    x = ifs.fixed_point(0)
    out = np.empty((count, ifs.dim))
    for t, i in enumerate(choice):
        x = a[i] @ x + v[i]
        if t >= BURN_IN:
            out[t - BURN_IN] = x
    return PointCloud(out, {"mode": "chaos", "count": count, "seed": seed, "burn_in": BURN_IN})


def deterministic_images(ifs: AffineIFS, depth: int, budget: int = DEFAULT_BUDGET) -> PointCloud:
    """The ``N^depth`` points ``T_w x*`` over words ``w`` in lexicographic order, ``x*`` the fixed point of ``T_1``."""
    if depth < 0:
        raise DomainError("depth must be non-negative")
    ifs.linear.require_contracting()
    check_budget(ifs.count, depth, budget)
    a, v = ifs.linear.maps, ifs.translations
    pts = ifs.fixed_point(0)[None, :]
    for _ in range(depth):
        # leading symbol is the outermost map, so it varies slowest
        pts = (np.einsum("nij,pj->npi", a, pts) + v[:, None, :]).reshape(-1, ifs.dim)
    return PointCloud(pts, {"mode": "deterministic", "depth": depth})


def sample_attractor(
    ifs: AffineIFS,
    mode: str = "chaos",
    *,
    count: int = 100_000,
    seed: int = 0x5EED,
    depth: int = 8,
    budget: int = DEFAULT_BUDGET,
) -> PointCloud:
    if mode == "chaos":
        return chaos_game(ifs, count, seed)
    if mode == "deterministic":
        return deterministic_images(ifs, depth, budget)
    raise DomainError(f"unknown sampling mode {mode!r}")


def image_basis(Q, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (as columns) of the image of ``Q``, by Gram-Schmidt over its columns in order."""
    q = as_matrix(Q, square=False, name="Q")
    scale = np.abs(q).max()
    basis = []
    for col in q.T:
        w = col.copy()
        for b in basis:
            w -= (b @ w) * b
        for b in basis:
            w -= (b @ w) * b
        nrm = np.linalg.norm(w)
        if nrm > rtol * max(scale, 1e-300) * np.sqrt(q.shape[0]):
            basis.append(w / nrm)
    return np.array(basis).T


def project_points(cloud: PointCloud, Q) -> PointCloud:
    """Coordinates of ``Qx`` in an orthonormal basis of the image of ``Q`` (rank 2 required).

    The map is an isometry from ``QX`` onto its image in the plane. For a
    coordinate projection the basis is the pair of selected unit vectors, so
    those coordinates are returned unchanged.
    """
    q = as_matrix(Q, square=False, name="Q")
    if q.shape[1] != cloud.dim:
        raise ShapeError(f"Q has {q.shape[1]} columns but points are {cloud.dim}-dimensional")
    rank = numerical_rank(q)
    if rank != 2:
        raise DomainError(f"projection must have rank 2, got rank {rank}")
    basis = image_basis(q)
    coords = cloud.points @ (basis.T @ q).T
    return PointCloud(coords, {**cloud.provenance, "projection": q.tolist()})


@dataclass
class BoxCountReport:
    levels: list
    scales: list
    counts: list
    window: list
    slope: float
    intercept: float
    points: int

    def as_dict(self) -> dict:
        return {
            "levels": self.levels,
            "scales": self.scales,
            "counts": self.counts,
            "window": self.window,
            "slope": self.slope,
            "intercept": self.intercept,
            "points": self.points,
            "retention": f"counts <= points/{RETAIN_FRACTION}",
        }


def normalise_unit_square(points: np.ndarray) -> np.ndarray:
    """Translate and isotropically scale points into ``[0, 1]^2``."""
    lo = points.min(axis=0)
    span = float((points.max(axis=0) - lo).max())
    if span == 0.0:
        raise EstimationError("all points coincide; nothing to count")
    return (points - lo) / span


def box_count(cloud: PointCloud, finest_level: int = 12) -> BoxCountReport:
    """Occupied dyadic boxes of side ``2^-j`` for ``j = 3..finest_level`` and a least-squares slope.

    Only scales with at most ``points/100`` occupied boxes enter the fit; finer
    scales are starved of samples and bias the slope low.
    """
    if cloud.dim != 2:
        raise ShapeError(f"box counting needs a planar cloud, got dimension {cloud.dim}")
    if not MIN_BOX_LEVEL <= finest_level <= MAX_BOX_LEVEL:
        raise DomainError(f"finest_level must lie in {MIN_BOX_LEVEL}..{MAX_BOX_LEVEL}")
    u = normalise_unit_square(cloud.points)
    n = len(cloud)
    levels = list(range(MIN_BOX_LEVEL, finest_level + 1))
    counts = []
    for j in levels:
        side = 1 << j
        idx = np.minimum((u * side).astype(np.int64), side - 1)
        counts.append(int(np.unique(idx[:, 0] * side + idx[:, 1]).size))
    window = [i for i, c in enumerate(counts) if c <= n / RETAIN_FRACTION]
    if len(window) < 3:
        raise EstimationError(
            f"only {len(window)} scales have at most {n // RETAIN_FRACTION} occupied boxes; sample more points"
        )
    x = np.array([levels[i] for i in window], dtype=float) * np.log(2.0)
    y = np.log(np.array([counts[i] for i in window], dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    return BoxCountReport(
        levels=levels,
        scales=[2.0**-j for j in levels],
        counts=counts,
        window=window,
        slope=float(slope),
        intercept=float(intercept),
        points=n,
    )


@dataclass(frozen=True)
class ImageSpec:
    """Raster size, data rectangle ``(xmin, xmax, ymin, ymax)`` and density mapping (``log`` or ``linear``)."""

    width: int
    height: int
    bounds: tuple
    mapping: str = "log"

    def __post_init__(self):
        if int(self.width) < MIN_IMAGE_SIDE or int(self.height) < MIN_IMAGE_SIDE:
            raise DomainError(f"image sides must be at least {MIN_IMAGE_SIDE} pixels")
        b = tuple(float(x) for x in self.bounds)
        if len(b) != 4 or not all(np.isfinite(b)) or not (b[1] > b[0] and b[3] > b[2]):
            raise DomainError(f"degenerate image bounds {self.bounds}")
        if self.mapping not in ("log", "linear"):
            raise DomainError(f"unknown density mapping {self.mapping!r}")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "bounds", b)

    @classmethod
    def fit(cls, cloud: PointCloud, width: int = 512, height: Optional[int] = None, margin: float = 0.02, mapping="log"):
        """Bounds enclosing the cloud with a relative margin; equal aspect when ``height`` is omitted."""
        lo, hi = cloud.points.min(axis=0), cloud.points.max(axis=0)
        span = hi - lo
        if np.any(span <= 0):
            raise DomainError("cloud has zero extent along an axis")
        pad = margin * span
        lo, hi = lo - pad, hi + pad
        if height is None:
            height = max(MIN_IMAGE_SIDE, int(round(width * (hi[1] - lo[1]) / (hi[0] - lo[0]))))
        return cls(width, height, (lo[0], hi[0], lo[1], hi[1]), mapping)


def rasterise(cloud: PointCloud, spec: ImageSpec) -> np.ndarray:
    """Grey levels ``(height, width)`` as uint8: dark where dense, white where empty; row 0 is the top."""
    if cloud.dim != 2:
        raise ShapeError(f"rendering needs a planar cloud, got dimension {cloud.dim}")
    xmin, xmax, ymin, ymax = spec.bounds
    x, y = cloud.points[:, 0], cloud.points[:, 1]
    col = np.floor((x - xmin) / (xmax - xmin) * spec.width).astype(np.int64)
    row = np.floor((ymax - y) / (ymax - ymin) * spec.height).astype(np.int64)
    inside = (col >= 0) & (col < spec.width) & (row >= 0) & (row < spec.height)
    hits = np.bincount(row[inside] * spec.width + col[inside], minlength=spec.width * spec.height)
    hits = hits.reshape(spec.height, spec.width).astype(float)
    top = hits.max()
    if top == 0:
        density = hits
    elif spec.mapping == "log":
        density = np.log1p(hits) / np.log1p(top)
    else:
        density = hits / top
    return (255 - np.rint(255 * density)).astype(np.uint8)


def write_pgm(pixels: np.ndarray, path) -> Path:
    path = Path(path)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels, dtype=np.uint8).tobytes())
    return path


def render(cloud: PointCloud, spec: ImageSpec, path) -> np.ndarray:
    """Write the density bitmap to ``path`` (PGM, or PNG when the suffix is ``.png``); return the pixels."""
    pixels = rasterise(cloud, spec)
    path = Path(path)
    if path.suffix.lower() == ".png":
        try:
            from PIL import Image
        except ImportError as exc:
            raise ImportError("PNG output needs Pillow; install the 'png' extra or use a .pgm path") from exc
        Image.fromarray(pixels, mode="L").save(path)
    else:
        write_pgm(pixels, path)
    return pixels
