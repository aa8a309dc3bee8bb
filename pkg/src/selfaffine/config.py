"""
JSON configuration for an affine IFS, an optional projection and optional
Kronecker factors.

Matrices are row-major, either nested (``[[a, b], [c, d]]``) or flat
(``[a, b, c, d]``). Any number may be written as a decimal string
(``"0.325"``) so values round-trip exactly.

Example::

    {"dimension": 2,
     "maps": [{"linear": [[0.5, 0], [0, 0.5]], "translation": [0, 0]},
              {"linear": [0.5, 0, 0, 0.5], "translation": ["0.5", "0"]}],
     "projection": [[1, 0], [0, 0]],
     "labels": ["left", "right"]}

A ``"kronecker"`` section ``{"A": [...], "B": [...], "P": [[...]]}`` lists 2 x 2
factors with ``linear_i = A_i (x) B_i`` and a rank-one ``P``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, SelfAffineError
from .maps import AffineIFS, MatrixTuple

KRON_TOL = 1e-12


def _number(x, where: str) -> float:
    if isinstance(x, bool):
        raise ConfigError(f"{where}: expected a number, got {x!r}")
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, str):
        try:
            return float(x)
        except ValueError:
            pass
    raise ConfigError(f"{where}: expected a number, got {x!r}")


def parse_vector(raw, n: int, where: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != n:
        raise ConfigError(f"{where}: expected a list of {n} numbers")
    return np.array([_number(x, where) for x in raw])


def parse_matrix(raw, rows: int, cols: int, where: str) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where}: expected a matrix")
    if isinstance(raw[0], list):
        if len(raw) != rows or any(not isinstance(r, list) or len(r) != cols for r in raw):
            raise ConfigError(f"{where}: expected {rows} rows of {cols} entries")
        flat = [x for r in raw for x in r]
    else:
        if len(raw) != rows * cols:
            raise ConfigError(f"{where}: expected {rows * cols} entries in row-major order, got {len(raw)}")
        flat = raw
    return np.array([_number(x, where) for x in flat]).reshape(rows, cols)


@dataclass(frozen=True, eq=False)
class IFSConfig:
    ifs: AffineIFS
    projection: Optional[np.ndarray] = None
    labels: Optional[tuple] = None
    kron_a: Optional[MatrixTuple] = None
    kron_b: Optional[MatrixTuple] = None
    kron_p: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.ifs.dim

    def to_dict(self) -> dict:
        out = {
            "dimension": self.dim,
            "maps": [
                {"linear": a.tolist(), "translation": v.tolist()}
                for a, v in zip(self.ifs.linear.maps, self.ifs.translations)
            ],
        }
        if self.projection is not None:
            out["projection"] = self.projection.tolist()
        if self.labels is not None:
            out["labels"] = list(self.labels)
        if self.kron_a is not None:
            out["kronecker"] = {"A": self.kron_a.maps.tolist(), "B": self.kron_b.maps.tolist()}
            if self.kron_p is not None:
                out["kronecker"]["P"] = self.kron_p.tolist()
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def config_from_dict(raw) -> IFSConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    d = raw.get("dimension")
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise ConfigError("'dimension' must be a positive integer")
    maps = raw.get("maps")
    if not isinstance(maps, list) or len(maps) < 2:
        raise ConfigError("'maps' must list at least 2 maps")
    linear, shifts = [], []
    for i, m in enumerate(maps, start=1):
        if not isinstance(m, dict) or "linear" not in m:
            raise ConfigError(f"map {i}: expected an object with a 'linear' matrix")
        linear.append(parse_matrix(m["linear"], d, d, f"map {i} linear"))
        shifts.append(parse_vector(m.get("translation", [0] * d), d, f"map {i} translation"))
    try:
        ifs = AffineIFS(MatrixTuple(np.array(linear)), np.array(shifts))
    except SelfAffineError as exc:
        raise ConfigError(str(exc)) from exc
    projection = None
    if raw.get("projection") is not None:
        projection = parse_matrix(raw["projection"], d, d, "projection")
    labels = raw.get("labels")
    if labels is not None:
        if not isinstance(labels, list) or len(labels) != len(maps):
            raise ConfigError("'labels' must name every map")
        labels = tuple(str(x) for x in labels)
    kron_a = kron_b = kron_p = None
    if raw.get("kronecker") is not None:
        kron_a, kron_b, kron_p = _parse_kronecker(raw["kronecker"], ifs)
    return IFSConfig(ifs, projection, labels, kron_a, kron_b, kron_p)


def _parse_kronecker(raw, ifs: AffineIFS):
    if ifs.dim != 4 or not isinstance(raw, dict):
        raise ConfigError("'kronecker' needs a 4-dimensional system and an object with 'A' and 'B'")
    fa, fb = raw.get("A"), raw.get("B")
    if not isinstance(fa, list) or not isinstance(fb, list) or len(fa) != ifs.count or len(fb) != ifs.count:
        raise ConfigError(f"'kronecker' needs {ifs.count} factors in both 'A' and 'B'")
    a = np.array([parse_matrix(m, 2, 2, f"kronecker A[{i}]") for i, m in enumerate(fa, start=1)])
    b = np.array([parse_matrix(m, 2, 2, f"kronecker B[{i}]") for i, m in enumerate(fb, start=1)])
    for i in range(ifs.count):
        if np.abs(np.kron(a[i], b[i]) - ifs.linear.maps[i]).max() > KRON_TOL:
            raise ConfigError(f"map {i + 1} is not A[{i + 1}] (x) B[{i + 1}]")
    p = parse_matrix(raw["P"], 2, 2, "kronecker P") if raw.get("P") is not None else None
    try:
        return MatrixTuple(a), MatrixTuple(b), p
    except SelfAffineError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> IFSConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(raw)


def config_for(ifs: AffineIFS, projection=None, kron=None, labels=None) -> IFSConfig:
    """Wrap an in-memory system; ``kron`` is ``(A_tuple, B_tuple, P)``."""
    ka, kb, kp = kron if kron is not None else (None, None, None)
    proj = None if projection is None else np.asarray(projection, dtype=float)
    return config_from_dict(
        IFSConfig(ifs, proj, tuple(labels) if labels else None, ka, kb, None if kp is None else np.asarray(kp)).to_dict()
    )
