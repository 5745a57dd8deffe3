"""Point clouds, distance networks, simplex sampling, occlusion masks and file formats."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import (
    AllPointsRemoved,
    BadMassColumn,
    DataError,
    EmptyFile,
    ParseError,
    SchemaError,
    ValidationError,
)
from .network import Network, SimplexWeights, validate_network

MASS_HEADERS = ("mass", "masses", "weight", "weights", "p", "q")


@dataclass(frozen=True)
class PointCloud:
    coords: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        if c.ndim != 2 or c.shape[0] == 0:
            raise ValidationError(f"coords must be a non-empty (M, d) array, got shape {c.shape}")
        if self.masses is None:
            m = np.full(c.shape[0], 1.0 / c.shape[0])
        else:
            m = np.array(self.masses, dtype=float).ravel()
        if m.size != c.shape[0]:
            raise ValidationError("one mass per point is required")
        if not np.all(np.isfinite(c)) or not np.all(np.isfinite(m)):
            raise ValidationError("coordinates and masses must be finite")
        if np.any(m <= 0):
            raise ValidationError("point masses must be > 0")
        m = m / m.sum()
        c.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "masses", m)

    @classmethod
    def uniform(cls, coords) -> "PointCloud":
        return cls(coords, None)

    @property
    def size(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_point_cloud(path, mass_column: bool | None = None) -> PointCloud:
    """Read a CSV point cloud with 2 or 3 coordinate columns.

    A first line whose first token is not numeric is taken as a header. The
    last column holds masses when `mass_column` is true, or, by default, when
    the header names it ``mass``/``weight``. Masses are renormalized.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(text.splitlines())) if r and any(t.strip() for t in r)]
    if not rows:
        raise EmptyFile(f"{path} contains no data")
    header = None
    if not _is_number(rows[0][1][0].strip()):
        header = [t.strip().lower() for t in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise EmptyFile(f"{path} has a header but no data rows")
    if mass_column is None:
        mass_column = header is not None and header[-1] in MASS_HEADERS
    width = len(rows[0][1])
    values = []
    for lineno, row in rows:
        if len(row) != width:
            raise ParseError(f"{path}:{lineno}: expected {width} columns, found {len(row)}")
        try:
            values.append([float(t) for t in row])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: non-numeric value ({exc})") from exc
    data = np.array(values)
    if not np.all(np.isfinite(data)):
        raise ParseError(f"{path}: non-finite value")
    if mass_column:
        coords, masses = data[:, :-1], data[:, -1]
        if np.any(masses <= 0):
            bad = rows[int(np.argmax(masses <= 0))][0]
            raise BadMassColumn(f"{path}:{bad}: masses must be > 0")
    else:
        coords, masses = data, None
    if coords.shape[1] not in (2, 3):
        raise ParseError(f"{path}: expected 2 or 3 coordinate columns, found {coords.shape[1]}")
    return PointCloud(coords, masses)


def save_point_cloud(pc: PointCloud, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(pc.dim)] + ["mass"])
        for c, m in zip(pc.coords, pc.masses):
            w.writerow([repr(float(v)) for v in c] + [repr(float(m))])


def pairwise_distance_network(pc: PointCloud) -> Network:
    """Euclidean distance matrix of the cloud, with the cloud's masses."""
    if pc.size == 1:
        D = np.zeros((1, 1))
    else:
        D = squareform(pdist(pc.coords))
    return validate_network(D, pc.masses)


def sample_simplex_dirichlet(S: int, seed=0) -> SimplexWeights:
    """Uniform sample from the probability simplex (Dirichlet with unit parameters)."""
    if S < 1:
        raise ValidationError("S must be >= 1")
    if S == 1:
        return SimplexWeights(np.ones(1))
    return SimplexWeights(np.random.default_rng(seed).dirichlet(np.ones(S)))


@dataclass(frozen=True)
class Ball:
    """Closed ball (disc in 2-D, sphere in 3-D)."""

    center: tuple
    radius: float

    def contains(self, coords: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        if c.size != coords.shape[1]:
            raise ValidationError("mask dimension does not match the cloud")
        return np.linalg.norm(coords - c, axis=1) <= self.radius


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box."""

    lower: tuple
    upper: tuple

    def contains(self, coords: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.size != coords.shape[1] or hi.size != coords.shape[1]:
            raise ValidationError("mask dimension does not match the cloud")
        return np.all((coords >= lo) & (coords <= hi), axis=1)


def parse_mask(text: str):
    """Parse ``circle:cx,cy[,cz],r`` / ``sphere:...`` or ``box:lo1,..,lod,hi1,..,hid``."""
    try:
        kind, _, body = text.partition(":")
        nums = [float(t) for t in body.split(",") if t.strip()]
    except ValueError as exc:
        raise ParseError(f"bad mask {text!r}: {exc}") from exc
    kind = kind.strip().lower()
    if kind in ("circle", "ball", "sphere") and len(nums) in (3, 4):
        return Ball(tuple(nums[:-1]), nums[-1])
    if kind == "box" and len(nums) in (4, 6):
        d = len(nums) // 2
        return Box(tuple(nums[:d]), tuple(nums[d:]))
    raise ParseError(f"bad mask {text!r}")


def occlude(pc: PointCloud, mask) -> PointCloud:
    """Remove the points inside `mask` and renormalize the remaining masses."""
    if mask is None:
        return pc
    if isinstance(mask, str):
        mask = parse_mask(mask)
    keep = ~mask.contains(pc.coords)
    if not np.any(keep):
        raise AllPointsRemoved("the mask removes every point")
    return PointCloud(pc.coords[keep], pc.masses[keep])


def network_to_dict(net: Network) -> dict:
    return {"size": int(net.size), "weights": net.weights.tolist(), "masses": net.masses.tolist()}


def network_from_dict(obj) -> Network:
    if not isinstance(obj, dict) or not {"weights", "masses"} <= set(obj):
        raise SchemaError("network JSON needs 'weights' and 'masses'")
    try:
        W = np.array(obj["weights"], dtype=float)
        m = np.array(obj["masses"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"network arrays are malformed: {exc}") from exc
    if "size" in obj and (W.ndim != 2 or obj["size"] != W.shape[0]):
        raise SchemaError(f"'size' is {obj['size']} but weights have shape {W.shape}")
    try:
        return validate_network(W, m)
    except ValidationError as exc:
        raise SchemaError(str(exc)) from exc


def save_network(net: Network, path) -> None:
    """Write the canonical JSON form; floats round-trip exactly."""
    Path(path).write_text(json.dumps(network_to_dict(net)) + "\n")


def load_network(path) -> Network:
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    return network_from_dict(obj)


def lambda_result_dict(lam, residual: float, normalized_residual: float, method: str, seed: int) -> dict:
    return {
        "lambda": [float(v) for v in np.asarray(lam, dtype=float)],
        "residual": float(residual),
        "normalized_residual": float(normalized_residual),
        "method": method,
        "seed": int(seed),
    }


def load_matrix_csv(path) -> Network:
    """Square weight matrix stored as CSV, with uniform node masses."""
    try:
        W = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot parse matrix CSV {path}: {exc}") from exc
    if W.size == 0:
        raise EmptyFile(f"{path} contains no data")
    return Network.uniform(W)


def load_any_network(path, as_network: bool = False) -> Network:
    """Load a network from JSON, or from CSV.

    A CSV path is read as a point cloud and turned into its distance network,
    unless `as_network` is set, in which case it is read as a square weight
    matrix with uniform masses.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if as_network:
            return load_matrix_csv(path)
        return pairwise_distance_network(load_point_cloud(path))
    return load_network(path)


__all__ = [
    "PointCloud",
    "Ball",
    "Box",
    "DataError",
    "load_point_cloud",
    "save_point_cloud",
    "pairwise_distance_network",
    "sample_simplex_dirichlet",
    "parse_mask",
    "occlude",
    "save_network",
    "load_network",
    "load_any_network",
    "load_matrix_csv",
    "network_to_dict",
    "network_from_dict",
    "lambda_result_dict",
]
