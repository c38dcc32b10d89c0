"""Oriented point clouds: loading, normal estimation and synthetic shapes."""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

FORMATS = ("xyzn", "off")
SYNTH_KINDS = ("sphere", "torus", "uniform_box")

# synthetic shape dimensions, chosen so the default spin-image parameters
# (W=5, B=0.1) produce non-empty images on the torus and box
SPHERE_RADIUS = 1.0
TORUS_MAJOR = 2.0
TORUS_MINOR = 0.75
BOX_HALF_SIDE = 2.5


@dataclass(frozen=True)
class OrientedPoint:
    position: np.ndarray
    normal: np.ndarray


class PointCloud:
    """Immutable, ordered set of oriented points.

    Positions and normals are stored as read-only ``(M, 3)`` float64 arrays.
    Index order is significant: chunk ranges handed to workers refer to it.
    """

    def __init__(self, positions, normals):
        positions = np.array(positions, dtype=np.float64).reshape(-1, 3)
        normals = np.array(normals, dtype=np.float64).reshape(-1, 3)
        if positions.shape != normals.shape:
            raise ValidationError(
                f"positions {positions.shape} and normals {normals.shape} differ in shape")
        if len(positions) == 0:
            raise ValidationError("point cloud is empty")
        bad = ~np.isfinite(positions).all(axis=1) | ~np.isfinite(normals).all(axis=1)
        if bad.any():
            raise ValidationError(f"non-finite coordinate at point index {int(np.argmax(bad))}")
        normals = _normalize_rows(normals)
        positions.setflags(write=False)
        normals.setflags(write=False)
        self.positions = positions
        self.normals = normals

    @property
    def M(self):
        return len(self.positions)

    def __len__(self):
        return len(self.positions)

    def __getitem__(self, i):
        return OrientedPoint(self.positions[i], self.normals[i])

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return (np.array_equal(self.positions, other.positions)
                and np.array_equal(self.normals, other.normals))

    def __repr__(self):
        return f"PointCloud(M={self.M})"


def _normalize_rows(normals):
    lengths = np.linalg.norm(normals, axis=1)
    zero = lengths == 0.0
    if zero.any():
        raise ValidationError(
            f"zero-length normal at point index {int(np.argmax(zero))} cannot be normalized")
    # rows already unit to rounding are kept verbatim so serialization round-trips
    lengths = np.where(np.abs(lengths - 1.0) <= 1e-12, 1.0, lengths)
    return normals / lengths[:, None]


def _data_lines(text):
    """Yield (line_number, tokens) for non-blank, non-comment lines."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _floats(tokens, lineno):
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise ParseError(f"malformed number in {' '.join(tokens)!r}", line=lineno) from None
    if not all(math.isfinite(v) for v in values):
        raise ParseError("non-finite coordinate", line=lineno)
    return values


def parse_xyzn(text):
    positions, normals = [], []
    for lineno, tokens in _data_lines(text):
        if len(tokens) != 6:
            raise ParseError(f"expected 6 values, got {len(tokens)}", line=lineno)
        values = _floats(tokens, lineno)
        positions.append(values[:3])
        normals.append(values[3:])
    if not positions:
        raise ValidationError("point cloud is empty")
    return PointCloud(positions, normals)


def format_xyzn(cloud):
    """Serialize a cloud to xyzn text; ``repr`` floats round-trip exactly."""
    lines = []
    for p, n in zip(cloud.positions.tolist(), cloud.normals.tolist()):
        lines.append(" ".join(repr(v) for v in (*p, *n)))
    return "\n".join(lines) + "\n"


def parse_off(text):
    """Parse ASCII OFF with triangular faces; normals come from the mesh."""
    lines = _data_lines(text)
    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise ParseError("empty file", line=1) from None
    if tokens[0] != "OFF":
        raise ParseError(f"expected 'OFF' header, got {tokens[0]!r}", line=lineno)
    counts = tokens[1:]
    if not counts:
        try:
            lineno, counts = next(lines)
        except StopIteration:
            raise ParseError("missing vertex/face count line", line=lineno + 1) from None
    if len(counts) < 2:
        raise ParseError("count line needs vertex and face counts", line=lineno)
    try:
        n_verts, n_faces = int(counts[0]), int(counts[1])
    except ValueError:
        raise ParseError(f"malformed counts {' '.join(counts)!r}", line=lineno) from None
    if n_verts <= 0:
        raise ValidationError("point cloud is empty")

    vertices = []
    for _ in range(n_verts):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise ParseError(f"expected {n_verts} vertices, file ended", line=lineno + 1) from None
        if len(tokens) < 3:
            raise ParseError("vertex needs 3 coordinates", line=lineno)
        vertices.append(_floats(tokens[:3], lineno))

    faces = []
    for _ in range(n_faces):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise ParseError(f"expected {n_faces} faces, file ended", line=lineno + 1) from None
        try:
            idx = [int(t) for t in tokens]
        except ValueError:
            raise ParseError(f"malformed face {' '.join(tokens)!r}", line=lineno) from None
        if idx[0] != 3 or len(idx) < 4:
            raise ParseError("only triangular faces are supported", line=lineno)
        tri = idx[1:4]
        if not all(0 <= v < n_verts for v in tri):
            raise ParseError(f"face index out of range in {tri}", line=lineno)
        faces.append(tri)

    normals = compute_vertex_normals(vertices, faces)
    return PointCloud(vertices, normals)


def compute_vertex_normals(vertices, faces):
    """Area-weighted vertex normals for a triangle mesh.

    Each face contributes its un-normalized cross product (twice its area
    times the unit normal) to its three vertices; zero-area faces add
    nothing. Winding order decides orientation.

    Raises:
        ValidationError: a vertex touches no face, or all of its faces are
            degenerate.
    """
    v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if f.size and (f.min() < 0 or f.max() >= len(v)):
        raise ValidationError("face index out of range")
    incident = np.zeros(len(v), dtype=bool)
    incident[f.ravel()] = True
    if not incident.all():
        raise ValidationError(
            f"vertex {int(np.argmin(incident))} has no incident faces")

    face_normals = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    acc = np.zeros_like(v)
    for corner in range(3):
        np.add.at(acc, f[:, corner], face_normals)
    lengths = np.linalg.norm(acc, axis=1)
    if (lengths == 0.0).any():
        raise ValidationError(
            f"vertex {int(np.argmax(lengths == 0.0))} has only degenerate incident faces")
    return acc / lengths[:, None]


def load_point_cloud(path, format="xyzn"):
    """Read an oriented point cloud from ``path``.

    Args:
        path: file to read.
        format: ``"xyzn"`` (x y z nx ny nz per line) or ``"off"``.
    """
    if format not in FORMATS:
        raise ValidationError(f"unknown format {format!r}; expected one of {FORMATS}")
    text = Path(path).read_text()
    if format == "xyzn":
        return parse_xyzn(text)
    return parse_off(text)


def save_xyzn(cloud, path):
    Path(path).write_text(format_xyzn(cloud))


def synth_cloud(kind, count, seed=0):
    """Deterministic synthetic cloud.

    Sphere and torus points carry their analytic surface normals; the box
    is filled uniformly and gets random unit normals.
    """
    if kind not in SYNTH_KINDS:
        raise ValidationError(f"unknown synthetic kind {kind!r}; expected one of {SYNTH_KINDS}")
    if count < 1:
        raise ValidationError("count must be at least 1")
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)

    if kind == "sphere":
        normals = _random_unit_vectors(rng, count)
        positions = SPHERE_RADIUS * normals
    elif kind == "torus":
        u = rng.uniform(0.0, 2 * np.pi, count)
        v = rng.uniform(0.0, 2 * np.pi, count)
        ring = TORUS_MAJOR + TORUS_MINOR * np.cos(v)
        positions = np.column_stack(
            (ring * np.cos(u), ring * np.sin(u), TORUS_MINOR * np.sin(v)))
        normals = np.column_stack(
            (np.cos(v) * np.cos(u), np.cos(v) * np.sin(u), np.sin(v)))
    else:
        positions = rng.uniform(-BOX_HALF_SIDE, BOX_HALF_SIDE, (count, 3))
        normals = _random_unit_vectors(rng, count)
    return PointCloud(positions, normals)


def _random_unit_vectors(rng, count):
    while True:
        g = rng.standard_normal((count, 3))
        lengths = np.linalg.norm(g, axis=1)
        if (lengths > 0).all():
            return g / lengths[:, None]
