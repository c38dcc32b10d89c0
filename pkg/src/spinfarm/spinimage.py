"""Spin-image projection, binning and accumulation.

The binning follows the printed algorithm literally: the row index is
``ceil((W/2 - beta) / B)`` (the half-width is not scaled by the bin size),
the column index is ``ceil(alpha / B)``, and the origin point itself takes
part in the accumulation loop.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, UsageError, ValidationError

DEFAULT_W = 5
DEFAULT_B = 0.1
DEFAULT_S = 2 * math.pi
DEFAULT_N_FRACTION = 0.1


@dataclass(frozen=True)
class SpinImageParams:
    W: int = DEFAULT_W
    B: float = DEFAULT_B
    S: float = DEFAULT_S

    def __post_init__(self):
        if int(self.W) != self.W or self.W < 1:
            raise ValidationError(f"W must be a positive integer, got {self.W}")
        if not self.B > 0:
            raise ValidationError(f"B must be positive, got {self.B}")
        if not 0 < self.S <= 2 * math.pi:
            raise ValidationError(f"S must lie in (0, 2pi], got {self.S}")
        if self.B > 10:
            warnings.warn(f"bin size B={self.B} is outside the usual range 0 < B <= 10",
                          stacklevel=3)


class SpinImage:
    """A ``W x W`` grid of counts generated at point ``origin_index``."""

    __slots__ = ("origin_index", "bins")

    def __init__(self, origin_index, bins):
        bins = np.asarray(bins, dtype=np.int64)
        if bins.ndim != 2 or bins.shape[0] != bins.shape[1]:
            raise ValidationError(f"spin image bins must be square, got shape {bins.shape}")
        if (bins < 0).any():
            raise ValidationError("spin image bins must be non-negative")
        self.origin_index = int(origin_index)
        self.bins = bins

    @property
    def width(self):
        return self.bins.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SpinImage):
            return NotImplemented
        return self.origin_index == other.origin_index and np.array_equal(self.bins, other.bins)

    def __repr__(self):
        return f"SpinImage(origin_index={self.origin_index}, W={self.width}, total={int(self.bins.sum())})"


@dataclass(frozen=True)
class Projection:
    beta: float
    alpha: float


def project(P, X):
    """Signed height ``beta`` along P's normal and radial distance ``alpha``."""
    d = np.asarray(X.position, dtype=np.float64) - np.asarray(P.position, dtype=np.float64)
    n = np.asarray(P.normal, dtype=np.float64)
    beta = float(n @ d)
    alpha = math.sqrt(max(0.0, float(d @ d) - beta * beta))
    return Projection(beta=beta, alpha=alpha)


def support_test(np_i, np_j, S):
    cos = float(np.dot(np_i, np_j))
    return math.acos(min(1.0, max(-1.0, cos))) <= S


def bin_indices(proj, params):
    """Return ``(k, l)`` for an in-bounds projection, else ``None``."""
    k = math.ceil((params.W / 2 - proj.beta) / params.B)
    l = math.ceil(proj.alpha / params.B)
    if 0 <= k < params.W and 0 <= l < params.W:
        return k, l
    return None


def generate_spin_image(cloud, i, params):
    """Accumulate the spin image at point ``i`` over every point of the cloud."""
    if not 0 <= i < cloud.M:
        raise UsageError(f"point index {i} out of range for M={cloud.M}")
    W, B = params.W, params.B
    p = cloud.positions[i]
    n = cloud.normals[i]

    d = cloud.positions - p
    beta = d @ n
    alpha = np.sqrt(np.maximum(0.0, np.einsum("ij,ij->i", d, d) - beta * beta))
    cos = np.clip(cloud.normals @ n, -1.0, 1.0)
    keep = np.arccos(cos) <= params.S

    k = np.ceil((W / 2 - beta) / B)
    l = np.ceil(alpha / B)
    keep &= (k >= 0) & (k < W) & (l >= 0) & (l < W)
    flat = k[keep].astype(np.int64) * W + l[keep].astype(np.int64)
    bins = np.bincount(flat, minlength=W * W).reshape(W, W)
    return SpinImage(i, bins)


def generate_range(cloud, start, end, params):
    """Images for origin indices ``[start, end)`` in index order."""
    if not 0 <= start <= end <= cloud.M:
        raise UsageError(f"invalid range [{start}, {end}) for M={cloud.M}")
    return [generate_spin_image(cloud, i, params) for i in range(start, end)]


def generate_all_sequential(cloud, N, params):
    """Serial reference: images at the first ``N`` points."""
    if not 1 <= N <= cloud.M:
        raise UsageError(f"N must satisfy 1 <= N <= M={cloud.M}, got {N}")
    return generate_range(cloud, 0, N, params)


def default_n(M, fraction=DEFAULT_N_FRACTION):
    """Number of images for a cloud of ``M`` points: ``ceil(fraction * M)``, at least 1."""
    # round first so 0.1 * 500 does not become 51 through float error
    return max(1, min(M, math.ceil(round(fraction * M, 9))))


# -- text serialization ----------------------------------------------------

def format_images(images):
    out = []
    for img in images:
        out.append(f"spinimage {img.origin_index} {img.width}")
        out.extend(" ".join(str(v) for v in row) for row in img.bins.tolist())
    return "\n".join(out) + ("\n" if out else "")


def parse_images(text):
    lines = text.splitlines()
    images = []
    pos = 0
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        header = lines[pos].split()
        if len(header) != 3 or header[0] != "spinimage":
            raise ParseError(f"expected 'spinimage <index> <W>' header, got {lines[pos]!r}",
                             line=pos + 1)
        try:
            origin, W = int(header[1]), int(header[2])
        except ValueError:
            raise ParseError(f"malformed header {lines[pos]!r}", line=pos + 1) from None
        if W < 1:
            raise ParseError(f"image width must be positive, got {W}", line=pos + 1)
        rows = []
        for r in range(W):
            lineno = pos + 2 + r
            if lineno > len(lines):
                raise ParseError("truncated spin image", line=lineno)
            try:
                row = [int(t) for t in lines[lineno - 1].split()]
            except ValueError:
                raise ParseError("malformed bin count", line=lineno) from None
            if len(row) != W:
                raise ParseError(f"expected {W} bins, got {len(row)}", line=lineno)
            rows.append(row)
        images.append(SpinImage(origin, rows))
        pos += W + 1
    return images
