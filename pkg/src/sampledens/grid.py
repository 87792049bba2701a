"""Regular hypercube partitions of R^d and bin-index arithmetic.

Bins are half-open products ``[origin + j*h, origin + (j+1)*h)`` on every
axis, so a point lying exactly on an edge belongs to the bin on its right.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from .errors import InvalidInputError

# |x|/h beyond this cannot be represented as an int64 index with headroom
_MAX_INDEX = 2.0**62


@dataclass(frozen=True)
class Partition:
    """Regular grid of hypercubes with edge length ``bin_width``.

    Parameters
    ----------
    dim : int
        Dimension ``d`` of the sample space.
    bin_width : float
        Edge length ``h`` of every bin.
    origin : array_like, optional
        Left edge of bin 0 on each axis. Defaults to zeros.
    """

    dim: int
    bin_width: float
    origin: np.ndarray = field(default=None)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidInputError(f"dim must be a positive integer, got {self.dim!r}")
        h = float(self.bin_width)
        if not np.isfinite(h) or h <= 0:
            raise InvalidInputError(f"bin_width must be positive and finite, got {self.bin_width!r}")
        if self.origin is None:
            origin = np.zeros(self.dim)
        else:
            origin = np.array(self.origin, dtype=np.float64).reshape(-1)
            if origin.size == 1 and self.dim > 1:
                origin = np.full(self.dim, origin[0])
        if origin.shape != (self.dim,) or not np.all(np.isfinite(origin)):
            raise InvalidInputError(f"origin must be {self.dim} finite coordinates")
        origin.setflags(write=False)
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "bin_width", h)
        object.__setattr__(self, "origin", origin)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.bin_width == other.bin_width
            and np.array_equal(self.origin, other.origin)
        )

    def __hash__(self):
        return hash((self.dim, self.bin_width, tuple(self.origin)))

    @property
    def volume(self) -> float:
        return self.bin_width**self.dim

    def shifted(self, offset: ArrayLike) -> "Partition":
        """Same grid with the origin moved by ``offset`` (scalar or per axis)."""
        return Partition(self.dim, self.bin_width, self.origin + np.asarray(offset, dtype=float))

    def as_points(self, x: ArrayLike) -> np.ndarray:
        """Coerce ``x`` to an ``(m, dim)`` float array.

        A scalar or flat vector is read as a list of points when ``dim == 1``
        and as a single point otherwise.
        """
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1) if self.dim == 1 else arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise InvalidInputError(
                f"expected points of dimension {self.dim}, got array of shape {np.shape(x)}"
            )
        return arr

    def bin_indices(self, points: ArrayLike) -> np.ndarray:
        """Vectorised :func:`bin_of`: ``(m, dim)`` points to ``(m, dim)`` int64 indices."""
        pts = self.as_points(points)
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("coordinates must be finite")
        h = self.bin_width
        scaled = (pts - self.origin) / h
        if np.any(np.abs(scaled) >= _MAX_INDEX):
            raise InvalidInputError("coordinate too far from origin for a 64-bit bin index")
        j = np.floor(scaled)
        # floor of the rounded quotient can disagree with origin + j*h by one ulp
        lower = self.origin + j * h
        j -= lower > pts
        j += self.origin + (j + 1) * h <= pts
        return j.astype(np.int64)

    def bin_of(self, x: ArrayLike) -> tuple[int, ...]:
        """Index ``j`` of the bin containing the single point ``x``."""
        arr = np.asarray(x, dtype=np.float64).reshape(-1)
        if arr.size != self.dim:
            raise InvalidInputError(f"point must have {self.dim} coordinates, got {arr.size}")
        return tuple(int(v) for v in self.bin_indices(arr.reshape(1, -1))[0])

    def center_of(self, j: ArrayLike) -> np.ndarray:
        idx = self._index(j)
        return self.origin + (idx + 0.5) * self.bin_width

    def bin_range(self, j: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners of bin ``j``; the bin is ``[lower, upper)``."""
        idx = self._index(j)
        return self.origin + idx * self.bin_width, self.origin + (idx + 1) * self.bin_width

    def _index(self, j: ArrayLike) -> np.ndarray:
        idx = np.asarray(j, dtype=np.int64).reshape(-1)
        if idx.size != self.dim:
            raise InvalidInputError(f"bin index must have {self.dim} components, got {idx.size}")
        return idx.astype(np.float64)

    def index_span(self, lower: ArrayLike, upper: ArrayLike) -> list[np.ndarray]:
        """Per-axis arrays of the bin indices meeting the box ``[lower, upper]``."""
        lo = np.broadcast_to(np.asarray(lower, dtype=float), (self.dim,))
        hi = np.broadcast_to(np.asarray(upper, dtype=float), (self.dim,))
        first = self.bin_indices(lo.reshape(1, -1))[0]
        last = self.bin_indices(hi.reshape(1, -1))[0]
        spans = []
        for k in range(self.dim):
            stop = last[k]
            # a box ending exactly on an edge does not reach into the next bin
            if self.origin[k] + stop * self.bin_width >= hi[k] and stop > first[k]:
                stop -= 1
            spans.append(np.arange(first[k], stop + 1, dtype=np.int64))
        return spans


def bin_of(p: Partition, x: ArrayLike) -> tuple[int, ...]:
    return p.bin_of(x)


def center_of(p: Partition, j: ArrayLike) -> np.ndarray:
    return p.center_of(j)


def bin_range(p: Partition, j: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    return p.bin_range(j)
