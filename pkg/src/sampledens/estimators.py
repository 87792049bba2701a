"""Histogram and frequency polygon density estimates on a regular grid.

Counts live in a sparse structure: only occupied bins are stored and every
other bin reads as height zero. The frequency polygon interpolates linearly
between histogram heights at consecutive bin centers, ramping down to zero
next to the outermost occupied bins.
"""

from __future__ import annotations

import io
import math
from typing import Callable, TextIO

import numpy as np
from numpy.typing import ArrayLike

from .errors import InvalidInputError, UnsupportedDimensionError
from .grid import Partition

DensityFunction = Callable[[np.ndarray], np.ndarray]


class _SparseIndex:
    """Sorted sparse set of bin indices with vectorised membership lookup."""

    def __init__(self, keys: np.ndarray):
        self.keys = keys
        self._dict = None
        if len(keys) == 0:
            self.lo = self.shape = self.linear = None
            return
        self.lo = keys.min(axis=0)
        self.shape = tuple(int(s) for s in keys.max(axis=0) - self.lo + 1)
        if math.prod(self.shape) >= 2**62:
            self._dict = {tuple(k): i for i, k in enumerate(keys.tolist())}
            self.linear = None
        else:
            # keys are lexicographically sorted, so C-order raveling keeps them sorted
            self.linear = np.ravel_multi_index(tuple((keys - self.lo).T), self.shape)

    def find(self, idx: np.ndarray) -> np.ndarray:
        """Row positions of ``idx`` in ``keys``; -1 where absent."""
        out = np.full(len(idx), -1, dtype=np.int64)
        if self.lo is None:
            return out
        if self._dict is not None:
            for i, row in enumerate(idx.tolist()):
                out[i] = self._dict.get(tuple(row), -1)
            return out
        rel = idx - self.lo
        inside = np.all((rel >= 0) & (rel < np.asarray(self.shape)), axis=1)
        if not np.any(inside):
            return out
        lin = np.ravel_multi_index(tuple(rel[inside].T), self.shape)
        pos = np.searchsorted(self.linear, lin)
        pos = np.minimum(pos, len(self.linear) - 1)
        hit = self.linear[pos] == lin
        found = np.where(hit, pos, -1)
        out[np.flatnonzero(inside)] = found
        return out


def _sorted_unique_rows(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if idx.shape[1] == 1:
        keys, counts = np.unique(idx[:, 0], return_counts=True)
        return keys.reshape(-1, 1), counts
    return np.unique(idx, axis=0, return_counts=True)


class BinnedDensity:
    """Piecewise-constant function with arbitrary heights on occupied bins.

    This is the common base of :class:`HistogramEstimate` and of the exact
    expectation of a histogram used by the risk computations.
    """

    def __init__(self, partition: Partition, keys: ArrayLike, heights: ArrayLike):
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, partition.dim)
        heights = np.asarray(heights, dtype=np.float64).reshape(-1)
        if len(keys) != len(heights):
            raise InvalidInputError("keys and heights must have the same length")
        if len(keys) > 1:
            order = np.lexsort(keys.T[::-1])
            keys, heights = keys[order], heights[order]
            if np.any(np.all(keys[1:] == keys[:-1], axis=1)):
                raise InvalidInputError("duplicate bin index")
        if np.any(heights < 0) or not np.all(np.isfinite(heights)):
            raise InvalidInputError("heights must be finite and nonnegative")
        keys.setflags(write=False)
        heights.setflags(write=False)
        self.partition = partition
        self.keys = keys
        self.heights = heights
        self._index = _SparseIndex(keys)

    @property
    def dim(self) -> int:
        return self.partition.dim

    @property
    def panel_partition(self) -> Partition:
        """Grid on whose cells the estimate is a polynomial."""
        return self.partition

    def height_of(self, j: ArrayLike) -> float:
        idx = np.asarray(j, dtype=np.int64).reshape(1, self.dim)
        pos = self._index.find(idx)[0]
        return float(self.heights[pos]) if pos >= 0 else 0.0

    def heights_at(self, idx: np.ndarray) -> np.ndarray:
        """Heights of the bins listed row-wise in ``idx`` (zero when unoccupied)."""
        pos = self._index.find(np.asarray(idx, dtype=np.int64).reshape(-1, self.dim))
        out = np.zeros(len(pos))
        hit = pos >= 0
        out[hit] = self.heights[pos[hit]]
        return out

    def __call__(self, x: ArrayLike) -> np.ndarray:
        return self.heights_at(self.partition.bin_indices(x))

    def integral(self) -> float:
        return math.fsum((self.heights * self.partition.volume).tolist())


class HistogramEstimate(BinnedDensity):
    """Fitted histogram: occupied-bin counts together with the sample size."""

    def __init__(self, partition: Partition, keys: ArrayLike, counts: ArrayLike, sample_count: int):
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, partition.dim)
        counts = np.asarray(counts, dtype=np.int64).reshape(-1)
        if sample_count < 1:
            raise InvalidInputError("sample_count must be positive")
        if np.any(counts < 0):
            raise InvalidInputError("counts must be nonnegative")
        if int(counts.sum()) != sample_count:
            raise InvalidInputError(
                f"counts sum to {int(counts.sum())}, expected sample_count={sample_count}"
            )
        if len(keys) == len(counts) and len(keys) > 1:
            order = np.lexsort(keys.T[::-1])
            keys, counts = keys[order], counts[order]
        super().__init__(partition, keys, counts / (sample_count * partition.volume))
        counts.setflags(write=False)
        self.counts_array = counts
        self.sample_count = int(sample_count)

    @property
    def counts(self) -> dict[tuple[int, ...], int]:
        return {tuple(k): int(c) for k, c in zip(self.keys.tolist(), self.counts_array)}

    def count_of(self, j: ArrayLike) -> int:
        idx = np.asarray(j, dtype=np.int64).reshape(1, self.dim)
        pos = self._index.find(idx)[0]
        return int(self.counts_array[pos]) if pos >= 0 else 0


class FrequencyPolygonEstimate:
    """Continuous piecewise-linear interpolation of a one-dimensional histogram.

    On ``[c_j, c_{j+1})`` the value is
    ``((x - c_j)/h) * f_{j+1} + ((c_{j+1} - x)/h) * f_j``.
    """

    def __init__(self, base: BinnedDensity):
        if base.dim != 1:
            raise UnsupportedDimensionError("frequency polygons are defined for dim = 1 only")
        self.base = base
        self.partition = base.partition
        self._pieces = base.partition.shifted(0.5 * base.partition.bin_width)

    dim = 1

    @property
    def panel_partition(self) -> Partition:
        # linear between consecutive centres, kinked at each centre
        return self._pieces

    def __call__(self, x: ArrayLike) -> np.ndarray:
        pts = self.partition.as_points(x)
        xs = pts[:, 0]
        if not np.all(np.isfinite(xs)):
            raise InvalidInputError("coordinates must be finite")
        h = self.partition.bin_width
        origin = self.partition.origin[0]
        j = np.floor((xs - origin) / h - 0.5)
        # piece boundaries must agree with the centres used below, to the ulp
        j -= origin + (j + 0.5) * h > xs
        j += origin + (j + 1.5) * h <= xs
        j = j.astype(np.int64)
        c_j = origin + (j + 0.5) * h
        c_next = origin + (j + 1.5) * h
        f_j = self.base.heights_at(j.reshape(-1, 1))
        f_next = self.base.heights_at((j + 1).reshape(-1, 1))
        out = ((xs - c_j) / h) * f_next + ((c_next - xs) / h) * f_j
        # (c_next - c_j)/h can round below 1; centres return the height exactly
        at_center = xs == c_j
        out[at_center] = f_j[at_center]
        return out

    def integral(self) -> float:
        """Sum of trapezoids over every pair of consecutive centres, zero tails included."""
        occupied = self.base.keys[:, 0]
        left = np.union1d(occupied, occupied - 1)
        f_left = self.base.heights_at(left.reshape(-1, 1))
        f_right = self.base.heights_at((left + 1).reshape(-1, 1))
        h = self.partition.bin_width
        return math.fsum((h * (f_left + f_right) / 2).tolist())


Estimate = BinnedDensity | FrequencyPolygonEstimate


def _samples_array(p: Partition, samples: ArrayLike) -> np.ndarray:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        raise InvalidInputError("samples must be nonempty")
    if arr.ndim == 2 and arr.shape[1] != p.dim:
        raise InvalidInputError(f"samples have dimension {arr.shape[1]}, partition has {p.dim}")
    if arr.ndim > 2 or (arr.ndim <= 1 and p.dim != 1 and arr.size != p.dim):
        raise InvalidInputError(f"samples must be an (n, {p.dim}) array")
    return p.as_points(arr)


def fit_histogram(p: Partition, samples: ArrayLike) -> HistogramEstimate:
    """Histogram with heights ``count_j / (n h^d)``."""
    pts = _samples_array(p, samples)
    keys, counts = _sorted_unique_rows(p.bin_indices(pts))
    return HistogramEstimate(p, keys, counts, len(pts))


def fit_frequency_polygon(p: Partition, samples: ArrayLike) -> FrequencyPolygonEstimate:
    if p.dim != 1:
        raise UnsupportedDimensionError("frequency polygons are defined for dim = 1 only")
    return FrequencyPolygonEstimate(fit_histogram(p, samples))


def eval_histogram(e: BinnedDensity, x: ArrayLike) -> np.ndarray | float:
    out = e(x)
    return float(out[0]) if np.ndim(x) == 0 or (e.dim > 1 and np.ndim(x) == 1) else out


def eval_frequency_polygon(e: FrequencyPolygonEstimate, x: ArrayLike) -> np.ndarray | float:
    out = e(x)
    return float(out[0]) if np.ndim(x) == 0 else out


def integral_of(e: Estimate) -> float:
    return e.integral()


def as_box(domain, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalise ``(lower, upper)`` with scalar or per-axis bounds."""
    lower, upper = domain
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (dim,)).copy()
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (dim,)).copy()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise InvalidInputError("domain bounds must be finite")
    if np.any(hi <= lo):
        raise InvalidInputError("domain has zero volume")
    return lo, hi


class PanelQuadrature:
    """Tensor Gauss-Legendre rule on every grid cell clipped to a box.

    Each cell gets its own nodes so kinks at cell edges never fall inside a
    panel. Reusable across estimates sharing the same ``panel_partition``.
    """

    def __init__(self, panels: Partition, domain, order: int = 5):
        if order < 2:
            raise InvalidInputError("quadrature order must be at least 2")
        lo, hi = as_box(domain, panels.dim)
        t, w = np.polynomial.legendre.leggauss(order)
        axis_nodes, axis_weights = [], []
        for k, span in enumerate(panels.index_span(lo, hi)):
            a = np.maximum(lo[k], panels.origin[k] + span * panels.bin_width)
            b = np.minimum(hi[k], panels.origin[k] + (span + 1) * panels.bin_width)
            keep = b > a
            a, b = a[keep], b[keep]
            mid, half = (a + b) / 2, (b - a) / 2
            axis_nodes.append((mid[:, None] + half[:, None] * t).ravel())
            axis_weights.append((half[:, None] * w).ravel())
        grids = np.meshgrid(*axis_nodes, indexing="ij")
        wgrids = np.meshgrid(*axis_weights, indexing="ij")
        self.nodes = np.stack([g.ravel() for g in grids], axis=1)
        self.weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
        self.panels = panels
        self.domain = (lo, hi)
        self.order = order

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def l2_distance_sq(
    e: Estimate,
    f: DensityFunction,
    domain,
    quad_order: int = 5,
    quadrature: PanelQuadrature | None = None,
) -> float:
    """Integrated squared difference between an estimate and a density over ``domain``."""
    if quadrature is None:
        quadrature = PanelQuadrature(e.panel_partition, domain, quad_order)
    diff = e(quadrature.nodes) - np.asarray(f(quadrature.nodes), dtype=float)
    return max(quadrature.integrate(diff * diff), 0.0)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_histogram(e: HistogramEstimate, stream: TextIO) -> None:
    """Write the occupied bins as a ``#``-prefixed metadata line plus CSV rows."""
    p = e.partition
    origin = ",".join(_fmt(v) for v in p.origin)
    stream.write(f"# n={e.sample_count} h={_fmt(p.bin_width)} d={p.dim} origin={origin}\n")
    stream.write(",".join(f"j_{k + 1}" for k in range(p.dim)) + ",count\n")
    for key, count in zip(e.keys.tolist(), e.counts_array.tolist()):
        stream.write(",".join(str(v) for v in key) + f",{count}\n")


def histogram_to_text(e: HistogramEstimate) -> str:
    buf = io.StringIO()
    write_histogram(e, buf)
    return buf.getvalue()


def read_histogram(stream: TextIO | str) -> HistogramEstimate:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    meta = None
    header_seen = False
    keys, counts = [], []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if meta is None:
                meta = dict(tok.split("=", 1) for tok in line[1:].split())
            continue
        if not header_seen:
            header_seen = True
            continue
        parts = line.split(",")
        try:
            keys.append([int(v) for v in parts[:-1]])
            counts.append(int(parts[-1]))
        except ValueError as exc:
            raise InvalidInputError(f"row {lineno}: {exc}") from None
    if meta is None:
        raise InvalidInputError("missing '# n=... h=... d=... origin=...' metadata line")
    dim = int(meta["d"])
    origin = [float(v) for v in meta["origin"].split(",")]
    p = Partition(dim, float(meta["h"]), origin)
    return HistogramEstimate(p, np.array(keys, dtype=np.int64).reshape(-1, dim), counts, int(meta["n"]))
