"""Brute-force ground truth used to check traces and reconstructions.

Nothing here touches the metric or tracing code: level sets come from
marching squares on a grid of function values, preimages from direct
evaluation of every grid node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, NumericalError
from .nn import forward


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned 2-D box sampled with ``resolution`` nodes per axis."""

    box: tuple
    resolution: int = 512

    def __post_init__(self):
        box = tuple(tuple(float(c) for c in side) for side in self.box)
        if len(box) != 2 or any(len(side) != 2 or side[0] >= side[1] for side in box):
            raise ConfigError(f"grid box must be ((x0, x1), (y0, y1)) with x0 < x1, got {self.box}")
        if int(self.resolution) != self.resolution or self.resolution < 2:
            raise ConfigError("grid resolution must be an integer >= 2")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "resolution", int(self.resolution))

    @property
    def xs(self):
        return np.linspace(*self.box[0], self.resolution)

    @property
    def ys(self):
        return np.linspace(*self.box[1], self.resolution)

    @property
    def cell_diagonal(self):
        dx = (self.box[0][1] - self.box[0][0]) / (self.resolution - 1)
        dy = (self.box[1][1] - self.box[1][0]) / (self.resolution - 1)
        return math.hypot(dx, dy)

    @property
    def cell_area(self):
        dx = (self.box[0][1] - self.box[0][0]) / (self.resolution - 1)
        dy = (self.box[1][1] - self.box[1][0]) / (self.resolution - 1)
        return dx * dy

    def nodes(self):
        gx, gy = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def evaluate(self, f):
        """Values of a vectorized ``f`` on the nodes, shape ``(res, res)`` indexed ``[ix, iy]``."""
        vals = np.asarray(f(self.nodes()), dtype=np.float64).reshape(self.resolution, self.resolution)
        if not np.all(np.isfinite(vals)):
            raise NumericalError("function is not finite on every grid node")
        return vals


@dataclass(frozen=True, eq=False)
class ContourSet:
    polylines: list
    level: float

    def __len__(self):
        return len(self.polylines)

    def points(self):
        if not self.polylines:
            return np.empty((0, 2))
        return np.concatenate(self.polylines)

    def segments(self):
        segs = [np.stack([pl[:-1], pl[1:]], axis=1) for pl in self.polylines if len(pl) > 1]
        if not segs:
            return np.empty((0, 2, 2))
        return np.concatenate(segs)


def model_field(model):
    """Vectorized scalar field ``pts -> N(pts)[:, 0]`` of a scalar-output model."""
    return lambda pts: forward(model, pts)[:, 0]


def fd_jacobian(f, x, h=1e-6):
    """Central-difference Jacobian of a vector function, one column per input."""
    if h <= 0:
        raise ConfigError("finite-difference step must be positive")
    x = np.array(x, dtype=np.float64).reshape(-1)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fp = np.atleast_1d(np.asarray(f(x + e), dtype=np.float64))
        fm = np.atleast_1d(np.asarray(f(x - e), dtype=np.float64))
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NumericalError(f"non-finite function value near x = {x.tolist()}")
        cols.append((fp - fm) / (2.0 * h))
    return np.column_stack(cols)


# corner order: 0 = (i, j), 1 = (i+1, j), 2 = (i+1, j+1), 3 = (i, j+1)
# edge order: 0 bottom (0-1), 1 right (1-2), 2 top (3-2), 3 left (0-3)
_EDGE_CORNERS = ((0, 1), (1, 2), (3, 2), (0, 3))


def _edge_key(i, j, e):
    if e == 0:
        return ("x", i, j)
    if e == 1:
        return ("y", i + 1, j)
    if e == 2:
        return ("x", i, j + 1)
    return ("y", i, j)


def _cell_segments(case, center_above):
    if case in (5, 10):
        # corners 0 and 2 above (5) or 1 and 3 above (10)
        isolate_02 = (case == 5) != center_above
        return [(3, 0), (1, 2)] if isolate_02 else [(0, 1), (2, 3)]
    crossing = [e for e, (a, b) in enumerate(_EDGE_CORNERS)
                if bool(case >> a & 1) != bool(case >> b & 1)]
    return [tuple(crossing)] if crossing else []


def marching_contour(f, grid, level):
    """Level set of ``f`` by marching squares on ``grid``.

    ``f`` must accept an ``(n, 2)`` array of points. Edge crossings are
    linearly interpolated; saddle cells are resolved by sampling ``f`` at the
    cell center. Closed polylines repeat their first vertex at the end.
    """
    vals = grid.evaluate(f)
    if level < vals.min() or level > vals.max():
        return ContourSet([], float(level))
    xs, ys = grid.xs, grid.ys
    above = vals > level
    case = (above[:-1, :-1].astype(np.int8)
            | above[1:, :-1] << 1
            | above[1:, 1:] << 2
            | above[:-1, 1:] << 3)
    ci, cj = np.nonzero((case != 0) & (case != 15))
    saddle = np.isin(case[ci, cj], (5, 10))
    center_above = np.zeros(len(ci), dtype=bool)
    if np.any(saddle):
        si, sj = ci[saddle], cj[saddle]
        centers = np.column_stack([(xs[si] + xs[si + 1]) / 2, (ys[sj] + ys[sj + 1]) / 2])
        center_above[saddle] = np.asarray(f(centers)) > level

    points = {}

    def crossing(key):
        pt = points.get(key)
        if pt is None:
            kind, i, j = key
            if kind == "x":
                va, vb = vals[i, j], vals[i + 1, j]
                t = (level - va) / (vb - va)
                pt = (xs[i] + t * (xs[i + 1] - xs[i]), ys[j])
            else:
                va, vb = vals[i, j], vals[i, j + 1]
                t = (level - va) / (vb - va)
                pt = (xs[i], ys[j] + t * (ys[j + 1] - ys[j]))
            points[key] = pt
        return pt

    neighbours = {}
    for n, (i, j) in enumerate(zip(ci.tolist(), cj.tolist())):
        for ea, eb in _cell_segments(int(case[i, j]), bool(center_above[n])):
            ka, kb = _edge_key(i, j, ea), _edge_key(i, j, eb)
            crossing(ka)
            crossing(kb)
            neighbours.setdefault(ka, []).append(kb)
            neighbours.setdefault(kb, []).append(ka)

    polylines = []
    visited = set()

    def walk(start):
        chain = [start]
        visited.add(start)
        cur = start
        while True:
            nxt = [k for k in neighbours[cur] if k not in visited]
            if not nxt:
                if len(chain) > 2 and start in neighbours[cur]:
                    chain.append(start)
                return chain
            cur = nxt[0]
            visited.add(cur)
            chain.append(cur)

    # open chains start at a boundary crossing, loops anywhere
    ends = [k for k, nb in neighbours.items() if len(nb) == 1]
    for key in ends + list(neighbours):
        if key not in visited:
            chain = walk(key)
            polylines.append(np.array([points[k] for k in chain]))
    return ContourSet(polylines, float(level))


def grid_preimage(f, grid, interval):
    """Grid nodes whose value lies in the closed ``interval``."""
    lo, hi = interval
    if hi < lo:
        raise ConfigError(f"empty interval [{lo}, {hi}]")
    vals = grid.evaluate(f).ravel()
    mask = (vals >= lo) & (vals <= hi)
    return grid.nodes()[mask]


def _as_points(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if len(a) == 0:
        raise ConfigError("point set is empty")
    return a


def directed_hausdorff(a, b, chunk=2048):
    """``max_{p in a} min_{q in b} |p - q|`` by brute force."""
    a, b = _as_points(a), _as_points(b)
    worst = 0.0
    for s in range(0, len(a), chunk):
        block = a[s:s + chunk]
        d2 = np.sum((block[:, None, :] - b[None, :, :]) ** 2, axis=2)
        worst = max(worst, float(np.max(np.min(d2, axis=1))))
    return math.sqrt(worst)


def hausdorff(a, b):
    """Symmetric Hausdorff distance between two finite point sets."""
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def distance_to_segments(points, segments, chunk=1024):
    """Distance of every point to the nearest segment of an ``(s, 2, d)`` array."""
    pts = _as_points(points)
    segs = np.asarray(segments, dtype=np.float64)
    if len(segs) == 0:
        raise ConfigError("no segments")
    a, b = segs[:, 0], segs[:, 1]
    ab = b - a
    denom = np.sum(ab * ab, axis=1)
    denom = np.where(denom == 0, 1.0, denom)
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        block = pts[s:s + chunk]
        ap = block[:, None, :] - a[None, :, :]
        t = np.clip(np.sum(ap * ab[None], axis=2) / denom[None], 0.0, 1.0)
        diff = ap - t[..., None] * ab[None]
        out[s:s + chunk] = np.sqrt(np.min(np.sum(diff * diff, axis=2), axis=1))
    return out


def coverage_fraction(targets, samples, radius):
    """Fraction of ``targets`` lying within ``radius`` of some point of ``samples``."""
    targets = _as_points(targets)
    tree = cKDTree(_as_points(samples))
    dist, _ = tree.query(targets, distance_upper_bound=radius)
    return float(np.mean(dist <= radius))


def covered_area(grid, samples, radius):
    """Area of the grid nodes within ``radius`` of ``samples`` (node count times cell area)."""
    nodes = grid.nodes()
    tree = cKDTree(_as_points(samples))
    dist, _ = tree.query(nodes, distance_upper_bound=radius)
    return float(np.count_nonzero(dist <= radius)) * grid.cell_area
