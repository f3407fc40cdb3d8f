"""Polygonal tracing of null curves (level sets) of a metric field.

Each step diagonalizes the metric at the current vertex and moves a fixed
distance along the null eigenvector, keeping its orientation consistent with
the previous step. Energy and a pseudolength upper bound are accumulated per
segment so the quality of the approximation can be monitored.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DegenerateMetricError, InputShapeError
from .metric import DEFAULT_TAU_REL, NULL, select_direction, spectral_decompose

HALT = "halt"
PROJECT = "project"
IGNORE = "ignore"
BOUNDARY_POLICIES = (HALT, PROJECT, IGNORE)


def as_box(box):
    """Normalize a box given as ``[(a1, b1), ...]`` to a ``(d, 2)`` array."""
    arr = np.array(box, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ConfigError(f"box must be a list of (low, high) pairs, got shape {arr.shape}")
    if np.any(arr[:, 0] >= arr[:, 1]):
        raise ConfigError("box needs low < high on every axis")
    arr.setflags(write=False)
    return arr


def in_box(p, box):
    return bool(np.all(p >= box[:, 0]) and np.all(p <= box[:, 1]))


@dataclass(frozen=True)
class TraceConfig:
    delta: float
    max_steps: int
    boundary: str = IGNORE
    hypercube: Optional[np.ndarray] = None
    tau_rel: float = DEFAULT_TAU_REL

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ConfigError(f"delta must be a positive number, got {self.delta}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 0:
            raise ConfigError(f"max_steps must be a non-negative integer, got {self.max_steps}")
        object.__setattr__(self, "max_steps", int(self.max_steps))
        if self.boundary not in BOUNDARY_POLICIES:
            raise ConfigError(
                f"boundary must be one of {', '.join(BOUNDARY_POLICIES)}, got {self.boundary!r}")
        if self.hypercube is not None:
            object.__setattr__(self, "hypercube", as_box(self.hypercube))
        elif self.boundary != IGNORE:
            raise ConfigError(f"boundary policy {self.boundary!r} needs a hypercube")
        if self.tau_rel <= 0:
            raise ConfigError("tau_rel must be positive")

    def to_dict(self):
        return {
            "delta": self.delta,
            "max_steps": self.max_steps,
            "boundary": self.boundary,
            "hypercube": None if self.hypercube is None else self.hypercube.tolist(),
            "tau_rel": self.tau_rel,
        }


@dataclass(eq=False)
class Polygonal:
    """Vertices of a traced curve with per-segment energy bookkeeping.

    ``segment_energies[k]`` belongs to the segment from ``points[k]`` to
    ``points[k + 1]``; ``cumulative_energies[k]`` is the energy up to vertex k.
    """

    points: np.ndarray
    directions: np.ndarray
    segment_energies: np.ndarray
    segment_pseudolengths: np.ndarray
    cumulative_energies: np.ndarray
    outputs: Optional[np.ndarray] = None
    projected: np.ndarray = field(default=None)
    halted_at_boundary: bool = False

    @property
    def cumulative_energy(self):
        return float(self.cumulative_energies[-1])

    @property
    def pseudolength_bound(self):
        total = 0.0
        for s in self.segment_pseudolengths:
            total += s
        return total

    @property
    def projected_steps(self):
        return int(np.count_nonzero(self.projected))

    @property
    def final_direction(self):
        return None if len(self.directions) == 0 else self.directions[-1]

    def __len__(self):
        return len(self.points)

    def max_output_drift(self):
        if self.outputs is None:
            return None
        return float(np.max(np.abs(self.outputs - self.outputs[0])))


def _segment_form(g, v):
    return float(v @ g.matrix @ v)


def segment_energy(g, v, delta):
    """Energy ``max(0, v^T g v) * delta`` of a straight segment of length ``delta``.

    The metric is frozen at the segment start; negative round-off is floored.
    """
    return max(0.0, _segment_form(g, v)) * delta


def pseudolength_bound(g, v, delta):
    """Upper bound ``sqrt(|v^T g v|) * delta`` on the pseudolength of a segment."""
    return math.sqrt(abs(_segment_form(g, v))) * delta


def apply_boundary(p, cfg):
    """Apply the boundary policy of ``cfg`` to a freshly computed vertex.

    Returns ``(point, halted)``; only the ``halt`` policy can report True.
    """
    if cfg.boundary == IGNORE or cfg.hypercube is None:
        return p, False
    box = cfg.hypercube
    if cfg.boundary == PROJECT:
        return np.clip(p, box[:, 0], box[:, 1]), False
    return p, not in_box(p, box)


def simec_trace(provider, p0, cfg, v0=None, model=None):
    """Trace the null curve of ``provider`` through ``p0``.

    ``v0`` only fixes the orientation of the first step; by default the
    canonically signed null eigenvector at ``p0`` is followed. Returns a
    Polygonal with ``cfg.max_steps + 1`` vertices unless the trace halted at
    the boundary first (the exterior vertex is not kept). Outputs are
    recorded when the provider wraps a model.
    """
    p = np.array(p0, dtype=np.float64)
    if p.shape != (provider.dim,):
        raise InputShapeError(f"start point of shape {p.shape} for a {provider.dim}-d field")
    if cfg.boundary != IGNORE and not in_box(p, cfg.hypercube):
        raise ConfigError(f"start point {p.tolist()} lies outside the hypercube")
    if model is None:
        model = getattr(provider, "model", None)

    prev = None if v0 is None else np.asarray(v0, dtype=np.float64)
    points = [p]
    outputs = []
    directions = []
    seg_e = []
    seg_pl = []
    cum = [0.0]
    projected = [False]
    halted = False
    energy = 0.0

    for k in range(cfg.max_steps):
        g, out = provider.evaluate(p)
        if model is not None:
            outputs.append(out)
        try:
            decomp = spectral_decompose(g, cfg.tau_rel)
            v = select_direction(decomp, NULL, prev)
        except DegenerateMetricError as exc:
            raise DegenerateMetricError(str(exc), step=k) from None
        q = p + cfg.delta * v
        q, halted = apply_boundary(q, cfg)
        if halted:
            break
        was_projected = False
        length = cfg.delta
        u = v
        if cfg.boundary == PROJECT:
            d = q - p
            length = float(np.linalg.norm(d))
            was_projected = not np.array_equal(q, p + cfg.delta * v)
            if was_projected:
                u = d / length if length > 0 else v
        e = segment_energy(g, u, length)
        energy += e
        seg_e.append(e)
        seg_pl.append(pseudolength_bound(g, u, length))
        cum.append(energy)
        directions.append(v)
        projected.append(was_projected)
        points.append(q)
        prev = v
        p = q

    if model is not None and len(outputs) < len(points):
        outputs.append(model(points[-1]))

    d = len(p)
    return Polygonal(
        points=np.array(points).reshape(-1, d),
        directions=np.array(directions).reshape(-1, d),
        segment_energies=np.array(seg_e, dtype=np.float64),
        segment_pseudolengths=np.array(seg_pl, dtype=np.float64),
        cumulative_energies=np.array(cum),
        outputs=None if model is None else np.array(outputs).reshape(len(points), -1),
        projected=np.array(projected, dtype=bool),
        halted_at_boundary=halted,
    )


def join_polygonals(backward, forward):
    """Glue a backward trace (reversed) onto a forward trace sharing its first vertex."""
    if not np.array_equal(backward.points[0], forward.points[0]):
        raise ValueError("traces do not share their start vertex")
    seg_e = np.concatenate([backward.segment_energies[::-1], forward.segment_energies])
    seg_pl = np.concatenate([backward.segment_pseudolengths[::-1], forward.segment_pseudolengths])
    cum = [0.0]
    total = 0.0
    for e in seg_e:
        total += e
        cum.append(total)
    outputs = None
    if backward.outputs is not None and forward.outputs is not None:
        outputs = np.concatenate([backward.outputs[::-1], forward.outputs[1:]])
    return Polygonal(
        points=np.concatenate([backward.points[::-1], forward.points[1:]]),
        directions=np.concatenate([-backward.directions[::-1], forward.directions]),
        segment_energies=seg_e,
        segment_pseudolengths=seg_pl,
        cumulative_energies=np.array(cum),
        outputs=outputs,
        projected=np.concatenate([backward.projected[::-1], forward.projected[1:]]),
        halted_at_boundary=backward.halted_at_boundary or forward.halted_at_boundary,
    )


def _fmt(x):
    return format(float(x), ".17g")


def trace_header(dim, out_dim=1, energies=True):
    cols = ["step"] + [f"x_{i}" for i in range(dim)]
    cols += ["output"] if out_dim <= 1 else [f"output_{i}" for i in range(out_dim)]
    if energies:
        cols += ["seg_energy", "cum_energy", "plen_bound", "projected_flag"]
    return cols


def write_trace_csv(poly, path):
    """One row per vertex; the energy columns describe the segment ending there."""
    n, dim = poly.points.shape
    out_dim = 1 if poly.outputs is None else poly.outputs.shape[1]
    plen = 0.0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(dim, out_dim))
        for k in range(n):
            seg = poly.segment_energies[k - 1] if k > 0 else 0.0
            if k > 0:
                plen += poly.segment_pseudolengths[k - 1]
            outs = [""] * out_dim if poly.outputs is None else [_fmt(o) for o in poly.outputs[k]]
            w.writerow([k] + [_fmt(c) for c in poly.points[k]] + outs
                       + [_fmt(seg), _fmt(poly.cumulative_energies[k]), _fmt(plen),
                          int(bool(poly.projected[k]))])


def read_trace_csv(path):
    """Read a trace CSV back into a dict of column arrays (empty cells become NaN)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        cols[name] = np.array([float(r[j]) if r[j] != "" else np.nan for r in body])
    return cols
