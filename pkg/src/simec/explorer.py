"""Moving across level sets and reconstructing interval preimages.

``simexp_step`` walks along the positive eigenvector of the pullback metric
(the direction in which the output changes) until the output has moved by a
prescribed amount. ``preimage_interval`` alternates such transversal moves
with level-set traces to fill the connected component of
``N^-1([c - eps, c + eps])`` through a start point with leaves.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, DegenerateMetricError, InputShapeError
from .metric import NULL, POSITIVE, PullbackMetric, select_direction, spectral_decompose
from .nn import forward
from .tracer import (
    IGNORE,
    Polygonal,
    TraceConfig,
    apply_boundary,
    in_box,
    join_polygonals,
    simec_trace,
    write_trace_csv,
)

REACHED = "reached"
MAX_STEPS = "max_steps"
BOUNDARY = "boundary"


@dataclass(frozen=True)
class ExploreConfig:
    """Parameters of the preimage reconstruction.

    ``tol_eps`` is the half-width of the target output interval, ``leaf_eps``
    the output spacing between consecutive leaves and ``max_leaf_steps`` the
    step budget of a single transversal move. Per-leaf tracing uses ``simec``.
    """

    delta: float
    tol_eps: float
    leaf_eps: float
    max_leaf_steps: int
    simec: TraceConfig
    refresh_direction: bool = True
    allow_outside: bool = False
    transversal_box: Optional[np.ndarray] = None
    max_leaves: int = 10_000

    def __post_init__(self):
        for name in ("delta", "tol_eps", "leaf_eps"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ConfigError(f"{name} must be positive, got {val}")
        if not self.leaf_eps < self.tol_eps:
            raise ConfigError(
                f"leaf_eps ({self.leaf_eps}) must be smaller than tol_eps ({self.tol_eps})")
        if self.max_leaf_steps < 1 or self.max_leaves < 1:
            raise ConfigError("max_leaf_steps and max_leaves must be positive")
        if self.transversal_box is not None:
            object.__setattr__(self, "transversal_box",
                               TraceConfig(1.0, 0, IGNORE, self.transversal_box).hypercube)

    def to_dict(self):
        return {
            "delta": self.delta,
            "tol_eps": self.tol_eps,
            "leaf_eps": self.leaf_eps,
            "max_leaf_steps": self.max_leaf_steps,
            "simec": self.simec.to_dict(),
            "refresh_direction": self.refresh_direction,
            "allow_outside": self.allow_outside,
            "transversal_box": None if self.transversal_box is None
            else self.transversal_box.tolist(),
            "max_leaves": self.max_leaves,
        }


@dataclass(eq=False)
class ExploreStep:
    """Outcome of one transversal move.

    ``status`` is ``"reached"`` when the output moved by at least
    ``leaf_eps``; ``"max_steps"`` and ``"boundary"`` report why it stopped
    short. ``length`` is the polygonal length walked.
    """

    point: np.ndarray
    direction: np.ndarray
    status: str
    steps: int
    length: float
    path: np.ndarray
    start_output: float
    output: float

    @property
    def reached(self):
        return self.status == REACHED

    def __iter__(self):
        yield self.point
        yield self.direction


def _scalar_output(model, p):
    return float(forward(model, p)[0])


def _positive_direction(provider, p, prev, tau_rel):
    g, out = provider.evaluate(p)
    decomp = spectral_decompose(g, tau_rel)
    return select_direction(decomp, POSITIVE, prev), float(out[0])


def simexp_step(model, p, prev_dir, delta, leaf_eps, max_steps, cfg_boundary=None,
                refresh_direction=True, tau_rel=None, provider=None):
    """Step along the positive eigenvector until the output moved by ``leaf_eps``.

    The walk stops on the first vertex with ``|N(p_k) - N(p)| >= leaf_eps``,
    after ``max_steps`` steps, or when the boundary policy of
    ``cfg_boundary`` halts it. With ``refresh_direction`` off the initial
    direction is kept for the whole walk.
    """
    if model.output_dim != 1:
        raise InputShapeError("transversal exploration needs a scalar-output model")
    if cfg_boundary is None:
        cfg_boundary = TraceConfig(delta, 0)
    if tau_rel is None:
        tau_rel = cfg_boundary.tau_rel
    if provider is None:
        provider = PullbackMetric(model)
    p = np.array(p, dtype=np.float64)
    if cfg_boundary.boundary != IGNORE and not in_box(p, cfg_boundary.hypercube):
        raise ConfigError(f"start point {p.tolist()} lies outside the hypercube")
    start = _scalar_output(model, p)
    out = start
    direction = None if prev_dir is None else np.asarray(prev_dir, dtype=np.float64)
    path = [p]
    length = 0.0
    status = MAX_STEPS
    steps = 0
    while True:
        if abs(out - start) >= leaf_eps:
            status = REACHED
            break
        if steps >= max_steps:
            break
        if refresh_direction or direction is None:
            direction, _ = _positive_direction(provider, p, direction, tau_rel)
        q = p + delta * direction
        q, halted = apply_boundary(q, cfg_boundary)
        if halted:
            status = BOUNDARY
            break
        length += float(np.linalg.norm(q - p))
        p = q
        path.append(p)
        steps += 1
        out = _scalar_output(model, p)
    if direction is None:
        direction, _ = _positive_direction(provider, p, None, tau_rel)
    return ExploreStep(p, direction, status, steps, length, np.array(path), start, out)


@dataclass(eq=False)
class FoliationResult:
    """Leaves covering an output band around ``center_output``.

    ``transversal_points[k]`` is the start vertex of ``leaves[k]``;
    ``transversal_side[k]`` is +1 or -1 for the direction of the pass that
    produced it (the start point itself belongs to the + pass).
    """

    leaves: list
    transversal_points: np.ndarray
    transversal_side: np.ndarray
    center_output: float
    covered_interval: tuple
    stop_reasons: dict = field(default_factory=dict)

    def vertices(self):
        if not self.leaves:
            return np.empty((0, self.transversal_points.shape[1]))
        return np.concatenate([leaf.points for leaf in self.leaves])

    def leaf_spacing(self):
        """Mean distance between consecutive leaf start points, both passes."""
        pts = self.transversal_points
        side = self.transversal_side
        plus = pts[side > 0]
        minus = np.concatenate([pts[:1], pts[side < 0]])
        gaps = [np.linalg.norm(np.diff(chain, axis=0), axis=1)
                for chain in (plus, minus) if len(chain) > 1]
        if not gaps:
            return 0.0
        return float(np.mean(np.concatenate(gaps)))


def _trace_leaf(provider, start, cfg, inside_cfg):
    leaf_cfg = cfg if cfg.boundary == IGNORE or in_box(start, cfg.hypercube) else inside_cfg
    fwd = simec_trace(provider, start, leaf_cfg)
    if len(fwd.directions):
        v0 = -fwd.directions[0]
    else:
        decomp = spectral_decompose(provider(start), leaf_cfg.tau_rel)
        v0 = -select_direction(decomp, NULL)
    back = simec_trace(provider, start, leaf_cfg, v0=v0)
    return join_polygonals(back, fwd)


def preimage_interval(model, p0, cfg, jobs=1):
    """Reconstruct the connected component of ``N^-1([c - eps, c + eps])`` through ``p0``.

    A transversal pass walks along ``+w`` (the positive eigenvector at
    ``p0``) and then along ``-w``, both starting from ``p0``. Every visited
    point whose output is still within ``tol_eps`` of ``c = N(p0)`` seeds a
    leaf traced in both directions. A pass ends when the output leaves the
    band, or when a transversal move stops short (boundary or step budget).
    """
    if model.output_dim != 1:
        raise InputShapeError("preimage reconstruction needs a scalar-output model")
    p0 = np.array(p0, dtype=np.float64)
    simec = cfg.simec
    if simec.boundary != IGNORE and not in_box(p0, simec.hypercube):
        raise ConfigError(f"start point {p0.tolist()} lies outside the hypercube")
    provider = PullbackMetric(model)
    center = _scalar_output(model, p0)

    if cfg.allow_outside:
        if cfg.transversal_box is None:
            transversal_cfg = TraceConfig(cfg.delta, 0, IGNORE, tau_rel=simec.tau_rel)
        else:
            transversal_cfg = TraceConfig(cfg.delta, 0, "halt", cfg.transversal_box,
                                          tau_rel=simec.tau_rel)
    else:
        transversal_cfg = replace(simec, delta=cfg.delta, max_steps=0)
    # leaves seeded outside the hypercube run free until they come back in
    outside_leaf_cfg = replace(simec, boundary=IGNORE)

    w_plus, _ = _positive_direction(provider, p0, None, simec.tau_rel)
    starts = [p0]
    sides = [1]
    reasons = {}
    for side in (1, -1):
        p = p0
        direction = side * w_plus
        count = 0
        while True:
            if count >= cfg.max_leaves:
                reasons[side] = "max_leaves"
                break
            try:
                step = simexp_step(model, p, direction, cfg.delta, cfg.leaf_eps,
                                   cfg.max_leaf_steps, transversal_cfg,
                                   refresh_direction=cfg.refresh_direction,
                                   tau_rel=simec.tau_rel, provider=provider)
            except DegenerateMetricError as exc:
                raise DegenerateMetricError(f"transversal step after leaf {len(starts) - 1}: {exc}")
            if not step.reached:
                reasons[side] = step.status
                break
            if abs(step.output - center) > cfg.tol_eps:
                reasons[side] = "interval"
                break
            p, direction = step.point, step.direction
            starts.append(p)
            sides.append(side)
            count += 1

    def run(k):
        try:
            return _trace_leaf(provider, starts[k], simec, outside_leaf_cfg)
        except DegenerateMetricError as exc:
            raise DegenerateMetricError(f"leaf {k}: {exc}") from None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            leaves = list(pool.map(run, range(len(starts))))
    else:
        leaves = [run(k) for k in range(len(starts))]

    outs = np.concatenate([leaf.outputs[:, 0] for leaf in leaves])
    return FoliationResult(
        leaves=leaves,
        transversal_points=np.array(starts),
        transversal_side=np.array(sides),
        center_output=center,
        covered_interval=(float(outs.min()), float(outs.max())),
        stop_reasons=reasons,
    )


def write_foliation(result, directory, cfg=None, extra=None):
    """Write ``transversal.csv``, ``leaf_<k>.csv`` and ``manifest.json`` into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    pts = result.transversal_points
    outputs = np.array([leaf.outputs[0] for leaf in result.leaves])
    n = len(pts)
    transversal = Polygonal(
        points=pts,
        directions=np.diff(pts, axis=0),
        segment_energies=np.zeros(max(n - 1, 0)),
        segment_pseudolengths=np.zeros(max(n - 1, 0)),
        cumulative_energies=np.zeros(n),
        outputs=outputs,
        projected=np.zeros(n, dtype=bool),
    )
    write_trace_csv(transversal, out / "transversal.csv")
    for k, leaf in enumerate(result.leaves):
        write_trace_csv(leaf, out / f"leaf_{k}.csv")
    manifest = {
        "center_output": result.center_output,
        "covered_interval": list(result.covered_interval),
        "n_leaves": len(result.leaves),
        "stop_reasons": {str(k): v for k, v in result.stop_reasons.items()},
    }
    if cfg is not None:
        manifest.update({
            "tol_eps": cfg.tol_eps,
            "leaf_eps": cfg.leaf_eps,
            "delta": cfg.delta,
            "max_steps": cfg.simec.max_steps,
            "boundary": cfg.simec.boundary,
            "config": cfg.to_dict(),
        })
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    if path.exists():
        # keep what a caller recorded before the run (e.g. a run manifest)
        manifest = {**json.loads(path.read_text()), **manifest}
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out
