"""Acceptance checks: closed-form examples, oracle cross-checks and the experiments.

Every ``criterion_<n>`` function takes a :class:`Context` and returns a
:class:`CheckResult`. Checks that produce traces write them as CSV under
``ctx.workdir`` so that reruns can be compared byte for byte.
"""

from __future__ import annotations

import filecmp
import json
import math
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import experiments
from .explorer import ExploreConfig, preimage_interval, write_foliation
from .metric import NULL, PullbackMetric, analytic_metric, pullback_metric, select_direction, spectral_decompose
from .nn import Layer, MlpModel, forward, network_jacobian
from .oracle import (
    GridSpec,
    coverage_fraction,
    covered_area,
    distance_to_segments,
    fd_jacobian,
    grid_preimage,
    hausdorff,
    marching_contour,
    model_field,
)
from .tracer import HALT, IGNORE, TraceConfig, simec_trace, write_trace_csv
from .trainer import generate_dataset, train, write_loss_csv

SUITES = {
    "exact": (1, 2),
    "oracle": (3, 4, 5, 6, 7, 8),
    "all": (1, 2, 3, 4, 5, 6, 7, 8, 9),
    "long": ("long",),
}

CIRCLE_START = (0.25, 0.25)
CIRCLE_BOX = ((-1.0, 1.0), (-1.0, 1.0))
UNIT_BOX = ((0.0, 1.0), (0.0, 1.0))
SINE_BOX = ((-math.pi, math.pi), (-1.0, 1.0))
# leaves of the classifier may continue above / below the data box, as the
# decision boundary leaves it near the crests of the sine
SINE_LEAF_BOX = ((-math.pi, math.pi), (-1.5, 1.5))
DEGRADATION_DELTAS = (1e-4, 1e-3, 1.25e-2, 2.5e-2, 5e-2)


@dataclass
class CheckResult:
    number: object
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        facts = ", ".join(f"{k}={_short(v)}" for k, v in self.detail.items() if not isinstance(v, (list, dict)))
        return f"criterion {self.number} [{flag}] {self.title}: {facts} ({self.seconds:.1f}s)"

    def to_dict(self):
        return {"criterion": self.number, "title": self.title, "passed": bool(self.passed),
                "seconds": round(self.seconds, 3), "detail": _jsonable(self.detail)}


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


@dataclass
class Context:
    """Shared state of a validation run.

    ``seed`` overrides the training seed of every experiment (``None`` keeps
    the per-experiment defaults). With ``cache`` off models are retrained
    even if this process trained them before.
    """

    workdir: Path
    seed: Optional[int] = None
    cache: bool = True
    jobs: int = 1

    def __post_init__(self):
        self.workdir = Path(self.workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self._local = {}

    def out(self, name):
        path = self.workdir / name
        path.mkdir(parents=True, exist_ok=True)
        return path

    def trained(self, name, epochs=None):
        if self.cache:
            return experiments.train_experiment(name, self.seed, epochs)
        key = (name, epochs)
        if key not in self._local:
            exp = experiments.get_experiment(name).with_seed(self.seed)
            if epochs is not None:
                exp = replace(exp, train=replace(exp.train, epochs=epochs))
            data = generate_dataset(exp.dataset, exp.n_samples, exp.train.seed)
            self._local[key] = (data, train(list(exp.arch), data, exp.train))
        return self._local[key]


def _timed(fn):
    def wrapper(ctx):
        t0 = time.perf_counter()
        res = fn(ctx)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def criterion_1(ctx):
    """Linear example: pullback, spectrum and kernel in closed form."""
    model = MlpModel([Layer([[1.0, 2.0, 2.0], [3.0, 1.0, 5.0]], [0.0, 0.0], "identity")])
    g = pullback_metric(model, np.zeros(3))
    expected = np.array([[10.0, 5.0, 17.0], [5.0, 5.0, 9.0], [17.0, 9.0, 29.0]])
    metric_err = float(np.max(np.abs(g.matrix - expected)))
    d = spectral_decompose(g)
    root = math.sqrt(394.0)
    eig_err = float(np.max(np.abs(d.eigenvalues - [0.0, 22.0 - root, 22.0 + root])))
    v = select_direction(d, NULL)
    k = np.array([8.0, 1.0, -5.0]) / math.sqrt(90.0)
    sin_angle = float(np.linalg.norm(np.cross(v, k)))
    ok = metric_err <= 1e-12 and eig_err <= 1e-9 and sin_angle <= 1e-9
    return CheckResult(1, "linear example", ok, {
        "metric_err": metric_err, "eigenvalue_err": eig_err, "kernel_sin_angle": sin_angle,
        "null_vector": v.tolist()})


def example2_trace():
    cfg = TraceConfig(1e-4, 10_000, IGNORE)
    return simec_trace(analytic_metric("example2"), [1.0, 1.0], cfg)


@_timed
def criterion_2(ctx):
    """Analytic degenerate metric: distance of the trace from the quoted parabola.

    The field ``[[x^2, x], [x, 1]]`` has kernel ``(1, -x)``, so its null curve
    through (1, 1) is ``y = 1.5 - x^2 / 2``. The parabola checked here,
    ``y = 1 - (x - 1)^2 / 2``, differs from it by ``1 - x``; the check is run
    as stated and is expected to fail. The deviation from the exact null
    curve is reported alongside.
    """
    poly = example2_trace()
    x, y = poly.points[:, 0], poly.points[:, 1]
    quoted = float(np.max(np.abs(y - (1.0 - (x - 1.0) ** 2 / 2.0))))
    exact = float(np.max(np.abs(y - (1.5 - x ** 2 / 2.0))))
    return CheckResult(2, "analytic null curve vs quoted parabola", quoted <= 1e-3, {
        "max_dev_quoted_parabola": quoted, "max_dev_exact_null_curve": exact,
        "x_range": [float(x.min()), float(x.max())]})


@_timed
def criterion_3(ctx):
    """Network Jacobian against central differences on a freshly trained net."""
    _, res = ctx.trained("circle", epochs=500)
    model = res.model
    rng = np.random.default_rng(3 if ctx.seed is None else ctx.seed)
    pts = rng.uniform(-1.0, 1.0, size=(100, 2))
    worst = 0.0
    rows = []
    for p in pts:
        jac = network_jacobian(model, p)
        fd = fd_jacobian(lambda q: forward(model, q), p)
        rel = float(np.max(np.abs(jac - fd)) / np.max(np.abs(jac)))
        worst = max(worst, rel)
        rows.append(np.concatenate([p, jac.ravel(), fd.ravel()]))
    path = ctx.out("criterion_3") / "jacobians.csv"
    np.savetxt(path, np.array(rows), delimiter=",", fmt="%.17g",
               header="x_0,x_1,j_0,j_1,fd_0,fd_1", comments="")
    return CheckResult(3, "Jacobian vs finite differences", worst <= 1e-6,
                       {"max_rel_err": worst, "points": len(pts)})


def circle_trace(model, delta, steps):
    cfg = TraceConfig(delta, steps, HALT, CIRCLE_BOX)
    return simec_trace(PullbackMetric(model), CIRCLE_START, cfg)


def circle_contour(model, level, resolution=512):
    return marching_contour(model_field(model), GridSpec(CIRCLE_BOX, resolution), level)


@_timed
def criterion_4(ctx):
    """Circle experiment at desk scale: training, drift, energy, contour distance."""
    data, res = ctx.trained("circle")
    model = res.model
    out = ctx.out("criterion_4")
    write_loss_csv(res, out / "loss.csv")
    train_mse = res.train_loss[-1]
    poly = circle_trace(model, 1e-4, 100_000)
    write_trace_csv(poly, out / "trace.csv")
    level = float(poly.outputs[0, 0])
    contour = circle_contour(model, level)
    grid = GridSpec(CIRCLE_BOX, 512)
    bound = 2.0 * (2.0 / 512.0) * math.sqrt(2.0)
    dist = hausdorff(poly.points, contour.points())
    drift = poly.max_output_drift()
    energy = poly.cumulative_energy
    ok = train_mse <= 1e-3 and drift <= 1e-3 and energy <= 1e-8 and dist <= bound
    return CheckResult(4, "circle reproduction", ok, {
        "train_mse": train_mse, "val_mse": res.val_loss[-1], "start_output": level,
        "max_drift": drift, "energy": energy, "hausdorff": dist, "hausdorff_bound": bound,
        "cell_diagonal": grid.cell_diagonal, "vertices": len(poly)})


@_timed
def criterion_5(ctx):
    """Trace quality degrades as the step grows (same arc length for every step)."""
    _, res = ctx.trained("circle")
    model = res.model
    out = ctx.out("criterion_5")
    level = float(forward(model, np.array(CIRCLE_START))[0])
    segs = circle_contour(model, level).segments()
    arc = 150 * DEGRADATION_DELTAS[-1]
    dists = []
    for delta in DEGRADATION_DELTAS:
        poly = circle_trace(model, delta, int(round(arc / delta)))
        write_trace_csv(poly, out / f"trace_{delta:g}.csv")
        dists.append(float(np.max(distance_to_segments(poly.points, segs))))
    ok = all(b >= a for a, b in zip(dists, dists[1:]))
    return CheckResult(5, "step-size degradation", ok, {
        "deltas": list(DEGRADATION_DELTAS), "max_distance": dists, "arc_length": arc,
        "worst": dists[-1]})


def foliation_coverage(field_fn, result, grid, interval, radius=None):
    targets = grid_preimage(field_fn, grid, interval)
    spacing = result.leaf_spacing()
    if radius is None:
        radius = 2.0 * spacing
    return coverage_fraction(targets, result.vertices(), radius), radius, len(targets)


@_timed
def criterion_6(ctx):
    """Strip preimage of the linear map x + 2y against a grid scan."""
    model = MlpModel([Layer([[1.0, 2.0]], [0.0], "identity")])
    cfg = ExploreConfig(1e-3, 0.1, 0.01, 3000, TraceConfig(1e-3, 3000, HALT, UNIT_BOX))
    result = preimage_interval(model, [0.5, 0.5], cfg, jobs=ctx.jobs)
    write_foliation(result, ctx.out("criterion_6"), cfg)
    verts = result.vertices()
    worst = float(np.max(np.abs(verts[:, 0] + 2.0 * verts[:, 1] - 1.5)))
    grid = GridSpec(UNIT_BOX, 256)
    cov, radius, n_targets = foliation_coverage(
        lambda p: p[:, 0] + 2.0 * p[:, 1], result, grid, (1.4, 1.6))
    ok = worst <= 0.101 and cov >= 0.9
    return CheckResult(6, "linear strip preimage", ok, {
        "leaves": len(result.leaves), "max_offset": worst, "coverage": cov, "radius": radius,
        "strip_nodes": n_targets})


def annulus_config(delta):
    return ExploreConfig(delta, 0.05, 0.0025, 20_000,
                         TraceConfig(delta, int(round(2.0 / delta)), HALT, UNIT_BOX))


@_timed
def criterion_7(ctx):
    """Annulus preimage of the circle model; the coarse step overestimates it."""
    _, res = ctx.trained("circle")
    model = res.model
    start = (0.2, 0.2)
    grid = GridSpec(UNIT_BOX, 256)
    c = float(forward(model, np.array(start))[0])
    fine_cfg, coarse_cfg = annulus_config(1e-4), annulus_config(1e-3)
    fine = preimage_interval(model, start, fine_cfg, jobs=ctx.jobs)
    write_foliation(fine, ctx.out("criterion_7") / "delta_1e-4", fine_cfg)
    coarse = preimage_interval(model, start, coarse_cfg, jobs=ctx.jobs)
    write_foliation(coarse, ctx.out("criterion_7") / "delta_1e-3", coarse_cfg)
    cov, radius, n_targets = foliation_coverage(model_field(model), fine, grid, (c - 0.05, c + 0.05))
    # one radius for both runs, so the areas differ only through the leaves
    area_fine = covered_area(grid, fine.vertices(), radius)
    area_coarse = covered_area(grid, coarse.vertices(), radius)
    oracle_area = n_targets * grid.cell_area
    ok = cov >= 0.9 and area_coarse > area_fine
    return CheckResult(7, "annulus preimage", ok, {
        "center_output": c, "leaves_fine": len(fine.leaves), "leaves_coarse": len(coarse.leaves),
        "coverage": cov, "radius": radius, "area_fine": area_fine, "area_coarse": area_coarse,
        "oracle_area": oracle_area})


def sine_config():
    leaf = TraceConfig(1e-3, 8000, HALT, SINE_LEAF_BOX)
    return ExploreConfig(1e-5, 0.1, 0.02, 200_000, leaf, allow_outside=True,
                         transversal_box=SINE_LEAF_BOX)


@_timed
def criterion_8(ctx):
    """Decision boundary of the sine classifier against y = sin(x)."""
    _, res = ctx.trained("sine")
    model = res.model
    out = ctx.out("criterion_8")
    write_loss_csv(res, out / "loss.csv")
    y0 = experiments.bisect_level(model, 0.0)
    cfg = sine_config()
    result = preimage_interval(model, [0.0, y0], cfg, jobs=ctx.jobs)
    write_foliation(result, out / "foliation", cfg, {"start": [0.0, y0]})
    ref = marching_contour(lambda p: p[:, 1] - np.sin(p[:, 0]), GridSpec(SINE_BOX, 512), 0.0)
    medial = result.leaves[0]
    dist = hausdorff(medial.points, ref.points())
    train_mse = res.train_loss[-1]
    ok = train_mse <= 5e-3 and dist <= 0.15
    return CheckResult(8, "sine decision boundary", ok, {
        "train_mse": train_mse, "start_y": y0, "start_output": result.center_output,
        "leaves": len(result.leaves), "covered_interval": list(result.covered_interval),
        "medial_hausdorff": dist, "medial_vertices": len(medial)})


DETERMINISM_CRITERIA = (3, 4, 5, 6, 7, 8)


def _csv_files(root):
    return sorted(p.relative_to(root) for p in Path(root).rglob("*.csv"))


@_timed
def criterion_9(ctx):
    """Two runs of the trace-producing checks, the second retraining from scratch."""
    runs = []
    for k, cache in enumerate((ctx.cache, False)):
        sub = Context(ctx.workdir / "determinism" / f"run_{k}", ctx.seed, cache, ctx.jobs)
        for n in DETERMINISM_CRITERIA:
            CRITERIA[n](sub)
        runs.append(sub.workdir)
    a, b = runs
    files_a, files_b = _csv_files(a), _csv_files(b)
    differing = [str(f) for f in files_a if f in files_b and not filecmp.cmp(a / f, b / f, shallow=False)]
    missing = sorted(set(map(str, files_a)) ^ set(map(str, files_b)))
    ok = bool(files_a) and not differing and not missing
    return CheckResult(9, "byte-identical reruns", ok, {
        "files": len(files_a), "differing": differing, "missing": missing})


@_timed
def criterion_long(ctx):
    """Headline circle run: 1.5 million steps of 2e-6."""
    _, res = ctx.trained("circle")
    poly = circle_trace(res.model, 2e-6, 1_500_000)
    write_trace_csv(poly, ctx.out("criterion_long") / "trace.csv")
    return CheckResult("long", "headline energy", poly.cumulative_energy <= 1e-18, {
        "energy": poly.cumulative_energy, "max_drift": poly.max_output_drift(),
        "vertices": len(poly)})


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, "long": criterion_long,
}


def run_suite(suite="all", workdir=None, seed=None, jobs=1, criteria=None, log=None):
    """Run a named suite (or an explicit list of criteria) and return the results."""
    if criteria is None:
        if suite not in SUITES:
            raise KeyError(suite)
        criteria = SUITES[suite]
    if workdir is None:
        workdir = tempfile.mkdtemp(prefix="simec-validate-")
    ctx = Context(Path(workdir), seed, True, jobs)
    results = []
    for n in criteria:
        res = CRITERIA[n](ctx)
        results.append(res)
        if log is not None:
            log(res.line())
    return results


def write_report(results, path):
    report = {
        "passed": all(r.passed for r in results),
        "criteria": [r.to_dict() for r in results],
    }
    Path(path).write_text(json.dumps(report, indent=2) + "\n")
    return report
