"""Command-line entry point: ``simec <subcommand> ...``.

Every subcommand writes ``manifest.json`` into its output directory before
doing any work. ``simec replay <manifest>`` runs the recorded configuration
again. Exit codes: 0 success, 2 configuration error, 3 numerical error,
4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InputShapeError, NumericalError
from .experiments import bisect_level
from .explorer import ExploreConfig, preimage_interval, simexp_step, write_foliation
from .metric import ANALYTIC_METRICS, PullbackMetric, analytic_metric
from .nn import check_full_rank, load_model, save_model
from .oracle import (
    GridSpec,
    coverage_fraction,
    grid_preimage,
    marching_contour,
    model_field,
)
from .tracer import BOUNDARY_POLICIES, HALT, IGNORE, Polygonal, TraceConfig, simec_trace, write_trace_csv
from .trainer import (
    DATASET_KINDS,
    TrainConfig,
    generate_dataset,
    read_dataset_csv,
    train,
    write_dataset_csv,
    write_loss_csv,
)
from .validate import SUITES, run_suite, write_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4

MANIFEST = "manifest.json"


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    seed: object = None
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    version: str = __version__

    def write(self, directory):
        path = Path(directory) / MANIFEST
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path):
        data = json.loads(Path(path).read_text())
        known = {k: data[k] for k in ("subcommand", "config", "seed", "inputs", "outputs", "version")
                 if k in data}
        if "subcommand" not in known or "config" not in known:
            raise ConfigError(f"{path} is not a run manifest")
        return cls(**known)


def parse_floats(text, n=None, name="value"):
    try:
        vals = [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"{name}: expected {n} numbers, got {len(vals)}")
    return vals


def parse_bounds(text, name="bounds"):
    """``"a1,b1,a2,b2,..."`` to ``[(a1, b1), (a2, b2), ...]``."""
    if text is None:
        return None
    vals = parse_floats(text, name=name)
    if not vals or len(vals) % 2:
        raise ConfigError(f"{name}: expected low,high pairs, got {text!r}")
    return [(vals[i], vals[i + 1]) for i in range(0, len(vals), 2)]


def _matrix(text, dim, name):
    if text is None:
        return None
    vals = parse_floats(text, dim * dim, name)
    return np.array(vals).reshape(dim, dim)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _gnuplot(path, csv_files, columns="2:3"):
    lines = ["set datafile separator ','", "set key off", "set size ratio -1"]
    plots = [f"'{Path(f).name}' every ::1 using {columns} with lines" for f in csv_files]
    lines.append("plot " + ", \\\n     ".join(plots))
    Path(path).write_text("\n".join(lines) + "\n")


def _begin(args, inputs=(), outputs=()):
    """Write the run manifest and return the output directory."""
    out = _out_dir(args)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    RunManifest(args.command, config, getattr(args, "seed", None),
                [str(Path(p).resolve()) for p in inputs if p], list(outputs)).write(out)
    return out


def cmd_train(args):
    if args.dataset is None and args.data is None:
        raise ConfigError("train needs --dataset KIND or --data CSV")
    out = _begin(args, [args.data], ["model.json", "loss.csv"]
                 + (["dataset.csv"] if args.emit_data else []))
    if args.data is not None:
        data = read_dataset_csv(args.data)
    else:
        data = generate_dataset(args.dataset, args.samples, args.seed)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch, learning_rate=args.lr,
                      seed=args.seed, split=args.split)
    result = train(args.arch, data, cfg, args.activation)
    save_model(result.model, out / "model.json")
    write_loss_csv(result, out / "loss.csv")
    if args.emit_data:
        write_dataset_csv(data, out / "dataset.csv")
    rank = check_full_rank(result.model)
    final_val = result.val_loss[-1] if result.val_loss else float("nan")
    final_train = result.train_loss[-1] if result.train_loss else float("nan")
    print(f"train_mse {final_train:.6g}  val_mse {final_val:.6g}  full_rank {rank.passed}")
    return EXIT_OK


def _provider(args):
    if args.analytic is not None:
        if args.model is not None:
            raise ConfigError("give either --model or --analytic, not both")
        return analytic_metric(args.analytic)
    if args.model is None:
        raise ConfigError("need --model PATH or --analytic NAME")
    model = load_model(args.model)
    return PullbackMetric(model, _matrix(args.output_metric, model.output_dim, "--output-metric"))


def _trace_config(args, delta=None, steps=None):
    return TraceConfig(args.delta if delta is None else delta,
                       args.steps if steps is None else steps, args.boundary,
                       parse_bounds(args.bounds), args.tau_rel)


def cmd_trace(args):
    out = _begin(args, [args.model] if args.model else [], ["trace.csv"])
    provider = _provider(args)
    cfg = _trace_config(args)
    start = parse_floats(args.start, provider.dim, "--start")
    v0 = None if args.v0 is None else parse_floats(args.v0, provider.dim, "--v0")
    poly = simec_trace(provider, start, cfg, v0=v0)
    write_trace_csv(poly, out / "trace.csv")
    if args.gnuplot:
        _gnuplot(out / "plot.gp", ["trace.csv"])
    drift = poly.max_output_drift()
    print(f"vertices {len(poly)}  energy {poly.cumulative_energy:.6e}  "
          f"pseudolength_bound {poly.pseudolength_bound:.6e}  "
          f"max_drift {'n/a' if drift is None else format(drift, '.6e')}  "
          f"projected_steps {poly.projected_steps}  halted {poly.halted_at_boundary}")
    return EXIT_OK


def _scalar_model(args):
    model = load_model(args.model)
    if model.output_dim != 1:
        raise InputShapeError(f"{args.command} needs a model with one output")
    return model


def cmd_explore(args):
    out = _begin(args, [args.model], ["explore.csv"])
    model = _scalar_model(args)
    cfg = _trace_config(args, steps=0)
    start = parse_floats(args.start, model.input_dim, "--start")
    step = simexp_step(model, start, None, args.delta, args.leaf_eps, args.max_steps, cfg,
                       refresh_direction=not args.fixed_direction, tau_rel=args.tau_rel)
    n = len(step.path)
    outputs = model(step.path)
    path = Polygonal(step.path, np.diff(step.path, axis=0), np.zeros(n - 1), np.zeros(n - 1),
                     np.zeros(n), outputs, np.zeros(n, dtype=bool))
    write_trace_csv(path, out / "explore.csv")
    print(f"status {step.status}  steps {step.steps}  length {step.length:.6e}  "
          f"output {step.start_output:.9g} -> {step.output:.9g}")
    return EXIT_OK


def _foliate_start(args, model):
    start = parse_floats(args.start, model.input_dim, "--start")
    if args.bisect_level is not None:
        box = parse_bounds(args.bounds)
        lo, hi = box[1] if box else (-1.0, 1.0)
        start[1] = bisect_level(model, start[0], args.bisect_level, lo, hi)
    return start


def cmd_foliate(args):
    out = _begin(args, [args.model], ["transversal.csv", "leaf_<k>.csv"])
    model = _scalar_model(args)
    simec = _trace_config(args, delta=args.leaf_delta)
    cfg = ExploreConfig(args.delta, args.eps, args.leaf_eps, args.max_leaf_steps, simec,
                        refresh_direction=not args.fixed_direction,
                        allow_outside=args.allow_outside,
                        transversal_box=parse_bounds(args.transversal_bounds, "--transversal-bounds"))
    start = _foliate_start(args, model)
    result = preimage_interval(model, start, cfg, jobs=args.jobs)
    extra = {"start": list(start)}
    summary = (f"leaves {len(result.leaves)}  center {result.center_output:.9g}  "
               f"covered [{result.covered_interval[0]:.6g}, {result.covered_interval[1]:.6g}]  "
               f"leaf_spacing {result.leaf_spacing():.4g}")
    if args.oracle_check:
        box = parse_bounds(args.oracle_bounds or args.bounds, "--oracle-bounds")
        if box is None or len(box) != 2:
            raise ConfigError("--oracle-check needs 2-D --bounds or --oracle-bounds")
        grid = GridSpec(box, args.resolution)
        c = result.center_output
        targets = grid_preimage(model_field(model), grid, (c - args.eps, c + args.eps))
        radius = 2.0 * result.leaf_spacing()
        cov = coverage_fraction(targets, result.vertices(), radius) if len(targets) else float("nan")
        extra["oracle"] = {"coverage": cov, "radius": radius, "grid_nodes": int(len(targets)),
                           "resolution": args.resolution}
        summary += f"  coverage {cov:.4f}"
    write_foliation(result, out, cfg, extra)
    if args.gnuplot:
        _gnuplot(out / "plot.gp", [f"leaf_{k}.csv" for k in range(len(result.leaves))])
    print(summary)
    return EXIT_OK


def cmd_oracle(args):
    if (args.level is None) == (args.interval is None):
        raise ConfigError("oracle needs exactly one of --level or --interval")
    out = _begin(args, [args.model], ["contour_<k>.csv" if args.level is not None else "preimage.csv"])
    model = _scalar_model(args)
    box = parse_bounds(args.bounds)
    if box is None or len(box) != 2:
        raise ConfigError("oracle needs 2-D --bounds")
    grid = GridSpec(box, args.resolution)
    f = model_field(model)
    if args.level is not None:
        contour = marching_contour(f, grid, args.level)
        files = []
        for k, line in enumerate(contour.polylines):
            name = f"contour_{k}.csv"
            _write_points(out / name, line, f(line))
            files.append(name)
        if args.gnuplot and files:
            _gnuplot(out / "plot.gp", files)
        print(f"polylines {len(contour)}  vertices {len(contour.points())}")
    else:
        lo, hi = parse_floats(args.interval, 2, "--interval")
        pts = grid_preimage(f, grid, (lo, hi))
        _write_points(out / "preimage.csv", pts, f(pts) if len(pts) else np.empty(0))
        if args.gnuplot:
            _gnuplot(out / "plot.gp", ["preimage.csv"], columns="2:3 with points")
        print(f"nodes {len(pts)}  area {len(pts) * grid.cell_area:.6g}")
    return EXIT_OK


def _write_points(path, pts, values):
    rows = [[k, *map(lambda v: format(float(v), ".17g"), p), format(float(val), ".17g")]
            for k, (p, val) in enumerate(zip(pts, values))]
    with open(path, "w") as fh:
        fh.write("step,x_0,x_1,output\n")
        for r in rows:
            fh.write(",".join(map(str, r)) + "\n")


def cmd_validate(args):
    out = _begin(args, [], ["report.json"])
    criteria = None
    if args.criteria:
        criteria = [c.strip() if c.strip() == "long" else int(c) for c in args.criteria.split(",")]
    results = run_suite(args.suite, out / "work", args.seed, args.jobs, criteria, log=print)
    report = write_report(results, out / "report.json")
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


def cmd_replay(args):
    manifest = RunManifest.read(args.manifest)
    if manifest.subcommand == "replay":
        raise ConfigError("cannot replay a replay manifest")
    config = dict(manifest.config)
    config["command"] = manifest.subcommand
    config["out"] = args.out if args.out is not None else str(Path(args.manifest).parent)
    ns = argparse.Namespace(**config)
    return HANDLERS[manifest.subcommand](ns)


HANDLERS = {
    "train": cmd_train,
    "trace": cmd_trace,
    "explore": cmd_explore,
    "foliate": cmd_foliate,
    "oracle": cmd_oracle,
    "validate": cmd_validate,
    "replay": cmd_replay,
}


def _common_trace_args(p, delta_default=1e-4):
    p.add_argument("--delta", type=float, default=delta_default, help="step length")
    p.add_argument("--bounds", help="hypercube as a1,b1,a2,b2,...")
    p.add_argument("--boundary", choices=BOUNDARY_POLICIES,
                   help="boundary policy (default: halt with --bounds, ignore without)")
    p.add_argument("--tau-rel", type=float, default=1e-9, help="relative null-eigenvalue threshold")


def build_parser():
    parser = argparse.ArgumentParser(prog="simec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="generate a dataset and train an MLP")
    p.add_argument("--dataset", choices=DATASET_KINDS)
    p.add_argument("--data", help="dataset CSV (inputs then targets) instead of --dataset")
    p.add_argument("--arch", default="2,5,5,1", help="comma-separated layer widths")
    p.add_argument("--activation", default="sigmoid",
                   choices=["sigmoid", "tanh", "softplus", "identity"])
    p.add_argument("--epochs", type=int, default=5000)
    p.add_argument("--batch", type=int, default=512)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--split", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--emit-data", action="store_true", help="also write dataset.csv")
    p.add_argument("--out", default=".")

    p = sub.add_parser("trace", help="trace a level set (null curve)")
    p.add_argument("--model")
    p.add_argument("--analytic", choices=sorted(ANALYTIC_METRICS))
    p.add_argument("--output-metric", help="constant output metric, row-major comma list")
    p.add_argument("--start", required=True)
    p.add_argument("--v0", help="orientation of the first step")
    p.add_argument("--steps", type=int, default=10_000)
    _common_trace_args(p)
    p.add_argument("--gnuplot", action="store_true")
    p.add_argument("--out", default=".")

    p = sub.add_parser("explore", help="one transversal move across level sets")
    p.add_argument("--model", required=True)
    p.add_argument("--start", required=True)
    p.add_argument("--leaf-eps", type=float, required=True, help="output change to reach")
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--fixed-direction", action="store_true",
                   help="keep the initial positive eigenvector for the whole walk")
    _common_trace_args(p)
    p.add_argument("--out", default=".")

    p = sub.add_parser("foliate", help="reconstruct the preimage of an output interval")
    p.add_argument("--model", required=True)
    p.add_argument("--start", required=True)
    p.add_argument("--bisect-level", type=float,
                   help="replace the start's second coordinate by bisection for this output")
    p.add_argument("--eps", type=float, required=True, help="half-width of the output interval")
    p.add_argument("--leaf-eps", type=float, help="output spacing between leaves (default eps/10)")
    p.add_argument("--leaf-delta", type=float, help="step along leaves (default --delta)")
    p.add_argument("--steps", type=int, default=10_000, help="steps per leaf and direction")
    p.add_argument("--max-leaf-steps", type=int, default=100_000,
                   help="step budget of one transversal move")
    p.add_argument("--allow-outside", action="store_true",
                   help="let the transversal continue outside the hypercube")
    p.add_argument("--transversal-bounds", help="box the transversal must stay in")
    p.add_argument("--fixed-direction", action="store_true")
    p.add_argument("--oracle-check", action="store_true", help="grid coverage summary")
    p.add_argument("--oracle-bounds", help="grid box for --oracle-check (default --bounds)")
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--jobs", type=int, default=1, help="trace leaves in parallel")
    _common_trace_args(p)
    p.add_argument("--gnuplot", action="store_true")
    p.add_argument("--out", default=".")

    p = sub.add_parser("oracle", help="grid contour or preimage of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--bounds", required=True)
    p.add_argument("--resolution", type=int, default=512)
    p.add_argument("--level", type=float)
    p.add_argument("--interval", help="lo,hi")
    p.add_argument("--gnuplot", action="store_true")
    p.add_argument("--out", default=".")

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.add_argument("--suite", choices=sorted(SUITES), default="all")
    p.add_argument("--criteria", help="explicit comma list, e.g. 1,4,long")
    p.add_argument("--seed", type=int, help="override every experiment's training seed")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=".")

    p = sub.add_parser("replay", help="rerun the configuration stored in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: the manifest's directory)")
    return parser


def resolve_defaults(args):
    """Materialize defaults that depend on other arguments, and absolutize input paths."""
    if args.command == "foliate" and args.leaf_eps is None:
        args.leaf_eps = args.eps / 10.0
    if args.command == "foliate" and args.leaf_delta is None:
        args.leaf_delta = args.delta
    if getattr(args, "boundary", "unset") is None:
        args.boundary = HALT if args.bounds is not None else IGNORE
    for key in ("model", "data"):
        if getattr(args, key, None) is not None:
            setattr(args, key, str(Path(getattr(args, key)).resolve()))
    return args


def main(argv=None):
    parser = build_parser()
    args = resolve_defaults(parser.parse_args(argv))
    try:
        return HANDLERS[args.command](args)
    except (ConfigError, InputShapeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
