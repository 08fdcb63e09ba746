"""Command-line entry point: ``dtnopt <command> ...``.

Exit status is 0 on success, 1 for usage, config or dataset errors and 2
for failures while running.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import date

import numpy as np

from . import harness
from .dataset import FEATURES, TARGETS, Dataset
from .engine import Simulation, ScenarioConfig
from .errors import ConfigError, DatasetError, DTNError
from .metrics import box_stats, format_value, pearson_matrix, report_from_log
from .optimizer import DEConfig, ObjectiveSpec, default_box, recommend_and_validate
from .surrogate import (
    REFERENCE_PROFILES,
    REFERENCE_TUNED,
    evaluate,
    feature_importance,
    grid_search,
    load_model,
    make_model,
    save_model,
    select_top_k,
    train_test_split,
)
from .trace import (
    GeoBounds,
    TraceBounds,
    convert_taxi_dataset,
    generate_synthetic_trace,
    read_cabspotting_dir,
    read_geofix_csv,
    read_trace_file,
    write_external_trace,
)

DEFAULT_SPLIT = {"rf": 0.2, "gbm": 0.3}
DEFAULT_GRID = {
    "rf": {"n_estimators": [15, 50], "max_depth": [6, 10], "min_samples_leaf": [5, 15]},
    "gbm": {"n_estimators": [100], "max_depth": [2, 3], "learning_rate": [0.04, 0.1]},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _out(args, text):
    if getattr(args, "out", None):
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _pair(text, cast=float):
    parts = text.replace(":", ",").split(",")
    if len(parts) != 2:
        raise UsageError(f"expected two comma-separated values, got {text!r}")
    return cast(parts[0]), cast(parts[1])


def _params(pairs):
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise UsageError(f"--param expects key=value, got {p!r}")
        k, v = p.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


# ------------------------------------------------------------------ traces

def cmd_convert(args):
    if os.path.isdir(args.input):
        fixes = read_cabspotting_dir(args.input)
    else:
        fixes = read_geofix_csv(args.input)
    geo = GeoBounds(*args.geo) if args.geo else GeoBounds.of(fixes)
    samples = convert_taxi_dataset(fixes, date.fromisoformat(args.day), geo,
                                   args.world[0], args.world[1], args.seed)
    _write_trace(args, samples)


def cmd_gen_trace(args):
    samples = generate_synthetic_trace(args.nodes, args.duration, args.world[0], args.world[1],
                                       speed=args.speed, pause=args.pause,
                                       sample_period=args.period, seed=args.seed)
    _write_trace(args, samples)


def _write_trace(args, samples):
    text = write_external_trace(samples)
    b = TraceBounds.of(samples)
    summary = (f"samples={len(samples)} nodes={len({s.node_id for s in samples})} "
               f"bounds={' '.join(format_value(v) for v in b.as_tuple())}\n")
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
        sys.stdout.write(summary)
    else:
        sys.stdout.write(text)
        sys.stderr.write(summary)


# -------------------------------------------------------------- simulation

def _load_scenario(args):
    cf = harness.load_config(args.config)
    trace_path = args.trace or cf.movement_file
    if not trace_path:
        raise ConfigError("no trace: set Movement.file in the config or pass --trace")
    _, trace = read_trace_file(trace_path)
    return cf.scenario, trace


def cmd_simulate(args):
    scenario, trace = _load_scenario(args)
    if args.seed is not None:
        scenario.seed = args.seed
    sim = Simulation(scenario, trace).run()
    if args.log:
        with open(args.log, "w", newline="\n") as fh:
            fh.write(sim.log.to_text())
    _out(args, report_from_log(sim.log).to_text())


def cmd_sweep(args):
    scenario, trace = _load_scenario(args)
    plan = harness.SweepPlan(box=_box(args), mode=args.mode, runs=args.runs,
                             levels=args.levels, seed=args.seed)
    ds = harness.sweep(plan, scenario, trace, workers=args.workers)
    _out(args, ds.to_csv())


# ------------------------------------------------------------------ models

def _dataset(path):
    return Dataset.load(path).clean().validate()


def _targets(args):
    return list(TARGETS) if args.target == "both" else [args.target]


def _profile(family, name):
    if name == "reference":
        return dict(REFERENCE_PROFILES[family])
    if name == "tuned":
        return dict(REFERENCE_TUNED[family])
    return {}


def _model_path(args, family, target):
    os.makedirs(args.model_dir, exist_ok=True)
    suffix = f"_{args.tag}" if getattr(args, "tag", None) else ""
    return os.path.join(args.model_dir, f"{family}_{target}{suffix}.json")


def _fit_and_report(args, ds, params, names=None):
    split = args.test_fraction or DEFAULT_SPLIT[args.model]
    train, test = train_test_split(len(ds), split, args.seed)
    sub = ds if names is None else ds.select_features(names)
    lines = []
    for target in _targets(args):
        y = sub.target(target)
        model = make_model(args.model, params, args.seed).fit(sub.X[train], y[train])
        for part, rows in (("train", train), ("test", test)):
            m = evaluate(y[rows], model.predict(sub.X[rows]))
            lines.append(f"{target}.{part}.mse={format_value(m.mse)}")
            lines.append(f"{target}.{part}.rmse={format_value(m.rmse)}")
            lines.append(f"{target}.{part}.r2={format_value(m.r_squared)}")
        path = _model_path(args, args.model, target)
        save_model(path, model, sub.feature_names, target)
        lines.append(f"{target}.model={path}")
    return lines


def cmd_train(args):
    ds = _dataset(args.dataset)
    params = {**_profile(args.model, args.profile), **_params(args.param)}
    _out(args, "\n".join(_fit_and_report(args, ds, params)) + "\n")


def cmd_tune(args):
    ds = _dataset(args.dataset)
    grid = DEFAULT_GRID[args.model]
    if args.grid:
        grid = json.loads(open(args.grid).read() if os.path.exists(args.grid) else args.grid)
    base = {**_profile(args.model, args.profile), **_params(args.param)}
    split = args.test_fraction or DEFAULT_SPLIT[args.model]
    train, _ = train_test_split(len(ds), split, args.seed)
    lines = []
    best_by_target = {}
    for target in _targets(args):
        best, table = grid_search(ds.X[train], ds.target(target)[train], args.model, grid,
                                  k=args.folds, seed=args.seed, base_params=base)
        best_by_target[target] = best
        for row in table:
            combo = ",".join(f"{k}={json.dumps(v)}" for k, v in row["params"].items())
            lines.append(f"{target}.cv {combo} mean_mse={format_value(row['mean_mse'])} "
                         f"std_mse={format_value(row['std_mse'])}")
        lines.append(f"{target}.best={json.dumps(best, sort_keys=True)}")
    for target, best in best_by_target.items():
        saved = _targets(args)
        args.target = target
        lines += _fit_and_report(args, ds, {**base, **best})
        args.target = "both" if len(saved) > 1 else saved[0]
    _out(args, "\n".join(lines) + "\n")


def cmd_select(args):
    ds = _dataset(args.dataset)
    params = {**_profile(args.model, args.profile), **_params(args.param)}
    split = args.test_fraction or DEFAULT_SPLIT[args.model]
    train, _ = train_test_split(len(ds), split, args.seed)
    lines = []
    selections = {}
    for target in _targets(args):
        model = make_model(args.model, params, args.seed).fit(ds.X[train], ds.target(target)[train])
        imp = feature_importance(model, FEATURES)
        for name, w in sorted(imp.items(), key=lambda kv: -kv[1]):
            lines.append(f"{target}.importance.{name}={format_value(w)}")
        top = select_top_k(imp, args.k)
        selections[target] = top
        lines.append(f"{target}.selected={','.join(top)}")
    args.tag = "selected"
    for target, names in selections.items():
        saved = args.target
        args.target = target
        lines += _fit_and_report(args, ds, params, names)
        args.target = saved
    _out(args, "\n".join(lines) + "\n")


# ------------------------------------------------------------ optimization

def _box(args):
    box = default_box()
    narrowed = {}
    for spec in getattr(args, "bounds", None) or []:
        if "=" not in spec:
            raise UsageError(f"--bounds expects name=low:high, got {spec!r}")
        name, rng = spec.split("=", 1)
        if name not in box.names:
            raise UsageError(f"unknown feature {name!r}")
        lo, hi = _pair(rng)
        kind = box.dims[box.names.index(name)].kind
        if lo == hi and kind == "integer":
            lo, hi = lo - 0.25, hi + 0.25  # only the integer lo survives rounding
        narrowed[name] = (lo, hi)
    return box.narrowed(**narrowed) if narrowed else box


def _spec(args):
    for p in (args.delivery_model, args.overhead_model):
        if not os.path.exists(p):
            raise FileNotFoundError(f"model file not found: {p}")
    dm, om = load_model(args.delivery_model), load_model(args.overhead_model)
    ds = _dataset(args.dataset)
    return ObjectiveSpec.from_dataset(ds, dm, om, args.weights)


def _de(args):
    return DEConfig(popsize=args.popsize, F=args.F, CR=args.CR,
                    max_generations=args.generations, seed=args.seed)


def cmd_optimize(args):
    rec = recommend_and_validate(_spec(args), _box(args), _de(args))
    _out(args, rec.to_text())


def cmd_validate(args):
    spec, box, de = _spec(args), _box(args), _de(args)
    scenario, trace = _load_scenario(args)
    rec = recommend_and_validate(spec, box, de,
                                 lambda feats: harness.simulate_features(scenario, trace, feats))
    if args.append:
        row = Dataset(np.array([[rec.x[f] for f in FEATURES]]),
                      {"delivery_prob": np.array([rec.simulated.delivery_prob]),
                       "overhead_ratio": np.array([rec.simulated.overhead_ratio])})
        with open(args.append, "a", newline="") as fh:
            fh.write(row.to_csv().split("\n", 1)[1])
    _out(args, rec.to_text())


def cmd_analyze(args):
    ds = Dataset.load(args.dataset).clean()
    table = ds.table()
    names = list(FEATURES) + list(TARGETS)
    r = pearson_matrix(table)
    lines = ["," + ",".join(names)]
    for i, n in enumerate(names):
        lines.append(n + "," + ",".join(format_value(v) for v in r[i]))
    lines.append("")
    lines.append("target,group,min,q1,median,q3,max")
    router = ds.X[:, FEATURES.index("Group.router")]
    for t in TARGETS:
        y = ds.target(t)
        for group, mask in (("all", np.ones(len(y), bool)), ("Epidemic", router == 0),
                            ("MaxProp", router == 1)):
            if mask.any():
                b = box_stats(y[mask])
                lines.append(",".join([t, group] + [format_value(v) for v in
                                      (b.minimum, b.q1, b.median, b.q3, b.maximum)]))
    _out(args, "\n".join(lines) + "\n")


# -------------------------------------------------------------------- main

def build_parser():
    p = _Parser(prog="dtnopt", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("convert", help="taxi GPS fixes -> external movement file")
    c.add_argument("--input", required=True, help="CSV of fixes or a cabspotting directory")
    c.add_argument("--day", default="2008-05-21")
    c.add_argument("--world", type=float, nargs=2, default=(10000.0, 10000.0))
    c.add_argument("--geo", type=float, nargs=4, metavar=("MIN_LAT", "MAX_LAT", "MIN_LON", "MAX_LON"))
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_convert)

    g = sub.add_parser("gen-trace", help="random-waypoint synthetic trace")
    g.add_argument("--nodes", type=int, default=20)
    g.add_argument("--duration", type=float, default=1800.0)
    g.add_argument("--world", type=float, nargs=2, default=(1000.0, 1000.0))
    g.add_argument("--speed", type=_pair, default=(5.0, 15.0))
    g.add_argument("--pause", type=_pair, default=(0.0, 60.0))
    g.add_argument("--period", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_trace)

    s = sub.add_parser("simulate", help="run one scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--trace")
    s.add_argument("--seed", type=int)
    s.add_argument("--log", help="write the event log here")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="many runs -> dataset CSV")
    w.add_argument("--config", required=True, help="engine settings and Movement.file")
    w.add_argument("--trace")
    w.add_argument("--runs", type=int, default=100)
    w.add_argument("--mode", choices=("random", "grid"), default="random")
    w.add_argument("--levels", type=int, default=2)
    w.add_argument("--bounds", action="append", metavar="NAME=LOW:HIGH")
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    for name, func, helptext in (("train", cmd_train, "fit surrogates and report metrics"),
                                 ("tune", cmd_tune, "k-fold grid search"),
                                 ("select", cmd_select, "feature importances and top-k")):
        m = sub.add_parser(name, help=helptext)
        m.add_argument("--dataset", required=True)
        m.add_argument("--model", choices=("rf", "gbm"), default="rf")
        m.add_argument("--target", choices=("both",) + TARGETS, default="both")
        m.add_argument("--profile", choices=("reference", "tuned", "default"), default="reference")
        m.add_argument("--param", action="append", metavar="KEY=VALUE")
        m.add_argument("--test-fraction", type=float)
        m.add_argument("--model-dir", default="models")
        m.add_argument("--seed", type=int, default=0)
        m.add_argument("--out")
        if name == "tune":
            m.add_argument("--grid", help="JSON object or file mapping param -> values")
            m.add_argument("--folds", type=int, default=5)
        if name == "select":
            m.add_argument("--k", type=int, default=5)
        m.set_defaults(func=func)

    for name, func in (("optimize", cmd_optimize), ("validate", cmd_validate)):
        o = sub.add_parser(name, help="differential evolution over the surrogates"
                           + (" and re-simulation" if name == "validate" else ""))
        o.add_argument("--delivery-model", required=True)
        o.add_argument("--overhead-model", required=True)
        o.add_argument("--dataset", required=True, help="sets the min-max scaling ranges")
        o.add_argument("--weights", type=_pair, default=(0.5, 0.5), metavar="WD,WO")
        o.add_argument("--bounds", action="append", metavar="NAME=LOW:HIGH")
        o.add_argument("--popsize", type=int, default=15)
        o.add_argument("--F", type=float, default=0.8)
        o.add_argument("--CR", type=float, default=0.9)
        o.add_argument("--generations", type=int, default=200)
        o.add_argument("--seed", type=int, default=0)
        o.add_argument("--out")
        if name == "validate":
            o.add_argument("--config", required=True)
            o.add_argument("--trace")
            o.add_argument("--append", help="append the validated row to this dataset CSV")
        o.set_defaults(func=func)

    a = sub.add_parser("analyze", help="Pearson matrix and box statistics as CSV")
    a.add_argument("--dataset", required=True)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"dtnopt: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, ConfigError, DatasetError) as exc:
        print(f"dtnopt: error: {exc}", file=sys.stderr)
        return 1
    except (DTNError, OSError, ValueError) as exc:
        print(f"dtnopt: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
