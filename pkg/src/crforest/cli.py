"""Command-line interface: train, predict, evaluate, simulate, benchmark.

Exit codes: 0 success, 1 usage/configuration error, 2 data error, 3 I/O error.
Any flag may also come from ``--config FILE`` holding ``key = value`` lines
(keys are flag names without leading dashes). ``RCRF_CORES`` sets the
default worker count.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import persistence
from .data import ConfigurationError, DataParseError, SchemaError, load_csv, load_covariates
from .forest import DEFAULT_MAX_NODE_DEPTH, Forest, TrainingParameters, predict_oob, train
from .metrics import DEFAULT_CIF_TAU, cif_error, naive_concordance
from .simulation import generate, true_cif
from .splitting import SplitFinderSpec
from .stepfunction import StepFunction

EXIT_USAGE, EXIT_DATA, EXIT_IO = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    return [int(x) for x in str(text).replace(" ", "").split(",") if x]


def _str_list(text):
    return [x.strip() for x in str(text).split(",") if x.strip()]


def _default_cores():
    env = os.environ.get("RCRF_CORES")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _atomic_text(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    tmp.write_text(text)
    os.replace(tmp, path)


def _emit(record, as_json, out=None):
    out = out or sys.stdout
    if as_json:
        out.write(json.dumps(record, sort_keys=True) + "\n")
    else:
        out.write("  ".join(f"{k}={v}" for k, v in record.items()) + "\n")


# ---------------------------------------------------------------------------
# train


def _training_parameters(args, n_events):
    focus = args.focus or list(range(1, n_events + 1))
    spec = SplitFinderSpec.for_events(args.split_finder, n_events, focus)
    return TrainingParameters(ntree=args.ntree, mtry=args.mtry, number_of_splits=args.nsplit,
                              node_size=args.node_size, max_node_depth=args.max_depth,
                              split_finder=spec, random_seed=args.seed, cores=args.cores,
                              save_path=args.out)


def cmd_train(args):
    if args.split_finder == "gray" and not args.censor_time:
        raise UsageError("--split-finder gray requires --censor-time (the Gray split "
                         "finder needs the censor time of every subject)")
    dataset = load_csv(args.data, args.time, args.event, args.censor_time,
                       features=args.features, schema_overrides=_overrides(args))
    params = _training_parameters(args, dataset.n_events).resolve(dataset)
    resolved = dict(params.model_dict(), cores=params.cores, out=str(args.out),
                    data=str(args.data))
    _emit({"resolved_config": resolved}, True)
    start = time.perf_counter()
    done = []

    def progress(i):
        done.append(i)
        if not args.quiet:
            print(f"tree {i} done ({len(done)}/{params.ntree}, "
                  f"{time.perf_counter() - start:.2f}s)", flush=True)

    train(dataset, params, progress=progress)
    print(f"trained {params.ntree} trees in {time.perf_counter() - start:.3f}s")
    return 0


def _overrides(args):
    out = {}
    for name in args.categorical or []:
        out[name] = "categorical"
    return out


# ---------------------------------------------------------------------------
# predict


def cmd_predict(args):
    forest = Forest.load(args.model)
    if args.oob:
        dataset = load_csv(args.data, args.time_column, args.event_column, args.censor_column,
                           schema=forest.columns)
        if dataset.content_hash() != forest.data_hash:
            raise UsageError("--oob requires the exact training data of this model")
        preds = predict_oob(forest, dataset, args.seed)
    else:
        X = load_covariates(args.data, forest.columns)
        preds = forest.predict(X, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    wanted = []
    if args.survival:
        wanted.append(("survival", lambda f: f.survival))
    for j in args.cif or []:
        wanted.append((f"cif_{j}", lambda f, j=j: f.cif(j)))
    for j in args.chf or []:
        wanted.append((f"chf_{j}", lambda f, j=j: f.chf(j)))
    for j in (args.cif or []) + (args.chf or []) + (args.event or []):
        if not 1 <= j <= forest.n_events:
            raise UsageError(f"event {j} is not in 1..{forest.n_events}")
    if wanted:
        for name, _ in wanted:
            (out / name).mkdir(exist_ok=True)
        for i, f in enumerate(preds):
            if f is None:
                continue
            for name, get in wanted:
                _atomic_text(out / name / f"{i}.tsv", get(f).to_text())
    if args.mortality:
        events = args.event or list(range(1, forest.n_events + 1))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row_id", "event", "mortality"])
        morts = {j: preds.mortality(j, args.tau) for j in events}
        for i in range(len(preds)):
            for j in events:
                m = morts[j][i]
                w.writerow([i, j, "NA" if np.isnan(m) else repr(float(m))])
        _atomic_text(out / "mortality.csv", buf.getvalue())
    n_missing = int(np.sum(preds.n_trees == 0))
    print(f"predicted {len(preds)} rows{' (out-of-bag)' if args.oob else ''}"
          f"{f'; {n_missing} rows have no out-of-bag trees' if n_missing else ''}")
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _read_mortality_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    table = {}
    for r in rows:
        table.setdefault(int(r["event"]), {})[int(r["row_id"])] = (
            np.nan if r["mortality"] == "NA" else float(r["mortality"]))
    return table


def cmd_evaluate(args):
    if args.mode == "concordance":
        truth = load_csv(args.truth, args.time_column, args.event_column,
                         features=[]).response
        table = _read_mortality_table(args.predictions)
        events = sorted(table)
        morts = []
        for j in events:
            col = table[j]
            if sorted(col) != list(range(len(truth))):
                raise DataParseError(f"mortality rows for event {j} do not align with the truth")
            morts.append(np.array([col[i] for i in range(len(truth))]))
        keep = np.all([~np.isnan(m) for m in morts], axis=0)
        errors = naive_concordance(truth.time[keep], truth.event[keep], [m[keep] for m in morts])
        for j, e in zip(events, errors):
            _emit({"metric": "naive_concordance_error", "event": j,
                   "value": None if np.isnan(e) else float(e)}, args.json)
        return 0

    with open(args.truth, newline="") as fh:
        regions = [int(r["region"]) for r in csv.DictReader(fh)]
    n = len(regions)
    pred_dir = Path(args.predictions)
    events = sorted(int(p.name.split("_")[1]) for p in pred_dir.glob("cif_*") if p.is_dir())
    if not events:
        raise DataParseError(f"no cif_<j> directories under {pred_dir}")
    truths, preds = [], []
    for j in events:
        files = sorted(pred_dir.glob(f"cif_{j}/*.tsv"), key=lambda p: int(p.stem))
        if [int(p.stem) for p in files] != list(range(n)):
            raise DataParseError(f"cif_{j} predictions do not align with the {n} truth rows")
        preds.append([StepFunction.from_text(p.read_text(), 0.0) for p in files])
        truths.append([true_cif(r, j) for r in regions])
    per_row, per_event, overall = cif_error(truths, preds, args.tau)
    for j, e in zip(events, per_event):
        _emit({"metric": "cif_error", "event": j, "value": float(e)}, args.json)
    _emit({"metric": "cif_error", "event": "all", "value": overall}, args.json)
    return 0


# ---------------------------------------------------------------------------
# simulate / benchmark


def write_simulated(sim, path):
    path = Path(path)
    d = sim.dataset
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "status", "censor_time"] + d.feature_names)
    for i in range(d.n):
        w.writerow([repr(float(d.response.time[i])), int(d.response.event[i]),
                    repr(float(d.response.censor_time[i]))]
                   + [repr(float(v)) for v in d.X[i]])
    _atomic_text(path, buf.getvalue())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row_id", "region"])
    for i, r in enumerate(sim.region):
        w.writerow([i, int(r)])
    truth = truth_path(path)
    _atomic_text(truth, buf.getvalue())
    return truth


def truth_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".truth.csv")


def cmd_simulate(args):
    sim = generate(args.n, args.seed, n_noise=args.noise)
    truth = write_simulated(sim, args.out)
    print(f"wrote {args.n} rows to {args.out} and regions to {truth}")
    return 0


def run_benchmark(sizes, params, repeats, seed=0, out=None):
    """Time train + predict for each size; returns rows of (n, min, median, max)."""
    out = out or sys.stdout
    table = []
    for n in sizes:
        times = []
        for r in range(repeats):
            train_data = generate(n, [seed, n, r, 0]).dataset
            test_data = generate(n, [seed, n, r, 1]).dataset
            p = TrainingParameters(**{**params.__dict__, "random_seed": seed + r})
            start = time.perf_counter()
            forest = train(train_data, p)
            preds = forest.predict(test_data.X)
            for j in range(1, forest.n_events + 1):
                preds.mortality(j, DEFAULT_CIF_TAU)
            times.append(time.perf_counter() - start)
        table.append((n, min(times), statistics.median(times), max(times)))
    out.write(f"{'n':>10} | {'Min.':>9} {'Median':>9} {'Max.':>9}\n")
    out.write("-" * 44 + "\n")
    for n, lo, med, hi in table:
        out.write(f"{n:>10} | {lo:9.2f} {med:9.2f} {hi:9.2f}\n")
    return table


def cmd_benchmark(args):
    spec = SplitFinderSpec.for_events(args.split_finder, 2, args.focus)
    params = TrainingParameters(ntree=args.ntree, mtry=args.mtry, number_of_splits=args.nsplit,
                                node_size=args.node_size, max_node_depth=args.max_depth,
                                split_finder=spec, cores=args.cores)
    table = run_benchmark(args.sizes, params, args.repeats, args.seed)
    if args.json:
        for n, lo, med, hi in table:
            _emit({"n": n, "min": lo, "median": med, "max": hi}, True)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_forest_flags(p):
    p.add_argument("--ntree", type=int, default=100)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--nsplit", type=int, default=0, help="0 tries every split")
    p.add_argument("--node-size", type=int, default=15)
    p.add_argument("--max-depth", type=int, default=DEFAULT_MAX_NODE_DEPTH)
    p.add_argument("--split-finder", choices=["logrank", "gray"], default="logrank")
    p.add_argument("--focus", type=_int_list, default=None,
                   help="comma-separated events of focus (default: all)")
    p.add_argument("--cores", type=int, default=_default_cores())


def build_parser():
    parser = _Parser(prog="crforest", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value file supplying default flags")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="grow a forest and save it")
    p.add_argument("--data", required=True)
    p.add_argument("--time", default="time")
    p.add_argument("--event", default="status")
    p.add_argument("--censor-time", default=None)
    p.add_argument("--features", type=_str_list, default=None)
    p.add_argument("--categorical", type=_str_list, default=None)
    _add_forest_flags(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict curves and mortalities")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--oob", action="store_true", help="out-of-bag predictions of training data")
    p.add_argument("--time-column", default="time")
    p.add_argument("--event-column", default="status")
    p.add_argument("--censor-column", default=None)
    p.add_argument("--survival", action="store_true")
    p.add_argument("--cif", type=int, action="append")
    p.add_argument("--chf", type=int, action="append")
    p.add_argument("--mortality", action="store_true")
    p.add_argument("--event", type=int, action="append", help="mortality event (repeatable)")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--seed", type=int, default=None, help="seed for routing missing values")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="concordance or CIF error of predictions")
    p.add_argument("--truth", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--mode", choices=["concordance", "cif-error"], default="concordance")
    p.add_argument("--time-column", default="time")
    p.add_argument("--event-column", default="status")
    p.add_argument("--tau", type=float, default=DEFAULT_CIF_TAU)
    p.add_argument("--json", action="store_true", help="line-delimited JSON output")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="write a synthetic dataset and its truth sidecar")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=int, default=0, help="extra uninformative covariates")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="time train + predict on generated data")
    p.add_argument("--sizes", type=_int_list, default=[1000, 10000])
    p.add_argument("--repeats", type=int, default=10)
    _add_forest_flags(p)
    p.set_defaults(nsplit=1000, node_size=500, mtry=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_benchmark)
    return parser


def read_config(path):
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    config = read_config(known.config)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in sub.choices.values():
        dests = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, value in config.items():
            action = dests.get(key)
            if action is None:
                continue
            if action.const is True and action.nargs == 0:
                defaults[key] = value.lower() in ("1", "true", "yes")
            elif isinstance(action, argparse._AppendAction):
                defaults[key] = _int_list(value) if action.type is int else _str_list(value)
            elif action.type is not None:
                defaults[key] = action.type(value)
            else:
                defaults[key] = value
        # config values satisfy required flags; explicit flags still win
        for key in defaults:
            dests[key].required = False
        sp.set_defaults(**defaults)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if getattr(args, "tau", 1.0) is None:
            args.tau = None
        if args.command == "predict" and args.mortality and args.tau is None:
            raise UsageError("--mortality requires --tau")
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"crforest: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, DataParseError) as exc:
        print(f"crforest: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, persistence.FormatError) as exc:
        print(f"crforest: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
