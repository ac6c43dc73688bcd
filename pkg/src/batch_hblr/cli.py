"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data/model-file error, 3 numerical
failure.
"""
import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import fileio, simulators
from .errors import HBLRError, InvalidInputError, NumericalFailure
from .predictor import evaluate, predict_averaged, predict_distribution
from .segmentation import INPUT_SCALINGS, train_segmented
from .trainer import HyperParams

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

RUN_KEYS = ("segments", "overlap_blocks", "seed", "jobs", "input_scaling")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    params: HyperParams = field(default_factory=HyperParams)
    segments: int = 1
    overlap_blocks: int = 1
    seed: int = 0
    jobs: int = 0
    input_scaling: str = "unit_diagonal"

    @classmethod
    def from_tree(cls, tree):
        """Build from a parsed config file; unknown keys are rejected."""
        if not isinstance(tree, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(tree) - set(RUN_KEYS) - {"hyperparams"}
        if unknown:
            raise UsageError(f"unknown config key(s): {sorted(unknown)}")
        hp = tree.get("hyperparams", {})
        if not isinstance(hp, dict):
            raise UsageError("'hyperparams' must be an object")
        unknown = set(hp) - set(HyperParams.field_names())
        if unknown:
            raise UsageError(f"unknown hyperparameter(s): {sorted(unknown)}")
        cfg = cls(params=HyperParams(**hp),
                  **{k: tree[k] for k in RUN_KEYS if k in tree})
        if cfg.input_scaling not in INPUT_SCALINGS:
            raise UsageError(f"input_scaling must be one of {INPUT_SCALINGS}")
        return cfg


def load_config(path):
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        try:
            tree = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
    return RunConfig.from_tree(tree)


def _fmt(v):
    return "%.10g" % v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"{text} is negative")
    return v


def cmd_simulate(args, out):
    overrides = {k: v for k, v in (("dt", args.dt), ("duration", args.duration))
                 if v is not None}
    if args.system == "msd":
        cfg = simulators.msd_config(seed=args.seed, noise=not args.no_noise, **overrides)
        traj = simulators.simulate_msd(cfg)
        data = simulators.make_supervised(traj)
    else:
        cfg = simulators.dipc_config(seed=args.seed, noise=not args.no_noise, **overrides)
        traj = simulators.simulate_dipc(cfg)
        data = simulators.make_supervised(traj, include_control=True)
    fileio.write_dataset(args.out, data)
    print(f"wrote {len(data)} rows to {args.out}", file=out)


def cmd_split(args, out):
    data = fileio.read_dataset(args.data)
    train, test = simulators.train_test_split(data, args.test_fraction, args.seed)
    fileio.write_dataset(args.train_out, train)
    fileio.write_dataset(args.test_out, test)
    print(f"train {len(train)} rows -> {args.train_out}; "
          f"test {len(test)} rows -> {args.test_out}", file=out)


def training_report(data, seg_model, metric="nmse"):
    """Tab-separated per-response training summary."""
    res = evaluate(data, seg_model, metric=metric, timed=False)
    lines = ["\t".join(["response", f"{metric}_train", "n_local_models", "iterations"])]
    for name, v, n, it in zip(seg_model.response_names, res.values,
                              seg_model.local_model_counts(), seg_model.iterations()):
        lines.append("\t".join([name, _fmt(v), str(n), str(it)]))
    return "\n".join(lines) + "\n"


def cmd_train(args, out):
    cfg = load_config(args.config)
    overrides = {}
    if args.max_iters is not None:
        overrides["max_iters"] = args.max_iters
    params = cfg.params.updated(**overrides)
    for key in ("segments", "seed", "jobs"):
        if getattr(args, key) is not None:
            setattr(cfg, key, getattr(args, key))
    data = fileio.read_dataset(args.data)
    jobs = cfg.jobs or min(data.response_dim, os.cpu_count() or 1)
    seg_model = train_segmented(data, params, cfg.segments, cfg.overlap_blocks,
                                rng_seed=cfg.seed, jobs=jobs,
                                input_scaling=cfg.input_scaling)
    fileio.save_model(args.model_out, seg_model)
    metric = "nmse" if all(np.var(data.responses, axis=0) > 0) else "mse"
    out.write(training_report(data, seg_model, metric))


def cmd_eval(args, out):
    seg_model = fileio.load_model(args.model)
    data = fileio.read_dataset(args.data)
    res = evaluate(data, seg_model, metric=args.metric)
    out.write("\t".join(["response", args.metric]) + "\n")
    for name, v in zip(seg_model.response_names, res.values):
        out.write(f"{name}\t{_fmt(v)}\n")
    out.write(f"# prediction_time_ms\t{res.ms_per_query:.6f}\n")


def _read_queries(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.startswith(fileio.ROLES_PREFIX):
        return fileio.dataset_from_text(text).inputs
    rows = [r for r in (line.strip() for line in text.splitlines()) if r]
    values = []
    for i, row in enumerate(rows):
        cells = row.split(",")
        try:
            values.append([float(c) for c in cells])
        except ValueError:
            if i == 0:
                continue  # header
            raise InvalidInputError(f"cannot parse query row {i + 1}: {row!r}") from None
    if not values:
        raise InvalidInputError("query file holds no rows")
    if len({len(v) for v in values}) != 1:
        raise InvalidInputError("query rows have differing lengths")
    return np.array(values)


def cmd_predict(args, out):
    seg_model = fileio.load_model(args.model)
    if args.x is not None:
        try:
            X = np.array([[float(v) for v in args.x.split(",")]])
        except ValueError:
            raise UsageError(f"--x expects comma-separated reals, got {args.x!r}") from None
    else:
        X = _read_queries(args.input)
    if X.shape[1] != seg_model.input_dim:
        raise InvalidInputError(
            f"queries have {X.shape[1]} values, model expects {seg_model.input_dim}")
    names = list(seg_model.response_names)
    header = names + ([f"{n}_var" for n in names] if args.with_variance else [])
    out.write("\t".join(header) + "\n")
    for x in X:
        if args.with_variance:
            mean, var = predict_distribution(x, seg_model)
            cells = list(mean) + list(var)
        else:
            cells = predict_averaged(x, seg_model)
        out.write("\t".join(_fmt(v) for v in cells) + "\n")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="batch-hblr", description=(
        "Local Bayesian linear regression for stochastic dynamics."))
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a benchmark system to a dataset file")
    s.add_argument("system", choices=["msd", "dipc"])
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--dt", type=_positive_float)
    s.add_argument("--duration", type=_positive_float)
    s.add_argument("--no-noise", action="store_true")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("split", help="random train/test split of a dataset file")
    s.add_argument("data")
    s.add_argument("--train-out", required=True)
    s.add_argument("--test-out", required=True)
    s.add_argument("--test-fraction", type=float, default=0.33)
    s.add_argument("--seed", type=_seed, default=0)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", help="train a model and print the training report")
    s.add_argument("data")
    s.add_argument("--config")
    s.add_argument("--model-out", required=True)
    s.add_argument("--max-iters", type=_nonneg_int)
    s.add_argument("--jobs", type=_nonneg_int)
    s.add_argument("--seed", type=_seed)
    s.add_argument("--segments", type=_nonneg_int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a model on a dataset file")
    s.add_argument("data")
    s.add_argument("--model", required=True)
    s.add_argument("--metric", choices=["nmse", "mse"], default="nmse")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("predict", help="predict responses for query points")
    s.add_argument("--model", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--x", help="comma-separated input values")
    g.add_argument("--input", help="CSV file with one query per row")
    s.add_argument("--with-variance", action="store_true")
    s.set_defaults(func=cmd_predict)
    return p


def _attach_values(argv):
    # lets "--x -1.5,2" through; argparse would read "-1.5,2" as an option
    argv = list(sys.argv[1:] if argv is None else argv)
    out = []
    i = 0
    while i < len(argv):
        if argv[i] == "--x" and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"--x={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(_attach_values(argv))
    try:
        args.func(args, out)
    except UsageError as exc:
        print(f"batch-hblr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"batch-hblr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HBLRError as exc:
        print(f"batch-hblr: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"batch-hblr: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
