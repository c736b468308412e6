"""``stoplab`` command line.

Exit codes: 0 success, 1 internal error, 2 usage, 3 unreadable input file,
4 schema-invalid data or config, 5 empty dataset, 6 calibration failure.
Errors are reported on stderr as a single JSON object.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import _fmt, learning_curves, stopping_curves, write_rows
from .distributions import (CalibrationError, DistributionSpec, GapStatistics,
                            build_calibration, calibrate_shape, fingerprint, get_spec)
from .engine import DecisionLog, LogFormatError, OutcomeTable, run_cohort
from .inference import (DEFAULT_MODELS, MODEL_CLASSES, DecisionData, EmptyDatasetError,
                        PriorSpec, SamplerConfig, SplitSpec, compare_models, make_model,
                        sample_posterior)
from .inference.evidence import REPORT_COLUMNS
from .policies import PolicyParams, lp_agent_params, optimal_policy_from_table
from .solver import classical_table, critical_value_table

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_UNREADABLE, EXIT_SCHEMA, EXIT_EMPTY, EXIT_CALIB = range(7)

LEARNING_COLUMNS = ("game_number", "players", "win_rate", "win_se", "early_rate", "early_se",
                    "late_rate", "late_se", "mean_depth", "depth_se")
CURVE_COLUMNS = ("group", "bin_lo", "bin_hi", "count", "stop_rate", "se")
RUN_CONFIG_KEYS = {"boxes", "dist", "players", "games", "seed", "policy", "percentiles",
                   "out_dir", "draws", "burn", "splits", "test_fraction", "model", "models",
                   "data", "game", "lam_mean", "estimator", "bin_width", "outcomes", "out"}


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, "usage", message)


def _report(err: CliError) -> None:
    print(json.dumps({"error": err.kind, "message": str(err), "exit_code": err.code}),
          file=sys.stderr)


def _emit(rows, columns, out):
    if out in (None, "-"):
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])
    else:
        write_rows(rows, out, columns)


def _read_log(path) -> DecisionLog:
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_UNREADABLE, "unreadable_file", f"cannot read {path}")
    try:
        return DecisionLog.read_csv(p)
    except LogFormatError as e:
        if "empty file" in str(e):
            raise CliError(EXIT_EMPTY, "empty_dataset", f"empty dataset: {path}") from None
        raise CliError(EXIT_SCHEMA, "schema_invalid", str(e)) from None
    except (OSError, UnicodeDecodeError) as e:
        raise CliError(EXIT_UNREADABLE, "unreadable_file", str(e)) from None


def _dist(arg) -> DistributionSpec:
    if arg in ("low", "medium", "high"):
        return get_spec(arg)
    p = Path(arg)
    if not p.is_file():
        raise CliError(EXIT_UNREADABLE, "unreadable_file", f"cannot read distribution {arg}")
    try:
        return DistributionSpec.from_dict(json.loads(p.read_text()))
    except (ValueError, TypeError, KeyError) as e:
        raise CliError(EXIT_SCHEMA, "schema_invalid", f"distribution spec: {e}") from None


def _policy(arg, T):
    if arg in ("lp", "optimal", "optimal_step"):
        table = critical_value_table(max(T, 2))
        if arg == "lp" or arg == "optimal_step":
            return lp_agent_params(table, T)
        return optimal_policy_from_table(table, T)
    p = Path(arg)
    if not p.is_file():
        raise CliError(EXIT_UNREADABLE, "unreadable_file", f"cannot read policy {arg}")
    try:
        params = PolicyParams.from_dict(json.loads(p.read_text()))
    except (ValueError, TypeError) as e:
        raise CliError(EXIT_SCHEMA, "schema_invalid", f"policy: {e}") from None
    if params.horizon != T:
        raise CliError(EXIT_SCHEMA, "schema_invalid",
                       f"policy horizon {params.horizon} != --boxes {T}")
    return params


def _horizon(args, log) -> int:
    if len(log) == 0:
        raise CliError(EXIT_EMPTY, "empty_dataset", "empty dataset")
    if args.boxes:
        return args.boxes
    if not np.any(log.forced):
        raise CliError(EXIT_SCHEMA, "schema_invalid",
                       "cannot infer the number of boxes; pass --boxes")
    return int(log.box_index[log.forced].max())


def _data_for(log, game):
    data = DecisionData.from_log(log)
    if game is not None:
        data = data.subset(data.game_number == game)
    if len(data) == 0:
        raise CliError(EXIT_EMPTY, "empty_dataset", "empty dataset")
    return data


def _sampler(args):
    return SamplerConfig(draws=args.draws, burn=args.burn, seed=args.seed)


# -- subcommands ---------------------------------------------------------------

def cmd_solve_critical(args):
    table = critical_value_table(args.t_max)
    rows = [{"t": t, "z": z, "p0": p} for t, z, p in table.rows()]
    _emit(rows, ("t", "z", "p0"), args.out)


def cmd_solve_classical(args):
    table = classical_table(args.t_max)
    rows = [{"T": T, "best_k": k, "p_win": p} for T, k, p in table.rows()]
    _emit(rows, ("T", "best_k", "p_win"), args.out)


def cmd_calibrate(args):
    try:
        if args.gap is not None:
            spec = calibrate_shape(GapStatistics(args.horizon, args.gap), label=args.label,
                                   replicates=args.replicates, seed=args.seed)
            payload = spec.to_dict()
        else:
            payload = build_calibration(args.seed, args.replicates, args.horizon)
    except CalibrationError as e:
        raise CliError(EXIT_CALIB, "calibration_failed", str(e)) from None
    text = json.dumps(payload, indent=2) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def cmd_simulate(args):
    _require(args, "seed")
    T = args.boxes
    if not 2 <= T <= 15:
        raise CliError(EXIT_SCHEMA, "schema_invalid", "--boxes must be in 2..15")
    spec = _dist(args.dist)
    policy = _policy(args.policy, T)
    res = run_cohort(policy, spec, T, args.players, args.games, args.seed, args.percentiles)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res.log.to_csv(out / "decisions.csv")
    res.outcomes.to_csv(out / "outcomes.csv")
    write_rows(res.learning_curves(), out / "learning_curve.csv", LEARNING_COLUMNS)
    manifest = {"schema": "stoplab.simulate", "schema_version": 1,
                "distributions": fingerprint(), "policy": policy.to_dict(),
                "distribution": spec.to_dict(), "boxes": T, "players": args.players,
                "games": args.games, "seed": args.seed, "percentiles": args.percentiles,
                "files": ["decisions.csv", "outcomes.csv", "learning_curve.csv"]}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_fit(args):
    _require(args, "seed")
    log = _read_log(args.data)
    T = _horizon(args, log)
    data = _data_for(log, args.game)
    model = make_model(args.model, T, PriorSpec(lam_mean=args.lam_mean))
    post = sample_posterior(model, data, _sampler(args))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [dict(zip(post.names, map(float, r))) for r in post.draws]
    write_rows(rows, out / "posterior.csv", list(post.names))
    summary = {"schema": "stoplab.fit", "schema_version": 1, "model": args.model,
               "boxes": T, "game": args.game, "n_decisions": len(data),
               "seed": args.seed, "draws": args.draws, "burn": args.burn,
               "parameters": post.summary(), "diagnostics": post.diagnostics}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def cmd_compare(args):
    log = _read_log(args.data)
    T = _horizon(args, log)
    names = DEFAULT_MODELS if args.models == "all" else tuple(args.models.split(","))
    bad = [n for n in names if n not in MODEL_CLASSES]
    if bad:
        raise CliError(EXIT_SCHEMA, "schema_invalid", f"unknown models {bad}")
    games = [args.game] if args.game is not None else None
    if len(DecisionData.from_log(log)) == 0:
        raise CliError(EXIT_EMPTY, "empty_dataset", "empty dataset")
    report = compare_models(list(names), log, T,
                            SplitSpec(args.test_fraction, args.splits, args.seed),
                            PriorSpec(lam_mean=args.lam_mean), _sampler(args), games,
                            args.estimator)
    text = report.to_json() + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
        write_rows(report.rows, Path(args.out).with_suffix(".csv"), REPORT_COLUMNS)


def cmd_curves(args):
    log = _read_log(args.data)
    T = _horizon(args, log)
    table = critical_value_table(max(T, 2))
    rows = stopping_curves(log, table, T, bin_width=args.bin_width)
    _emit(rows, CURVE_COLUMNS, args.out)
    if args.outcomes:
        p = Path(args.outcomes)
        if not p.is_file():
            raise CliError(EXIT_UNREADABLE, "unreadable_file", f"cannot read {p}")
        try:
            outcomes = OutcomeTable.read_csv(p)
        except LogFormatError as e:
            raise CliError(EXIT_SCHEMA, "schema_invalid", str(e)) from None
        dest = Path(args.out).with_name(Path(args.out).stem + "_learning.csv") \
            if args.out not in (None, "-") else "-"
        _emit(learning_curves(outcomes), LEARNING_COLUMNS, dest)


def _require(args, name):
    if getattr(args, name) is None:
        raise CliError(EXIT_USAGE, "usage", f"--{name} is required")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stoplab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="store_true",
                   help="print version and calibrated-distribution fingerprint")
    p.add_argument("--config", help="JSON run config; keys mirror the long flags")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("solve-critical", help="critical values and win probabilities")
    s.add_argument("--t-max", type=int, default=15)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve_critical)

    s = sub.add_parser("solve-classical", help="classical secretary optimum")
    s.add_argument("--t-max", type=int, default=15)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve_classical)

    s = sub.add_parser("calibrate-dist", help="calibrate power-family shapes to gap targets")
    s.add_argument("--gap", type=float, help="single target gap; omit to rebuild low/high")
    s.add_argument("--label", default="other")
    s.add_argument("--horizon", type=int, default=15)
    s.add_argument("--replicates", type=int, default=200_000)
    s.add_argument("--seed", type=int, default=20240101)
    s.add_argument("--out")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("simulate", help="simulate a cohort of players")
    s.add_argument("--policy", default="lp", help="lp, optimal or a policy JSON file")
    s.add_argument("--boxes", type=int, default=7)
    s.add_argument("--dist", default="medium", help="low, medium, high or a spec JSON file")
    s.add_argument("--players", type=int, default=1000)
    s.add_argument("--games", type=int, default=20)
    s.add_argument("--seed", type=int)
    s.add_argument("--percentiles", choices=("learned", "exact"), default="learned")
    s.add_argument("--out-dir", default="simulation")
    s.set_defaults(func=cmd_simulate)

    def sampler_flags(s):
        s.add_argument("--data", required=True)
        s.add_argument("--boxes", type=int)
        s.add_argument("--game", type=int)
        s.add_argument("--draws", type=int, default=25_000)
        s.add_argument("--burn", type=int, default=5_000)
        s.add_argument("--lam-mean", type=float, default=1000.0)

    s = sub.add_parser("fit", help="posterior samples for one model")
    s.add_argument("--model", required=True, choices=sorted(MODEL_CLASSES))
    sampler_flags(s)
    s.add_argument("--seed", type=int)
    s.add_argument("--out-dir", default="fit")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("compare", help="cross-validated Bayes factors")
    s.add_argument("--models", default="all")
    sampler_flags(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--splits", type=int, default=10)
    s.add_argument("--test-fraction", type=float, default=0.2)
    s.add_argument("--estimator", choices=("direct", "bronze"), default="direct")
    s.add_argument("--out")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("curves", help="stopping curves relative to critical values")
    s.add_argument("--data", required=True)
    s.add_argument("--boxes", type=int)
    s.add_argument("--bin-width", type=float, default=0.05)
    s.add_argument("--outcomes", help="outcome CSV; also writes learning curves")
    s.add_argument("--out")
    s.set_defaults(func=cmd_curves)
    return p


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    p = Path(known.config)
    try:
        cfg = json.loads(p.read_text())
    except OSError as e:
        raise CliError(EXIT_UNREADABLE, "unreadable_file", str(e)) from None
    except json.JSONDecodeError as e:
        raise CliError(EXIT_SCHEMA, "schema_invalid", f"config: {e}") from None
    if not isinstance(cfg, dict) or set(cfg) - RUN_CONFIG_KEYS - {"subcommand"}:
        extra = sorted(set(cfg) - RUN_CONFIG_KEYS - {"subcommand"}) if isinstance(cfg, dict) else cfg
        raise CliError(EXIT_SCHEMA, "schema_invalid", f"config: unknown keys {extra}")
    cfg.pop("subcommand", None)
    for action in parser._subparsers._group_actions[0].choices.values():
        action.set_defaults(**cfg)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if args.version:
            print(f"stoplab {__version__} distributions {fingerprint()}")
            return EXIT_OK
        if not getattr(args, "command", None):
            raise CliError(EXIT_USAGE, "usage", "missing subcommand")
        args.func(args)
    except CliError as e:
        _report(e)
        return e.code
    except EmptyDatasetError as e:
        _report(CliError(EXIT_EMPTY, "empty_dataset", str(e)))
        return EXIT_EMPTY
    except (LogFormatError, ValueError) as e:
        _report(CliError(EXIT_SCHEMA, "schema_invalid", str(e)))
        return EXIT_SCHEMA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
