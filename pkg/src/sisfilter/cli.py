"""Command-line interface: ``sisfilter validate|simulate|filter|compare``.

Exit codes: 0 success, 1 numeric or model failure, 2 usage or parse failure.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import is_model_document, load_scenario
from .errors import SISError
from .fileio import (DocumentError, fmt, load_json, load_model, read_trace_csv,
                     write_estimates_csv, write_json, write_metrics_csv, write_trace_csv)
from .model import validate_chain
from .nahi import DropoutSchedule
from .oracles import centralized_kalman
from .runner import run_filter, run_predictor
from .sim import mse, simulate

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
COMPARE_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def _probability(text):
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"probability must be in [0, 1], got {p}")
    return p


def _nonneg_int(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {n}")
    return n


def _pos_int(text):
    n = _nonneg_int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _load(args):
    return load_scenario(args.scenario, seed=args.seed, p=args.p, horizon=args.horizon)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_valid(model):
    report = validate_chain(model)
    if not report.ok:
        for line in report.lines():
            print(line)
        raise SISError("model failed validation")


def _pretty_table(header, rows):
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(h).rjust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(str(c).rjust(w) for c, w in zip(row, widths)) for row in rows]
    return "\n".join(lines)


def cmd_validate(args):
    doc = load_json(args.scenario)
    if is_model_document(doc):
        model = load_model(args.scenario)
    else:
        model = _load(args).model
    report = validate_chain(model)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_FAIL


def _metadata(loaded, args, command):
    return {
        "command": command,
        "version": __version__,
        "scenario_file": str(args.scenario),
        "overrides": {"seed": args.seed, "p": args.p, "horizon": args.horizon},
        "seed": loaded.scenario.seed,
        "resolved_scenario": loaded.doc,
    }


def cmd_simulate(args):
    loaded = _load(args)
    _require_valid(loaded.model)
    trace = simulate(loaded.scenario)
    out = _out_dir(args)
    write_trace_csv(trace, out / "trace.csv")
    write_json(_metadata(loaded, args, "simulate"), out / "trace.meta.json")
    print(f"wrote {out / 'trace.csv'} (seed {trace.seed}, {trace.horizon} steps)")
    return EXIT_OK


def _all_ones(schedule, model, horizon):
    return all(schedule.at(t, i) == 1.0 for t in range(1, horizon + 1)
               for i in range(1, model.length + 1))


def cmd_filter(args):
    loaded = _load(args)
    model, scen = loaded.model, loaded.scenario
    _require_valid(model)
    if args.trace:
        inputs = [np.array([scen.input_at(t, i) for t in range(1, scen.horizon + 1)])
                  .reshape(scen.horizon, model.dims[i - 1].n_u)
                  for i in range(1, model.length + 1)]
        trace = read_trace_csv(args.trace, model, seed=scen.seed, inputs=inputs)
        if trace.horizon != scen.horizon:
            raise DocumentError(str(args.trace), f"trace has {trace.horizon} steps, "
                                f"scenario expects {scen.horizon}")
    else:
        trace = simulate(scen)
    run = run_filter(model, trace, scen.schedule, loaded.filter_second_moment,
                     loaded.filter_mean, moments=args.moments)
    per_t, agg = mse(trace, run.estimates)
    pred = run_predictor(model, trace, loaded.filter_second_moment, loaded.filter_mean)
    _, pred_agg = mse(trace, pred.estimates)
    extra = [("predictor_mse_aggregate", pred_agg)]

    if args.oracle:
        if _all_ones(scen.schedule, model, scen.horizon):
            ref = centralized_kalman(model, trace, loaded.filter_mean,
                                     loaded.filter_second_moment, coupling="truth")
            dev = max(float(np.max(np.abs(a - b))) for a, b in zip(run.estimates, ref))
            extra.append(("oracle_max_deviation", dev))
            if model.length > 1:
                truth_run = run_filter(model, trace, scen.schedule, loaded.filter_second_moment,
                                       loaded.filter_mean, step1_truth=True)
                dev_truth = max(float(np.max(np.abs(a - b)))
                                for a, b in zip(truth_run.estimates, ref))
                extra.append(("oracle_max_deviation_step1_truth", dev_truth))
        else:
            print("oracle: not applicable (the Kalman reference needs p = 1 everywhere)",
                  file=sys.stderr)

    out = _out_dir(args)
    write_estimates_csv(run, out / "estimates.csv", moments=args.moments)
    write_metrics_csv(per_t, agg, out / "metrics.csv", extra=extra)
    write_json(_metadata(loaded, args, "filter"), out / "filter.meta.json")
    summary = [("mse_aggregate", fmt(agg))] + [(k, fmt(v)) for k, v in extra]
    if args.pretty:
        print(_pretty_table(("metric", "value"), summary))
    else:
        for k, v in summary:
            print(f"{k},{v}")
    return EXIT_OK


def compare_table(loaded, runs, levels=COMPARE_LEVELS):
    """Mean MSE per ``(p, method)`` over ``runs`` seeds ``seed, seed+1, ...``.

    The same seeds are used at every level, so the noise sequences are shared
    across levels and only the dropout indicators change.
    """
    base = loaded.scenario
    model = loaded.model
    rows = []
    for p in levels:
        sums = {"filter": 0.0, "predictor": 0.0, "oracle": 0.0}
        for r in range(runs):
            scen = replace(base, schedule=DropoutSchedule.constant(p), seed=base.seed + r)
            trace = simulate(scen)
            run = run_filter(model, trace, scen.schedule, loaded.filter_second_moment,
                             loaded.filter_mean)
            sums["filter"] += mse(trace, run.estimates)[1]
            pred = run_predictor(model, trace, loaded.filter_second_moment, loaded.filter_mean)
            sums["predictor"] += mse(trace, pred.estimates)[1]
            if p == 1.0:
                ref = centralized_kalman(model, trace, loaded.filter_mean,
                                         loaded.filter_second_moment, coupling="truth")
                sums["oracle"] += mse(trace, ref)[1]
        methods = ["filter", "predictor"] + (["oracle"] if p == 1.0 else [])
        rows += [(p, m, sums[m] / runs, runs) for m in methods]
    return rows


def cmd_compare(args):
    loaded = _load(args)
    _require_valid(loaded.model)
    rows = compare_table(loaded, args.runs)
    out = _out_dir(args)
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("p", "method", "mse", "runs"))
        for p, m, val, n in rows:
            w.writerow((fmt(p), m, fmt(val), n))
    write_json(_metadata(loaded, args, "compare") | {"runs": args.runs}, out / "compare.meta.json")

    filt = [val for p, m, val, _ in rows if m == "filter"]
    monotone = all(a >= b for a, b in zip(filt, filt[1:]))
    if args.pretty:
        print(_pretty_table(("p", "method", "mse", "runs"),
                            [(p, m, f"{val:.6g}", n) for p, m, val, n in rows]))
    else:
        for p, m, val, n in rows:
            print(f"{fmt(p)},{m},{fmt(val)},{n}")
    print(f"filter MSE non-increasing in p: {'yes' if monotone else 'no'} (informational)",
          file=sys.stderr)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sisfilter",
        description="Distributed filtering for chains of interconnected subsystems "
                    "with randomly missing measurements.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--scenario", required=True, type=Path,
                       help="scenario JSON (validate also accepts a bare model file)")
        if needs_out:
            p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=_nonneg_int, help="override the scenario seed")
        p.add_argument("--p", type=_probability, help="override every dropout probability")
        p.add_argument("--horizon", type=_pos_int, help="override the scenario horizon")
        p.add_argument("--pretty", action="store_true", help="print a human-readable table")

    p_val = sub.add_parser("validate", help="check the chain model")
    common(p_val, needs_out=False)
    p_val.set_defaults(func=cmd_validate)

    p_sim = sub.add_parser("simulate", help="write a ground-truth trace")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_fil = sub.add_parser("filter", help="run the distributed filter on a trace")
    common(p_fil)
    p_fil.add_argument("--trace", type=Path, help="filter this trace CSV instead of simulating")
    p_fil.add_argument("--moments", action="store_true",
                       help="add S/T diagonals to the estimates CSV")
    p_fil.add_argument("--oracle", action="store_true",
                       help="report the deviation from the centralized Kalman reference")
    p_fil.set_defaults(func=cmd_filter)

    p_cmp = sub.add_parser("compare", help="tabulate MSE across dropout levels")
    common(p_cmp)
    p_cmp.add_argument("--runs", type=_pos_int, default=20, help="Monte Carlo runs per level")
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except DocumentError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except SISError as exc:
        _err(str(exc))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
