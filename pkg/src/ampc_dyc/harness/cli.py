"""Command-line interface: run, sweep, compare, fit-envelope, print-schedule."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from ..schedule import ScheduleTable
from .config import CONTROLLERS, ScenarioConfig, load_config
from .envelope import envelope_from_fit, fit_envelope
from .metrics import (ComparisonError, compare_runs, compute_metrics, format_table,
                      metrics_table)
from .simulate import read_log, run_scenario, write_log
from .sweep import SWEEP_PARAMETERS, sweep, sweep_to_csv

log = logging.getLogger("ampc_dyc")

EXIT_OK = 0
EXIT_ABORTED = 2
EXIT_USAGE = 3


def _load(args) -> ScenarioConfig:
    config = load_config(args.config)
    if args.controller:
        config = config.with_controller(args.controller)
    return config


def _rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: v if isinstance(v, str) else format(v, ".17g") for k, v in r.items()})
    return buf.getvalue()


def cmd_run(args) -> int:
    config = _load(args)
    simlog = run_scenario(config)
    out = Path(args.out) / f"{config.name}.csv"
    write_log(simlog, out)
    m = compute_metrics(simlog) if simlog.records else None
    print(f"{config.name} [{config.controller}] {simlog.status}: {len(simlog)} steps -> {out}")
    if m is not None:
        print(format_table(metrics_table([m])))
    if not simlog.ok:
        print(f"run aborted: {simlog.message}", file=sys.stderr)
        return EXIT_ABORTED
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    runs = sweep(args.parameter, values, config, jobs=args.jobs)
    out = Path(args.out) / f"{config.name}-sweep-{args.parameter}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(sweep_to_csv(runs), encoding="utf-8")
    failed = [r for r in runs if r.log is None or not r.log.ok]
    for r in runs:
        status = r.error or (r.log.status if r.log else "failed")
        print(f"{args.parameter}={r.value:g}: {status}")
    print(f"combined log -> {out}")
    return EXIT_ABORTED if failed else EXIT_OK


def cmd_compare(args) -> int:
    logs = [read_log(p) for p in args.logs]
    metrics = [compute_metrics(lg, name=Path(p).stem) for lg, p in zip(logs, args.logs)]
    try:
        rows = compare_runs(metrics, baseline=args.baseline)
    except ComparisonError as exc:
        print(f"comparison error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(format_table(metrics_table(metrics)))
    print()
    print(format_table(rows, digits=2))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(_rows_to_csv(metrics_table(metrics)), encoding="utf-8")
    (out / "comparison.csv").write_text(_rows_to_csv(rows), encoding="utf-8")
    return EXIT_OK


def cmd_fit_envelope(args) -> int:
    config = _load(args)
    v_kmh = args.speed if args.speed is not None else max(config.speed.v0_kmh,
                                                          config.speed.v1_kmh)
    fit = fit_envelope(v_kmh / 3.6, config.road.mu, config.vehicle,
                       config.dyc.envelope.yaw_err_threshold)
    env = envelope_from_fit(fit, config.dyc.envelope)
    print(f"speed {v_kmh:g} km/h, mu {config.road.mu:g}")
    print(f"beta limit {fit.beta_limit:.6f} rad, time constant {fit.time_constant:.6f} s")
    print(f"B1 = {env.B1:g}")
    print(f"B2 = {env.B2:g}")
    return EXIT_OK


def cmd_print_schedule(args) -> int:
    table = load_config(args.config).schedule if args.config else ScheduleTable()
    rows = []
    v = 0.0
    while v <= args.v_max + 1e-9:
        s = table.lookup_kmh(v)
        rows.append({"v_kmh": f"{v:g}", "Np": str(s.Np), "Q_y": f"{s.Q_y:.4f}",
                     "R_delta": f"{s.R_delta:.2f}"})
        v += args.step
    print(format_table(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ampc-dyc", description=__doc__)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="reserved; the simulation is deterministic")
    parser.add_argument("--controller", choices=CONTROLLERS, default=None,
                        help="override the controller named in the config")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="vary one MPC parameter")
    p.add_argument("parameter", choices=SWEEP_PARAMETERS)
    p.add_argument("values", help="comma-separated values, e.g. 25,30,35,40")
    p.add_argument("config")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="RMS metrics and ΔRMS of logged runs")
    p.add_argument("logs", nargs="+")
    p.add_argument("--baseline", type=int, default=-1,
                   help="index of the baseline log (default: last)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fit-envelope", help="fit B1, B2 of the sideslip envelope")
    p.add_argument("config")
    p.add_argument("--speed", type=float, default=None, help="km/h (default: config)")
    p.set_defaults(func=cmd_fit_envelope)

    p = sub.add_parser("print-schedule", help="tabulate the speed schedule")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--step", type=float, default=5.0)
    p.add_argument("--v-max", type=float, default=120.0)
    p.set_defaults(func=cmd_print_schedule)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
