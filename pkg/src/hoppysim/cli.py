"""Command line entry point: ``hoppysim simulate | validate | sweep``."""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from hoppysim.config import load_config, override
from hoppysim.errors import ParseError, SimulationError, ValidationError
from hoppysim.sim import TOUCHDOWN, Simulator, steady_state_speed

SWEEP_COLUMNS = ("value", "speed", "stance_duration", "saturation_fraction", "hops", "outcome")


def _parser():
    p = argparse.ArgumentParser(prog="hoppysim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one simulation")
    s.add_argument("--config", help="INI file; shipped defaults when omitted")
    s.add_argument("--hops", type=int, help="override sim.n_hops")
    s.add_argument("--csv", help="write the trace here")
    s.add_argument("--plots", help="directory for the SVG panels")
    s.add_argument("--frames", help="write Sagittal snapshots for animation")

    v = sub.add_parser("validate", help="load and check a config file")
    v.add_argument("--config", help="INI file; shipped defaults when omitted")

    w = sub.add_parser("sweep", help="run one simulation per parameter value")
    w.add_argument("--config")
    w.add_argument("--param", required=True, help="section.key or section.key[i]")
    w.add_argument("--values", required=True, help="comma separated values")
    w.add_argument("--csv", required=True, help="summary output")
    w.add_argument("--hops", type=int)
    w.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return p


def _configs(args):
    configs = load_config(args.config)
    if getattr(args, "hops", None) is not None:
        configs = override(configs, "sim.n_hops", args.hops)
    return configs


def _write_outputs(args, trace, model):
    # imported lazily: matplotlib is slow to load and not needed by validate
    from hoppysim.traceio import export_csv, export_frames

    if args.csv:
        export_csv(trace, args.csv)
    if args.frames:
        export_frames(trace, model, args.frames)
    if args.plots and len(trace):
        from hoppysim.plots import render_plots

        render_plots(trace, model, args.plots)


def cmd_simulate(args):
    model, controller, sim = _configs(args)
    try:
        trace = Simulator(model, controller, sim).run()
    except SimulationError as exc:
        if exc.trace is not None:
            _write_outputs(args, exc.trace, model)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    _write_outputs(args, trace, model)
    n_td = sum(ev.kind == TOUCHDOWN for ev in trace.events)
    print(f"outcome={trace.outcome} hops={trace.hops} touchdowns={n_td} t_end={trace.t[-1]:.4f}")
    return 0 if trace.outcome == "completed" else 1


def cmd_validate(args):
    model, controller, sim = _configs(args)
    print(f"ok: total mass {model.total_mass:.3f} kg, {sim.n_hops} hops, "
          f"K_p={controller.K_p}, K_d={controller.K_d}, F_peak={controller.F_peak}")
    return 0


def summarize(trace, model):
    """One sweep row: speed, mean stance duration, saturation fraction."""
    stance = [t1 - t0 for t0, t1 in trace.stance_intervals()]
    try:
        speed = steady_state_speed(model, trace)
    except ValueError:
        speed = float("nan")
    return {
        "speed": speed,
        "stance_duration": float(np.mean(stance)) if stance else float("nan"),
        "saturation_fraction": float(np.mean(trace.saturated)) if len(trace) else 0.0,
        "hops": trace.hops,
        "outcome": trace.outcome,
    }


def _sweep_one(configs, param, value):
    model, controller, sim = override(configs, param, value)
    try:
        trace = Simulator(model, controller, sim).run()
    except SimulationError as exc:
        trace = exc.trace
    return {"value": value, **summarize(trace, model)}


def run_sweep(configs, param, values, jobs=1):
    values = [float(v) for v in values]
    for v in values:
        override(configs, param, v)  # fail early on a bad key or value
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_sweep_one, configs, param, v) for v in values]
            return [f.result() for f in futures]
    return [_sweep_one(configs, param, v) for v in values]


def cmd_sweep(args):
    configs = _configs(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        print(f"error: --values must be numbers, got {args.values!r}", file=sys.stderr)
        return 2
    rows = run_sweep(configs, args.param, values, args.jobs)
    with open(args.csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([row["value"], "%.17g" % row["speed"], "%.17g" % row["stance_duration"],
                             "%.17g" % row["saturation_fraction"], row["hops"], row["outcome"]])
    for row in rows:
        print(f"{args.param}={row['value']:g}: speed={row['speed']:.4f} m/s "
              f"hops={row['hops']} outcome={row['outcome']}")
    return 0 if all(r["outcome"] == "completed" for r in rows) else 1


def main(argv=None):
    args = _parser().parse_args(argv)
    handler = {"simulate": cmd_simulate, "validate": cmd_validate, "sweep": cmd_sweep}[args.command]
    try:
        return handler(args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
