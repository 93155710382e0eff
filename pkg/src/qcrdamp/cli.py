"""Command-line front end: ``qcrdamp <command> ...``.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure,
4 insufficient linear region in an extraction, 5 file-system error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientLinearRegionError,
    ParamsError,
    QuadratureError,
    RangeError,
    TraceFormatError,
)
from .extraction import sweep_points_csv
from .params import EnvironmentRates, describe, load_config
from .pulse import NS
from .rates import curve_for, read_rate_curve, write_rate_curve
from .report import build_report, format_report, measured_from_fit_reports, reference_measurements
from .sweep import SweepSpec, fit_report, read_sweep, simulate_sweep, write_sweep
from .tunneling import kernel_table

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_LINEAR_REGION = 4
EXIT_IO = 5


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def parse_vgrid(text):
    """``a:b:n`` -> ``linspace(a, b, n)`` in units of 2 Delta / e."""
    try:
        a, b, n = text.split(":")
        n = int(n)
        grid = np.linspace(float(a), float(b), n)
    except ValueError:
        raise CliError(f"--vgrid expects a:b:n, got {text!r}", EXIT_CONFIG) from None
    if n < 1:
        raise CliError("--vgrid needs at least one point", EXIT_CONFIG)
    return grid


def _config(path):
    params, env = load_config(Path(path))
    return params, env


def _environment(env, curve):
    off = float(curve(0.0))
    if env is None:
        return EnvironmentRates(gamma_qcr_off=off)
    return env


def _write_json(doc, path):
    text = json.dumps(doc, indent=2) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def cmd_params_validate(args):
    params, env = _config(args.config)
    doc = describe(params)
    if env is not None:
        doc["environment"] = {
            "gamma_tr_per_s": env.gamma_tr,
            "gamma_x_per_s": env.gamma_x,
            "gamma_qcr_off_per_s": env.gamma_qcr_off,
        }
    _write_json(doc, args.out)
    return EXIT_OK


def cmd_rates(args):
    params, _ = _config(args.config)
    grid = parse_vgrid(args.vgrid)
    if np.any(np.diff(grid) <= 0):
        raise CliError("--vgrid must be strictly increasing", EXIT_CONFIG)
    curve = curve_for(params, grid, jobs=args.jobs)
    write_rate_curve(curve, args.out)
    if args.dump_kernel:
        E = np.linspace(-3.0, 3.0, 601) * params.Delta
        with open(args.dump_kernel, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["E_over_Delta", "F_1_per_s", "rel_err"])
            for e, f, r in kernel_table(E, params.kernel):
                w.writerow([format(e / params.Delta, ".9g"), format(f, ".9g"), format(r, ".3g")])
    return EXIT_OK


def _spec(args):
    try:
        doc = json.loads(Path(args.spec).read_text()) if args.spec else {}
    except OSError as exc:
        raise CliError(f"cannot read sweep spec: {exc}", EXIT_CONFIG) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"sweep spec is not valid JSON: {exc}", EXIT_CONFIG) from None
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.tau_c is not None:
        doc["tau_c_ns"] = args.tau_c
    return SweepSpec.from_dict(doc)


def _simulate(args):
    params, env = _config(args.config)
    spec = _spec(args)
    if args.rates:
        curve = read_rate_curve(args.rates, params.Delta)
    else:
        top = max(spec.fractions)
        n = int(round(top / 0.005)) + 1
        curve = curve_for(params, np.linspace(0.0, top, n), jobs=args.jobs)
    env = _environment(env, curve)
    items = simulate_sweep(spec, curve, env, params.Delta, jobs=args.jobs)
    return params, env, spec, items


def _ensure_dir(path):
    try:
        Path(path).mkdir(parents=True, exist_ok=True)
        probe = Path(path) / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(f"output directory not writable: {exc}", EXIT_IO) from None


def cmd_simulate(args):
    _ensure_dir(args.out)
    params, env, spec, items = _simulate(args)
    write_sweep(items, args.out)
    (Path(args.out) / "sweep_spec.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    print(json.dumps({"traces": len(items), "timeline": items[0].trace.meta["timeline"]}, indent=2))
    return EXIT_OK


def _extract(items, t_b, t_a, gamma_x_fraction, out):
    report, groups = fit_report(items, t_b, t_a, gamma_x_fraction=gamma_x_fraction)
    _write_json(report, out)
    if out not in (None, "-"):
        stem = Path(out).with_suffix("")
        for g in groups:
            name = f"{stem.name}_points_V{g.V_p * 1e6:.3f}uV_dt{g.dt / NS:.3f}ns.csv"
            sweep_points_csv(g.points, stem.parent / name, g.estimate)
    failed = [g for g in groups if g.estimate is None]
    if failed:
        for g in failed:
            print(f"V_p = {g.V_p * 1e6:.2f} uV: {g.error}", file=sys.stderr)
        return EXIT_LINEAR_REGION
    return EXIT_OK


def _analysis_times(items, args):
    tl = items[0].trace.meta.get("timeline", {})
    t_b = args.tb if args.tb is not None else tl.get("t_b_ns")
    t_a = args.ta if args.ta is not None else tl.get("t_a_ns")
    if t_b is None or t_a is None:
        raise CliError("--tb/--ta required (not recorded in trace metadata)", EXIT_CONFIG)
    return t_b * NS, t_a * NS


def cmd_extract(args):
    try:
        items = read_sweep(args.traces)
    except (OSError, TraceFormatError, KeyError) as exc:
        raise CliError(f"cannot read traces: {exc}", EXIT_IO) from None
    if not items:
        raise CliError("trace directory lists no traces", EXIT_CONFIG)
    t_b, t_a = _analysis_times(items, args)
    return _extract(items, t_b, t_a, args.gamma_x_fraction, args.out)


def cmd_sweep(args):
    _ensure_dir(args.out)
    params, env, spec, items = _simulate(args)
    write_sweep(items, Path(args.out) / "traces")
    return _extract(items, spec.t_b, spec.t_a, env.gamma_x_fraction, Path(args.out) / "fit_report.json")


def cmd_report(args):
    params = None
    if args.config:
        params, _ = _config(args.config)
    measured = None
    if args.reference_measurements:
        measured = reference_measurements()
    elif args.fit_report:
        reports = []
        for p in args.fit_report:
            try:
                reports.append(json.loads(Path(p).read_text()))
            except OSError as exc:
                raise CliError(f"cannot read fit report: {exc}", EXIT_IO) from None
        measured = measured_from_fit_reports(reports)
    if params is None and measured is None:
        raise CliError("report needs --config and/or --fit-report/--reference-measurements", EXIT_CONFIG)
    summary = build_report(params, measured, jobs=args.jobs)
    if measured is not None:
        summary["measured"] = {k: {"gamma_per_s": v.gamma, "sigma_per_s": v.sigma} for k, v in measured.items()}
    _write_json(summary, args.out)
    print(format_report(summary), file=sys.stderr)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="qcrdamp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, out=True):
        if config:
            sp.add_argument("--config", required=True, help="device JSON config")
        if out:
            sp.add_argument("--out", help="output path ('-' or omitted: stdout)")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads")

    sp = sub.add_parser("params", help="device parameter utilities")
    psub = sp.add_subparsers(dest="params_command", required=True)
    v = psub.add_parser("validate", help="check a config and print derived quantities")
    common(v)
    v.set_defaults(func=cmd_params_validate)

    r = sub.add_parser("rates", help="tabulate gamma_QCR(V) to CSV")
    common(r, out=False)
    r.add_argument("--out", required=True, help="CSV path")
    r.add_argument("--vgrid", default="0:1.2:241", help="a:b:n in units of 2Delta/e")
    r.add_argument("--dump-kernel", help=argparse.SUPPRESS)
    r.set_defaults(func=cmd_rates)

    def sim_flags(sp):
        sp.add_argument("--spec", help="sweep spec JSON (defaults built in)")
        sp.add_argument("--seed", type=int, help="override the spec seed")
        sp.add_argument("--tau-c", type=float, help="control-line time constant, ns")
        sp.add_argument("--rates", help="precomputed rate-curve CSV")

    s = sub.add_parser("simulate", help="simulate a pulse-width sweep into a trace directory")
    common(s, out=False)
    s.add_argument("--out", required=True, help="trace directory")
    sim_flags(s)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("extract", help="fit gamma_QCR from a trace directory")
    e.add_argument("--traces", required=True, help="directory written by simulate")
    e.add_argument("--tb", type=float, help="analysis time before the pulse, ns")
    e.add_argument("--ta", type=float, help="analysis time after the pulse, ns")
    e.add_argument("--gamma-x-fraction", type=float, default=0.10)
    e.add_argument("--out", help="fit report JSON path")
    e.set_defaults(func=cmd_extract)

    w = sub.add_parser("sweep", help="simulate and extract in one go")
    common(w, out=False)
    w.add_argument("--out", required=True, help="output directory")
    sim_flags(w)
    w.set_defaults(func=cmd_sweep)

    rp = sub.add_parser("report", help="compare results with the reference values")
    rp.add_argument("--config", help="device config for the theory checks")
    rp.add_argument("--fit-report", nargs="*", help="extract reports")
    rp.add_argument("--reference-measurements", action="store_true",
                    help="use the reported measured rates instead of fit reports")
    rp.add_argument("--out", help="summary JSON path")
    rp.add_argument("--jobs", type=int, default=1)
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ParamsError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientLinearRegionError as exc:
        print(f"extraction error: {exc}", file=sys.stderr)
        return EXIT_LINEAR_REGION
    except (QuadratureError, RangeError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
