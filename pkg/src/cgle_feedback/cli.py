"""Command line entry point: ``certify``, ``run``, ``sweep`` and ``converge``.

Exit codes: 0 pass, 1 hypothesis failure, 2 envelope violation, 3 config error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import certificates as certs
from .experiments import (
    ConfigError,
    RunResult,
    certificate_for,
    convergence_study,
    load_config,
    run_experiment,
    sweep,
)

EXIT_OK = 0
EXIT_HYPOTHESIS = 1
EXIT_VIOLATION = 2
EXIT_CONFIG = 3

CSV_COLUMNS = ("t", "l2_sq", "h1_semi_sq", "lpp", "envelope", "z_l2_sq", "v_l2_sq")

log = logging.getLogger("cgle_feedback")


def fmt(x) -> str:
    """17 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _toml_value(v) -> str:
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if v is None:
        return '""'
    s = fmt(v)
    if isinstance(v, float) and s.lstrip("-").isdigit():
        s += ".0"
    return s


def write_kv(path: Path, items: dict):
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {_toml_value(v)}\n")


def write_trajectory(path: Path, result: RunResult):
    rec, cert = result.record, result.certificate
    env = None
    if cert is not None and cert.rate is not None and cert.theorem != certs.MODAL_H1:
        env = certs.squared_envelope(cert, rec.initial_norms, rec.times, force=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i, t in enumerate(rec.times):
            w.writerow([
                fmt(t), fmt(rec.l2_sq[i]), fmt(rec.h1_semi_sq[i]), fmt(rec.lpp[i]),
                fmt(env[i]) if env is not None else "",
                fmt(rec.z_l2_sq[i]) if rec.z_l2_sq is not None else "",
                fmt(rec.v_l2_sq[i]) if rec.v_l2_sq is not None else "",
            ])


def run_record_items(result: RunResult, trajectory: Path) -> dict:
    cfg, cert = result.config, result.certificate
    items = {f"config_{k}": v for k, v in cfg.raw.items()}
    items["controller"] = cfg.controller.describe()
    items["trajectory"] = str(trajectory)
    items["duration_s"] = result.duration
    if result.record is not None:
        items["dt"] = result.record.dt
        items["scheme"] = result.record.scheme
    if cert is not None:
        items["cert_theorem"] = cert.theorem
        items["cert_satisfied"] = cert.satisfied
        items["cert_rate"] = cert.rate if cert.rate is not None else math.nan
        for h in cert.hypotheses:
            items[f"hyp_{h.name}_satisfied"] = h.satisfied
            items[f"hyp_{h.name}_margin"] = h.margin
        for k, v in cert.constants.items():
            items[f"const_{k.replace('+', 'p')}"] = v
    for i, rep in enumerate(result.reports):
        items[f"verify{i}_quantity"] = rep.quantity
        items[f"verify{i}_passed"] = rep.passed
        items[f"verify{i}_worst_ratio"] = rep.worst_ratio
        items[f"verify{i}_first_violation"] = rep.first_violation_time if rep.first_violation_time is not None else math.nan
        items[f"verify{i}_slack"] = rep.slack
    if result.rate_check is not None:
        items["rate_passed"] = result.rate_check["passed"]
        items["rate_fitted"] = result.rate_check["fitted_rate"]
        items["rate_required"] = result.rate_check["required"]
    if result.diverged_at is not None:
        items["diverged_at"] = result.diverged_at
    items["passed"] = result.passed
    return items


def cmd_certify(args) -> int:
    cfg = load_config(args.config)
    cert = certificate_for(cfg)
    if cert is None:
        print("no stabilization result applies to an uncontrolled configuration")
        return EXIT_HYPOTHESIS
    print(cert.table())
    if not cert.satisfied:
        print(f"FAILED hypotheses: {', '.join(cert.failed)}")
        return EXIT_HYPOTHESIS
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    cert = certificate_for(cfg)
    if cert is not None:
        print(cert.table())
    if (cert is None or not cert.satisfied) and not args.force:
        why = "no certificate" if cert is None else f"failed hypotheses: {', '.join(cert.failed)}"
        print(f"refusing to run ({why}); use --force to override")
        return EXIT_HYPOTHESIS
    result = run_experiment(cfg, force=args.force, slack=args.slack)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traj = out / "trajectory.csv"
    write_trajectory(traj, result)
    write_kv(out / "run_record.toml", run_record_items(result, traj))
    for rep in result.reports:
        status = "PASS" if rep.passed else f"FAIL (first violation t = {rep.first_violation_time:.6g})"
        print(f"envelope[{rep.quantity}]: {status}, worst ratio {rep.worst_ratio:.6g}, slack {rep.slack:.3g}")
    if result.rate_check is not None:
        rc = result.rate_check
        print(f"H1 rate: fitted {rc['fitted_rate']:.6g} vs required {rc['required']:.6g}: "
              f"{'PASS' if rc['passed'] else 'FAIL'}")
    if result.diverged_at is not None:
        print(f"diverged at t = {result.diverged_at:.6g}")
    print(f"wrote {traj}")
    return EXIT_OK if result.passed else EXIT_VIOLATION


def parse_values(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:count`` (inclusive linspace)."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            return []
        return list(np.linspace(start, stop, count))
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    try:
        values = parse_values(args.values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = sweep(cfg, args.param, values, simulate_runs=not args.no_simulate, workers=args.workers)
    header = (args.param, "satisfied", "exponent", "fitted_rate")
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join([fmt(r["value"]), fmt(r["satisfied"]), fmt(r["exponent"]), fmt(r["fitted_rate"])]))
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = load_config(args.config)
    try:
        dts = parse_values(args.dt)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not dts:
        raise ConfigError("empty dt list")
    try:
        rows = convergence_study(cfg, dts, t=args.t)
    except certs.CertificateError as exc:
        print(f"error: {exc}")
        return EXIT_HYPOTHESIS
    lines = ["dt,error,order"]
    for r in rows:
        lines.append(",".join([fmt(r["dt"]), fmt(r["error"]), fmt(r["order"])]))
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "convergence.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgle-feedback",
        description="Finite-parameter feedback stabilization of the complex Ginzburg-Landau equation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="check the hypotheses of the configured theorem")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("run", help="simulate and verify the decay envelope")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--force", action="store_true", help="run even if hypotheses fail")
    p.add_argument("--slack", type=float, default=None, help="relative envelope slack (default 1e-6 + 10 dt^2)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="certify and fit over one swept parameter")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="a,b,c or start:stop:count")
    p.add_argument("--out", default=None)
    p.add_argument("--no-simulate", action="store_true", help="skip simulations (certificates only)")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("converge", help="time-step convergence against the exact linear solution")
    p.add_argument("--config", required=True)
    p.add_argument("--dt", required=True, help="comma-separated time steps")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_converge)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
