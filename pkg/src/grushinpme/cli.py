"""Command-line front end.

Exit codes: 0 success / certificate pass, 1 numerical failure, 2 configuration
or input error, 3 hypothesis check failed, 10 blow-up detected (simulate),
11 step underflow (simulate), 20 certificate failed or inconclusive.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import PRESET_NAMES, RunConfig, parse_config, preset_text
from .diagnostics import PASS
from .errors import (
    DomainError,
    GrushinError,
    InvalidInitialData,
    NonPositiveJ0,
    NonPositiveSigma,
    ParamViolation,
    SchemaError,
    ValidationError,
)
from .grid import homogeneous_dimension
from .operator import dump_matrix
from .solver import BLOWUP_DETECTED, STEP_UNDERFLOW, write_field_csv
from .source import BLOWUP, GLOBAL

log = logging.getLogger("grushinpme")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_BLOWUP = 10
EXIT_UNDERFLOW = 11
EXIT_CERTIFICATE = 20

COMMANDS = ("eigen", "check-conditions", "simulate", "certify-blowup", "certify-global", "convergence", "presets")


def _emit(pairs: dict, out=None) -> None:
    out = out or sys.stdout
    for key, val in pairs.items():
        if isinstance(val, float):
            val = f"{val:.17g}"
        print(f"{key}={val}", file=out)


def _write_rows(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(rows[0]))
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row.values()])


def _load(args) -> RunConfig:
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise SchemaError(f"cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{args.config} is not valid JSON: {exc}") from exc
        if args.preset and isinstance(doc, dict):
            doc.setdefault("preset", args.preset)
    elif args.preset:
        doc = {"preset": args.preset}
    else:
        raise SchemaError("give --config PATH or --preset NAME")
    if args.seed is not None and isinstance(doc, dict):
        doc["seed"] = args.seed
    return parse_config(doc)


def _outdir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_eigen(args, cfg: RunConfig) -> int:
    out = _outdir(args, cfg)
    if cfg.sweep_gamma:
        rows = pipeline.gamma_sweep(cfg)
        for row in rows:
            print(" ".join(f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
        if args.csv:
            _write_rows(out / "eigen_sweep.csv", rows)
        return EXIT_OK
    eig, poincare, grid, op = pipeline.eigen(cfg)
    _emit(
        {
            "lambda1": eig.lambda1,
            "residual": eig.residual,
            "iterations": eig.iterations,
            "Q": homogeneous_dimension(cfg.domain),
            "poincare_trials": poincare.trials,
            "poincare_min_quotient": poincare.min_quotient,
            "poincare_margin": poincare.margin,
        }
    )
    if args.csv:
        write_field_csv(grid, eig.eigenfield, out / "eigenfield.csv")
    if args.dump_matrix:
        dump_matrix(op, args.dump_matrix)
    return EXIT_OK


def cmd_check_conditions(args, cfg: RunConfig) -> int:
    if cfg.mode not in (BLOWUP, GLOBAL):
        raise ValidationError("check-conditions needs mode blow-up or global", "mode")
    out = _outdir(args, cfg)
    grid, op = pipeline.setup(cfg)
    lam = pipeline.smallest_eigenvalue(op, cfg.eigen_tol).lambda1
    params = pipeline.resolve_params(cfg, lam)
    report = pipeline.check_condition(cfg, params, lam)
    values = {"lambda1": lam, "alpha": params.alpha, "beta": params.beta, "theta": params.theta, "ell": params.ell}
    values.update(report.as_dict())
    _emit(values)
    if args.csv:
        _write_rows(out / "summary.csv", [values])
    return EXIT_OK if report.holds and report.holds_asymptotically else EXIT_HYPOTHESIS


def cmd_simulate(args, cfg: RunConfig) -> int:
    out = _outdir(args, cfg)
    result, grid = pipeline.simulate(cfg)
    summary = {
        "outcome": result.outcome.kind,
        "t": result.outcome.t,
        "steps": result.outcome.step,
        "max_u": float(result.final.u.max()),
        "mass": result.trace.rows[-1].mass,
        "J": result.trace.rows[-1].J,
    }
    _emit(summary)
    if args.csv:
        result.trace.write_csv(out / "trace.csv")
        _write_rows(out / "summary.csv", [summary])
    if args.checkpoint:
        write_field_csv(grid, result.final.u, out / "field.csv")
    return {BLOWUP_DETECTED: EXIT_BLOWUP, STEP_UNDERFLOW: EXIT_UNDERFLOW}.get(result.outcome.kind, EXIT_OK)


def _cmd_certify(args, cfg: RunConfig, mode: str) -> int:
    if cfg.mode != mode:
        raise ValidationError(f"configuration mode is {cfg.mode!r}, expected {mode!r}", "mode")
    out = _outdir(args, cfg)
    try:
        res = pipeline.certify_run(cfg)
    except pipeline.HypothesisFailed as exc:
        print(f"hypothesis check failed: {exc}", file=sys.stderr)
        if exc.report is not None:
            for c in exc.report.checks():
                print(f"hypothesis.{c.name}={'pass' if c.passed else 'fail'}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    cert = res.certificate
    sys.stdout.write(cert.to_text())
    (out / "certificate.txt").write_text(cert.to_text())
    (out / "certificate.json").write_text(cert.to_json())
    if args.csv:
        res.trace.write_csv(out / "trace.csv")
        summary = {"mode": mode, "verdict": cert.verdict, "outcome": cert.outcome, "t_detect": cert.t_detect, "lambda1": cert.lambda1}
        summary.update(cert.constants or {})
        _write_rows(out / "summary.csv", [summary])
    return EXIT_OK if cert.verdict == PASS else EXIT_CERTIFICATE


def cmd_convergence(args, cfg: RunConfig) -> int:
    out = _outdir(args, cfg)
    if not cfg.convergence_nodes and not cfg.convergence_cfl:
        raise ValidationError("no convergence.nodes or convergence.cfl given", "convergence")
    if cfg.convergence_nodes:
        rows = pipeline.spatial_convergence(cfg)
        for row in rows:
            print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
        if args.csv:
            _write_rows(out / "convergence.csv", rows)
    if cfg.convergence_cfl:
        rows = pipeline.cfl_convergence(cfg)
        for row in rows:
            print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
        if args.csv:
            _write_rows(out / "convergence_cfl.csv", rows)
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.name:
        if args.name not in PRESET_NAMES:
            raise SchemaError(f"unknown preset {args.name!r}; choose from {', '.join(PRESET_NAMES)}")
        sys.stdout.write(preset_text(args.name))
    else:
        for name in PRESET_NAMES:
            print(name)
    return EXIT_OK


HANDLERS = {
    "eigen": cmd_eigen,
    "check-conditions": cmd_check_conditions,
    "simulate": cmd_simulate,
    "certify-blowup": lambda a, c: _cmd_certify(a, c, BLOWUP),
    "certify-global": lambda a, c: _cmd_certify(a, c, GLOBAL),
    "convergence": cmd_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grushinpme", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "presets":
            p.add_argument("--name", help="print one preset document")
            continue
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--preset", metavar="NAME", choices=PRESET_NAMES)
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=int)
        p.add_argument("--csv", action=argparse.BooleanOptionalAction, default=True)
        if name == "eigen":
            p.add_argument("--dump-matrix", metavar="PATH", help="write the operator in Matrix Market format")
        if name == "simulate":
            p.add_argument("--checkpoint", action="store_true", help="write the final field as field.csv")
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "presets":
            return cmd_presets(args)
        cfg = _load(args)
        return HANDLERS[args.command](args, cfg)
    except (SchemaError, ValidationError, InvalidInitialData, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParamViolation, NonPositiveJ0, NonPositiveSigma) as exc:
        print(f"hypothesis check failed: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except GrushinError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(dispatch())
