"""Command-line front end.

Exit codes: 0 success, 1 Monte-Carlo disagreement (mc-check), 2 invalid
input, 3 numerical non-convergence, 4 table mismatch on match-required cells.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, TextIO

from . import mc, tables
from .errors import ConvergenceError, MixriskError
from .es import aggregate_es, expected_shortfall
from .generators import Normal, StudentT
from .model import load
from .var import (aggregate_by_correlation, aggregate_var, incremental_var, solve_quantile,
                  value_at_risk, var_delta_theta)

EXIT_OK = 0
EXIT_MC_DISAGREE = 1
EXIT_INVALID = 2
EXIT_NUMERIC = 3
EXIT_TABLE = 4

COMMANDS = ("var", "es", "quantile", "tables", "mc-check", "aggregate")
MIN_MC_DRAWS = 10_000
MC_Z_LIMIT = 3.0


@dataclass
class RunConfig:
    command: str
    input: Optional[Path] = None
    alphas: list = field(default_factory=lambda: [0.01])
    seed: int = 42
    draws: int = 1_000_000
    fmt: str = "json"
    literal_es: bool = False
    incremental: bool = False
    mix: Optional[str] = None
    es_tables: bool = False
    es_report: Optional[Path] = None
    # aggregate
    kind: str = "var"
    r1: Optional[float] = None
    r2: Optional[float] = None
    k: Optional[float] = None
    cross: Optional[float] = None
    phi: Optional[float] = None

    def problems(self) -> list:
        out = []
        if self.command not in COMMANDS:
            out.append(f"command: unknown command {self.command!r}")
        for a in self.alphas:
            if not 0 < a < 0.5:
                out.append(f"--alpha: {a} is outside (0, 0.5)")
        if self.command == "mc-check" and self.draws < MIN_MC_DRAWS:
            out.append(f"--draws: {self.draws} < {MIN_MC_DRAWS}")
        if self.command in ("var", "es", "mc-check") and self.input is None:
            out.append("--input: required for this command")
        if self.fmt not in ("json", "csv"):
            out.append(f"--format: {self.fmt!r} is not json or csv")
        return out


def _emit_json(obj, out):
    out.write(json.dumps(obj, sort_keys=True, indent=2))
    out.write("\n")


def _emit_rows(rows, out):
    if not rows:
        return
    keys = sorted({k for r in rows for k in r})
    writer = csv.DictWriter(out, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (json.dumps(v) if isinstance(v, (list, tuple)) else v) for k, v in r.items()})


def _emit(rows, cfg, out, extra=None):
    if cfg.fmt == "csv":
        _emit_rows(rows, out)
    else:
        payload = {"reports": rows}
        payload.update(extra or {})
        _emit_json(payload, out)


def _risk_rows(cfg, with_es):
    model, portfolio = load(cfg.input)
    rows = []
    for alpha in cfg.alphas:
        if with_es:
            report = expected_shortfall(portfolio, model, alpha, literal=cfg.literal_es)
        elif portfolio.theta_shift:
            report = var_delta_theta(portfolio, model, alpha)
        else:
            report = value_at_risk(portfolio, model, alpha)
        row = report.to_dict()
        if cfg.incremental:
            row["incremental"] = [float(v) for v in incremental_var(portfolio, model, alpha)]
        rows.append(row)
    return rows


def _parse_mix(text):
    mix = []
    for part in text.split(","):
        weight, _, gen = part.strip().partition(":")
        gen = gen.strip().lower()
        if gen in ("normal", "n"):
            g = Normal()
        elif gen.startswith("t"):
            g = StudentT(float(gen[1:]))
        else:
            raise MixriskError(f"--mix: cannot parse generator {gen!r} (use tNU or normal)")
        mix.append((float(weight), g))
    return mix


def _cmd_quantile(cfg, out):
    if cfg.mix:
        mix, dim = _parse_mix(cfg.mix), 1
    elif cfg.input:
        model, _ = load(cfg.input)
        mix, dim = model.mixture, model.dimension
    else:
        raise MixriskError("--mix or --input is required for quantile")
    rows = []
    for alpha in cfg.alphas:
        sol = solve_quantile(mix, alpha, dim)
        rows.append({"alpha": alpha, "q_alpha": sol.q_alpha, "residual": sol.residual,
                     "iterations": sol.iterations, "bracket": list(sol.bracket)})
    _emit(rows, cfg, out)
    return EXIT_OK


def _cmd_tables(cfg, out):
    alphas = cfg.alphas if cfg.alphas else list(tables.QUANTILE_TABLES)
    status = EXIT_OK
    workers = mc.worker_count()
    reports = []
    for alpha in alphas:
        spec = tables.QUANTILE_TABLES.get(alpha)
        if spec is None:
            raise MixriskError(f"--alpha: no quantile table for alpha={alpha} "
                               f"(available: {sorted(tables.QUANTILE_TABLES)})")
        reports.append(tables.reproduce_table(spec, workers))
        if cfg.es_tables and alpha in tables.ES_TABLES:
            reports.append(tables.reproduce_table(tables.ES_TABLES[alpha], workers))
    for rep in reports:
        if not rep.passed:
            status = EXIT_TABLE
        if cfg.fmt == "csv":
            out.write(rep.to_csv())
        else:
            out.write(rep.summary() + "\n")
    if cfg.es_report:
        Path(cfg.es_report).write_text(tables.es_constant_report())
    return status


def _cmd_mc_check(cfg, out):
    model, portfolio = load(cfg.input)
    batch = mc.sample_mixture(model, portfolio, cfg.draws, cfg.seed)
    rows = []
    worst = 0.0
    for alpha in cfg.alphas:
        report = expected_shortfall(portfolio, model, alpha, literal=cfg.literal_es)
        ev, ee = mc.empirical_var(batch, alpha), mc.empirical_es(batch, alpha)
        sv, se = mc.var_standard_error(batch, alpha), mc.es_standard_error(batch, alpha, seed=cfg.seed)
        zv, ze = (report.var - ev) / sv, (report.es - ee) / se
        worst = max(worst, abs(zv), abs(ze))
        rows.append({"alpha": alpha, "var": report.var, "empirical_var": ev, "var_se": sv, "var_z": zv,
                     "es": report.es, "empirical_es": ee, "es_se": se, "es_z": ze,
                     "pass": bool(abs(zv) <= MC_Z_LIMIT and abs(ze) <= MC_Z_LIMIT)})
    _emit(rows, cfg, out, {"draws": cfg.draws, "seed": cfg.seed, "model_hash": batch.model_hash,
                           "z_limit": MC_Z_LIMIT})
    return EXIT_OK if worst <= MC_Z_LIMIT else EXIT_MC_DISAGREE


def _cmd_aggregate(cfg, out):
    if cfg.r1 is None or cfg.r2 is None:
        raise MixriskError("--r1 and --r2 are required for aggregate")
    if cfg.phi is not None:
        value = aggregate_by_correlation(cfg.r1, cfg.r2, cfg.phi)
    elif cfg.k is not None and cfg.cross is not None:
        fn = aggregate_var if cfg.kind == "var" else aggregate_es
        value = fn(cfg.r1, cfg.r2, cfg.k, cfg.cross)
    else:
        raise MixriskError("aggregate needs --phi, or both --k and --cross")
    _emit([{"kind": cfg.kind, "aggregate": value, "convention": "VaR/ES reported as positive currency losses"}],
          cfg, out)
    return EXIT_OK


def run(cfg: RunConfig, out: TextIO = None, err: TextIO = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    problems = cfg.problems()
    if problems:
        for p in problems:
            err.write(f"error: {p}\n")
        return EXIT_INVALID
    buf = io.StringIO()
    try:
        if cfg.command in ("var", "es"):
            _emit(_risk_rows(cfg, cfg.command == "es"), cfg, buf)
            code = EXIT_OK
        elif cfg.command == "quantile":
            code = _cmd_quantile(cfg, buf)
        elif cfg.command == "tables":
            code = _cmd_tables(cfg, buf)
        elif cfg.command == "mc-check":
            code = _cmd_mc_check(cfg, buf)
        else:
            code = _cmd_aggregate(cfg, buf)
    except ConvergenceError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_NUMERIC
    except MixriskError as exc:
        for p in getattr(exc, "problems", [str(exc)]):
            err.write(f"error: {p}\n")
        return EXIT_INVALID
    except (OSError, ValueError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INVALID
    out.write(buf.getvalue())
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixrisk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_input=True):
        p.add_argument("--input", "-i", type=Path, required=need_input, help="model + portfolio JSON")
        p.add_argument("--alpha", "-a", type=float, action="append", dest="alphas",
                       help="tail probability in (0, 0.5); repeatable (default 0.01)")
        p.add_argument("--format", "-f", choices=("json", "csv"), default="json", dest="fmt")

    p = sub.add_parser("var", help="Value-at-Risk report")
    common(p)
    p.add_argument("--incremental", action="store_true", help="add Euler contributions (μ = 0 only)")

    p = sub.add_parser("es", help="VaR and Expected Shortfall report")
    common(p)
    p.add_argument("--literal-es", action="store_true", help="use the literal (doubled) ES constant")

    p = sub.add_parser("quantile", help="standardized mixture quantile q_α")
    common(p, need_input=False)
    p.add_argument("--mix", help="e.g. '0.1:t2,0.9:t3' or '1:normal'")

    p = sub.add_parser("tables", help="reproduce the reference quantile tables")
    p.add_argument("--alpha", "-a", type=float, action="append", dest="alphas",
                   help="0.01 and/or 0.001 (default both)")
    p.add_argument("--format", "-f", choices=("json", "csv"), default="json", dest="fmt",
                   help="csv for per-cell rows, otherwise a text summary")
    p.add_argument("--es", action="store_true", dest="es_tables", help="also compare the ES tables")
    p.add_argument("--es-report", type=Path, help="write the ES constant comparison (markdown)")

    p = sub.add_parser("mc-check", help="compare analytic VaR/ES with Monte-Carlo")
    common(p)
    p.add_argument("--draws", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--literal-es", action="store_true")

    p = sub.add_parser("aggregate", help="aggregate two sub-portfolio VaRs or ESs")
    p.add_argument("--kind", choices=("var", "es"), default="var")
    p.add_argument("--r1", type=float, required=True)
    p.add_argument("--r2", type=float, required=True)
    p.add_argument("--k", type=float, help="standardized multiplier (q_α or ES multiplier)")
    p.add_argument("--cross", type=float, help="δ₁ᵗ Σ₁₂ δ₂")
    p.add_argument("--phi", type=float, help="implied correlation")
    p.add_argument("--format", "-f", choices=("json", "csv"), default="json", dest="fmt")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if v is not None and k in RunConfig.__dataclass_fields__}
    if args.command == "tables" and not args.alphas:
        values["alphas"] = list(tables.QUANTILE_TABLES)
    elif not getattr(args, "alphas", None):
        values.pop("alphas", None)
    return RunConfig(**values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(config_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
