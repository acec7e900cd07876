"""Command-line front end: ``periodica <command> [options]``.

Exit codes: 0 success, 2 input error, 3 mathematical precondition failure,
4 inconclusive certification.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import designs, dnplus, energy
from .errors import InputError, PeriodicaError
from .exact import frac_str
from .lattice import coset_ball
from .periodic import (
    PeriodicSetRep,
    build_dn,
    build_dn_plus,
    build_zn,
    difference_classes,
    maximal_period_lattice,
)

COMMANDS = ("energy", "certify-critical", "hessian-spectrum", "dnplus-report", "threshold-scan", "theta")
_BUILDERS = {"zn": build_zn, "dn": build_dn, "dnplus": build_dn_plus}


@dataclass(frozen=True)
class RunConfig:
    command: str
    source: str
    c: float | None
    c_grid: tuple[float, ...] | None
    R2max: Fraction | None
    tol: float
    out: Path | None
    threads: int
    poly: str = "1"
    average: bool = False
    coset: int = 0

    def to_json(self) -> dict:
        return {"command": self.command, "source": self.source,
                "c": None if self.c is None else format(self.c, ".17g"),
                "c_grid": None if self.c_grid is None else [format(x, ".17g") for x in self.c_grid],
                "R2max": None if self.R2max is None else frac_str(self.R2max),
                "tol": format(self.tol, ".17g")}


def parse_builtin(name: str) -> PeriodicSetRep:
    kind, _, arg = name.partition(":")
    if kind not in _BUILDERS or not arg.isdigit():
        raise InputError(f"unknown builtin {name!r}; use dn:N, dnplus:N or zn:N")
    return _BUILDERS[kind](int(arg))


def load_rep(cfg: RunConfig) -> PeriodicSetRep:
    if cfg.source.startswith("builtin:"):
        return parse_builtin(cfg.source[len("builtin:"):])
    path = Path(cfg.source)
    try:
        obj = json.loads(path.read_text())
    except FileNotFoundError:
        raise InputError(f"no such file: {path}")
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read {path}: {e}")
    if not isinstance(obj, dict):
        raise InputError("periodic set JSON must be an object")
    return PeriodicSetRep.from_json(obj)


def _threads(arg: int | None) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get("PERIODICA_THREADS")
        try:
            n = int(env) if env else os.cpu_count() or 1
        except ValueError:
            raise InputError("PERIODICA_THREADS must be an integer")
    if n < 1:
        raise InputError("thread count must be positive")
    return n


def _parse_grid(text: str | None, n: int | None) -> tuple[float, ...] | None:
    if text is None:
        return None
    if text == "default":
        if n is None:
            raise InputError("default c grid needs a dimension")
        return tuple(dnplus.default_c_grid(n))
    try:
        grid = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise InputError("c grid must be 'default' or a comma-separated list")
    return grid


def _check_config(cfg: RunConfig) -> None:
    if cfg.c is not None and not cfg.c > 0:
        raise InputError("c must be positive")
    if not 0 < cfg.tol <= 1e-2:
        raise InputError("tol must lie in (0, 1e-2]")
    if cfg.c_grid is not None and (any(not x > 0 for x in cfg.c_grid)
                                   or any(b <= a for a, b in zip(cfg.c_grid, cfg.c_grid[1:]))):
        raise InputError("c grid must be positive and increasing")


def _check_r2max(rep: PeriodicSetRep, R2max: Fraction) -> None:
    """``R2max`` must exceed the smallest nonzero norm of ``Lambda - Lambda``."""
    for cl in difference_classes(rep):
        pb = coset_ball(rep.lattice, cl.offset, R2max)
        if (pb.norms > 0).any():
            return
    raise InputError(f"R2max = {R2max} is below the minimal shell norm")


def _need_c(cfg: RunConfig) -> float:
    if cfg.c is None:
        raise InputError(f"{cfg.command} needs --c")
    return cfg.c


# commands --------------------------------------------------------------------------------


def cmd_energy(cfg: RunConfig) -> tuple[dict, int]:
    rep = load_rep(cfg)
    rep_out = energy.energy(rep, _need_c(cfg), cfg.tol)
    return {"config": cfg.to_json(), "energy": rep_out.to_json()}, 0


def cmd_certify_critical(cfg: RunConfig) -> tuple[dict, int]:
    rep = load_rep(cfg)
    R2 = cfg.R2max if cfg.R2max is not None else Fraction(6)
    _check_r2max(rep, R2)
    cert = designs.certify_critical(rep, R2)
    out = {"config": cfg.to_json(), "certificate": cert.to_json()}
    if rep.is_exact:
        mp = maximal_period_lattice(rep)
        out["m"] = rep.m
        out["m_min"] = mp.m_min
        if mp.m_min == 1:
            out["note"] = "m_min = 1: the set is a lattice"
    if cert.failures():
        out["witnesses"] = [f.witness for f in cert.failures() if f.witness]
    return out, 0


def cmd_hessian_spectrum(cfg: RunConfig) -> tuple[dict, int]:
    rep = load_rep(cfg)
    cert = energy.certify_local_min(rep, _need_c(cfg), tol=max(cfg.tol, 1e-12))
    code = 4 if cert.verdict == "INCONCLUSIVE" else 0
    return {"config": cfg.to_json(), "spectrum": cert.to_json()}, code


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def cmd_dnplus_report(cfg: RunConfig) -> tuple[str, int]:
    rep = load_rep(cfg)
    R2 = cfg.R2max if cfg.R2max is not None else Fraction(20)
    grid = cfg.c_grid if cfg.c_grid is not None else (_need_c(cfg),)
    rows = []
    for c in grid:
        for b in dnplus.hessian_blocks(rep, c, R2):
            row = b.row()
            row["I_closed_form"] = b.I_closed_form
            row["II_zero"] = b.II_zero
            rows.append(row)
    return _csv_text(rows), 0


def cmd_threshold_scan(cfg: RunConfig) -> tuple[dict, int, str]:
    rep = load_rep(cfg)
    if not cfg.source.startswith("builtin:dnplus:"):
        raise InputError("threshold-scan runs on a builtin dnplus:N")
    R2 = cfg.R2max if cfg.R2max is not None else Fraction(40)
    scan = dnplus.threshold_scan(rep.n, cfg.c_grid, R2, tol=1e-12, workers=cfg.threads)
    code = 4 if scan.c_n_estimate is None else 0
    return {"config": cfg.to_json(), "scan": scan.to_json()}, code, _csv_text(scan.csv_rows())


def cmd_theta(cfg: RunConfig) -> tuple[dict, int]:
    rep = load_rep(cfg)
    R2 = cfg.R2max if cfg.R2max is not None else Fraction(10)
    if cfg.average:
        coefs = dnplus.average_theta_coefficients(rep, cfg.poly, R2)
    else:
        if not 0 <= cfg.coset < rep.m:
            raise InputError("coset index out of range")
        coefs = dnplus.theta_coefficients(rep.lattice, rep.translations[cfg.coset], cfg.poly, R2)
    return {"config": cfg.to_json(), "poly": cfg.poly, "average": cfg.average,
            "coefficients": [{"r2": frac_str(r2), "value": format(float(v), ".17g"), "exact": frac_str(v)}
                             for r2, v in coefs]}, 0


# entry point ------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="periodica", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="periodic set JSON file")
    src.add_argument("--builtin", help="dn:N, dnplus:N or zn:N")
    p.add_argument("--c", type=float)
    p.add_argument("--c-grid", help="'default' or comma-separated values")
    p.add_argument("--r2max", help="squared radius, e.g. 6 or 81/4")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.add_argument("--threads", type=int)
    p.add_argument("--poly", default="1", help="theta polynomial: 1 or P4")
    p.add_argument("--average", action="store_true", help="average theta series over coset pairs")
    p.add_argument("--coset", type=int, default=0, help="coset index for the plain theta series")
    return p


def _config(ns: argparse.Namespace) -> RunConfig:
    if ns.input is None and ns.builtin is None:
        raise InputError("give --input or --builtin")
    source = ns.input if ns.input is not None else "builtin:" + ns.builtin
    n = None
    if ns.builtin is not None and ":" in ns.builtin and ns.builtin.split(":", 1)[1].isdigit():
        n = int(ns.builtin.split(":", 1)[1])
    R2 = None
    if ns.r2max is not None:
        try:
            R2 = Fraction(ns.r2max)
        except (ValueError, ZeroDivisionError):
            raise InputError("r2max must be a rational number")
    cfg = RunConfig(ns.command, source, ns.c, _parse_grid(ns.c_grid, n), R2, ns.tol,
                    Path(ns.out) if ns.out else None, _threads(ns.threads), ns.poly, ns.average, ns.coset)
    _check_config(cfg)
    return cfg


def _write(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def run(cfg: RunConfig) -> int:
    extra_csv = None
    if cfg.command == "energy":
        payload, code = cmd_energy(cfg)
    elif cfg.command == "certify-critical":
        payload, code = cmd_certify_critical(cfg)
    elif cfg.command == "hessian-spectrum":
        payload, code = cmd_hessian_spectrum(cfg)
    elif cfg.command == "dnplus-report":
        payload, code = cmd_dnplus_report(cfg)
    elif cfg.command == "threshold-scan":
        payload, code, extra_csv = cmd_threshold_scan(cfg)
    else:
        payload, code = cmd_theta(cfg)
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2, sort_keys=True) + "\n"
    _write(text, cfg.out)
    if extra_csv is not None and cfg.out is not None:
        cfg.out.with_suffix(".csv").write_text(extra_csv)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) and 2
    try:
        return run(_config(ns))
    except PeriodicaError as e:
        print(f"periodica: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"periodica: input: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
