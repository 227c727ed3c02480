"""
ospqtm CLI - thermodynamics runs and cross-checks from the command line.

Usage:
    ospqtm bae-solve --N 12 --u 0.05 --k 1
    ospqtm qtm-diag --N 4 --u 0.05
    ospqtm dvf-zeros --N 12 --u 0.05 --k 2 --m-max 3
    ospqtm verify --N 4 6
    ospqtm tba --beta 0.5 1 2
    ospqtm excited --beta 1
    ospqtm scan --config run.toml
    ospqtm figure fig1
    python -m ospqtm ...

Exit codes: 0 success, 1 configuration error, 2 convergence failure,
3 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import scipy

from .bae import (BetheConvergenceError, SingularJacobianError, classify_strings,
                  normalized_residuals, save_state, solve_for_rank, symmetry_residuals)
from .config import ConfigError, RunConfig, build_config, load_config
from .fusion import (FusionIndex, WindingError, classify_zeros, dvf_eval, find_zeros,
                     save_zeros_json, verify_functional_relation, write_zeros_csv)
from .qtm import (EigenSolverError, build_qtm, hamiltonian_free_energy, top_eigenvalues,
                  write_eigenvalues_csv)
from .spectral import BetheState, ModelParams, OspQtmError, t1_eval
from .tba import (BranchTrackingError, CorrelationError, TbaConfig, TbaConvergenceError,
                  correlation_length, free_energy, solve_excited, solve_tba, thermodynamics)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_VALIDATION = 0, 1, 2, 3

CONVERGENCE_ERRORS = (BetheConvergenceError, SingularJacobianError, TbaConvergenceError,
                      BranchTrackingError, WindingError, EigenSolverError)


def _get_version() -> str:
    try:
        from ospqtm import __version__
        return __version__
    except ImportError:
        return "0.0.0"


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _prepare_out(out: Path) -> Path:
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_rows(path: Path, rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
    return path


def write_run_record(path: Path, config: RunConfig, extra: Dict[str, Any]) -> Path:
    doc = {
        "config": config.to_json(),
        "versions": {"ospqtm": _get_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        **extra,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    return path


def model_params(config: RunConfig, N: int, beta: Optional[float] = None) -> ModelParams:
    """Parameters from an explicit u when given, otherwise from (J, beta)."""
    if config.u is not None:
        return ModelParams.from_u(config.u, N, J=abs(config.J))
    return ModelParams(J=config.J, beta=beta if beta is not None else config.betas[0], N=N)


# ---------------------------------------------------------------------------
# Temperature scans
# ---------------------------------------------------------------------------

SCAN_COLUMNS = ["beta", "T", "f", "minus_beta_f", "entropy", "specific_heat",
                "inv_xi", "x1", "status"]


@dataclass
class ScanReport:
    rows: List[Dict[str, Any]] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _scan_point(config: RunConfig, beta: float) -> Dict[str, Any]:
    row: Dict[str, Any] = {"beta": beta, "T": 1.0 / beta}
    try:
        sol1 = solve_tba(config.tba, beta, config.J)
        f = free_energy(sol1)
        row.update(f=f, minus_beta_f=-beta * f, iterations=sol1.iterations, largest=sol1.to_json())
        if config.excited:
            sol2 = solve_excited(config.tba, beta, config.J, largest=sol1)
            row.update(inv_xi=1.0 / correlation_length(sol1, sol2), x1=sol2.x[0],
                       excited=sol2.to_json())
        row["status"] = "ok"
    except (OspQtmError, ArithmeticError) as exc:
        row["status"] = f"failed: {exc}"
    return row


def run_scan(config: RunConfig) -> ScanReport:
    """Solve the NLIE at every beta of the configuration and write data.csv and run.json."""
    out = _prepare_out(config.out)
    betas = list(config.betas)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_scan_point, [config] * len(betas), betas))
    else:
        rows = [_scan_point(config, beta) for beta in betas]
    report = ScanReport(rows=rows)
    for row in rows:
        if row["status"] != "ok":
            report.failures.append(f"beta={row['beta']}: {row['status']}")
            logger.error("[Scan] %s", report.failures[-1])
    good = [r for r in rows if r["status"] == "ok"]
    if good:
        s, c = thermodynamics([r["T"] for r in good], [r["f"] for r in good])
        for row, si, ci in zip(good, s, c):
            row["entropy"] = None if np.isnan(si) else float(si)
            row["specific_heat"] = None if np.isnan(ci) else float(ci)
    write_rows(out / "data.csv", rows, SCAN_COLUMNS)
    write_run_record(out / "run.json", config, {"points": rows, "failures": report.failures})
    logger.info("[Scan] %d points written to %s", len(rows), out)
    return report


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------

FIGURES = {
    "fig1": (1, 12, "roots"), "fig2": (1, 12, "zeros"),
    "fig3": (2, 12, "roots"), "fig4": (2, 12, "zeros"),
    "fig5": (2, 14, "roots"), "fig6": (2, 14, "zeros"),
}


def reproduce_figure(which: str, out: Path, u: float = 0.05, N: Optional[int] = None,
                     m_values: Sequence[int] = (1, 2, 3), tol: float = 1e-12) -> Dict[str, Any]:
    """Root or zero coordinates of one figure as CSV plus a JSON summary."""
    if which not in FIGURES:
        raise ConfigError(f"unknown figure {which!r}; choose from {sorted(FIGURES)}")
    k, default_n, kind = FIGURES[which]
    params = ModelParams.from_u(u, N or default_n)
    out = _prepare_out(out)
    state = solve_for_rank(k, params, tol=tol)
    summary: Dict[str, Any] = {
        "figure": which, "k": k, "N": params.N, "u": params.u,
        "pattern": classify_strings(state).counts,
        "symmetry_residuals": symmetry_residuals(state),
        "bae_residual": float(normalized_residuals(state, params).max()),
    }
    save_state(state, params, out / f"roots_k{k}.json")
    if kind == "roots":
        write_zeros_csv(out / "roots.csv", state.roots)
    else:
        summary["zeros"] = {}
        for m in m_values:
            index = FusionIndex(m, k)
            zeros = find_zeros(index, state, params)
            write_zeros_csv(out / f"zeros_m{m}.csv", zeros)
            summary["zeros"][str(m)] = {"count": len(zeros), **classify_zeros(zeros, m)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    logger.info("[Figure] %s: %s", which, summary["pattern"])
    return summary


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

#: largest Trotter number for which verify runs the QTM eigenvalue checks
ORACLE_MAX_TROTTER = 8


def verify(Ns: Sequence[int], u: float = 0.05, m_max: int = 3, points: int = 20,
           seed: int = 0, relation_tol: float = 1e-9, oracle_tol: float = 1e-7,
           tba_config: Optional[TbaConfig] = None, tba_tol: float = 1e-5,
           ed_beta: float = 1.0, ed_lengths: Sequence[int] = (6, 8),
           J: float = -1.0) -> Dict[str, Any]:
    """
    Functional relations on solved states and the oracle chain
    NLIE <-> QTM <-> DVF on BAE roots, plus NLIE <-> exact diagonalization.
    """
    rng = np.random.default_rng(seed)
    tba_config = tba_config or TbaConfig()
    checks: List[Dict[str, Any]] = []
    for N in Ns:
        params = ModelParams.from_u(u, N)
        states: Dict[int, BetheState] = {k: solve_for_rank(k, params) for k in (1, 2)}
        v = rng.uniform(-3, 3, points) + 1j * rng.uniform(-0.3, 0.3, points)
        for k, state in states.items():
            for m in range(1, m_max + 1):
                for kind in ("T-system", "Y-system"):
                    res = float(np.max(verify_functional_relation(kind, m, v, state, params)))
                    checks.append({"N": N, "k": k, "m": m, "check": kind, "value": res,
                                   "ok": res < relation_tol})
        if N > ORACLE_MAX_TROTTER:
            continue
        lam = top_eigenvalues(build_qtm(params, 0.0), 2)
        dvf = [complex(t1_eval(0.0, states[1], params)),
               complex(dvf_eval(FusionIndex(1, 2), 0.0, states[2], params))]
        for k in (1, 2):
            rel = abs(lam[k - 1] - dvf[k - 1]) / abs(lam[k - 1])
            checks.append({"N": N, "k": k, "m": 1, "check": "qtm-oracle", "value": rel,
                           "ok": rel < oracle_tol})
        if params.J < 0:
            sol = solve_tba(tba_config, params.beta, params.J, trotter=N)
            diff = abs(-params.beta * free_energy(sol) - float(np.log(lam[0].real)))
            checks.append({"N": N, "k": 1, "m": 1, "check": "tba-qtm", "value": diff,
                           "ok": diff < tba_tol})
    if J < 0:
        f = free_energy(solve_tba(tba_config, ed_beta, J))
        f_small, f_large = (hamiltonian_free_energy(L, ed_beta, J) for L in ed_lengths)
        spread = abs(f_large - f_small)
        ratio = abs(f - f_large) / spread if spread > 0 else float(abs(f - f_large) > 0)
        # N = 0 marks the Trotter limit
        checks.append({"N": 0, "k": 1, "m": 1, "check": "tba-ed", "value": ratio, "ok": ratio <= 1.0,
                       "L": list(ed_lengths), "beta": ed_beta, "f": f, "f_L": [f_small, f_large]})
    failed = [c for c in checks if not c["ok"]]
    for c in failed:
        logger.error("[Verify] %s N=%d k=%d m=%d: %.3e", c["check"], c["N"], c["k"], c["m"], c["value"])
    return {"checks": checks, "failed": len(failed)}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--beta", type=float, nargs="+", help="inverse temperature(s)")
    p.add_argument("--J", type=float, help="coupling constant")
    p.add_argument("--N", type=int, nargs="+", help="Trotter number(s)")
    p.add_argument("--u", type=float, help="Trotter parameter u = -J beta / N")
    p.add_argument("--k", type=int, help="eigenvalue rank (1 or 2)")
    p.add_argument("--m-max", type=int, dest="m_max", help="fusion / TBA truncation level")
    p.add_argument("--grid-v", type=float, dest="grid_v", help="TBA grid half-width V")
    p.add_argument("--grid-h", type=float, dest="grid_h", help="TBA grid step h")
    p.add_argument("--tol", type=float, help="solver tolerance")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="parallel worker processes for scans")
    p.add_argument("--seed", type=int, help="random seed for sampled checks")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p.add_argument("-q", "--quiet", action="store_true", help="warnings only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ospqtm",
        description="osp(1|2) spin chain thermodynamics via the quantum transfer matrix",
    )
    parser.add_argument("--version", action="store_true", help="Show version and exit")
    sub = parser.add_subparsers(dest="command")
    for name, help_text in [
        ("bae-solve", "solve the Bethe ansatz equations for rank k"),
        ("qtm-diag", "diagonalize the finite-N QTM"),
        ("dvf-zeros", "locate zeros of the fusion eigenvalues"),
        ("verify", "functional relations and the QTM/DVF oracle"),
        ("tba", "free energy from the NLIE"),
        ("excited", "correlation length from the excited-state NLIE"),
        ("scan", "temperature scan with data.csv and run.json"),
    ]:
        _add_common(sub.add_parser(name, help=help_text))
    fig = sub.add_parser("figure", help="root and zero data of one figure")
    fig.add_argument("which", choices=sorted(FIGURES))
    _add_common(fig)
    return parser


def _configure_logging(args) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def config_from_args(args) -> RunConfig:
    file_values = load_config(args.config) if args.config else {}
    overrides = {
        "command": args.command, "J": args.J, "betas": args.beta, "trotter": args.N,
        "u": args.u, "k": args.k, "out": args.out, "workers": args.workers, "seed": args.seed,
        "excited": True if args.command == "excited" else None,
        "figure": getattr(args, "which", None),
        "tba": {"m_max": args.m_max, "V": args.grid_v, "h": args.grid_h, "tol": args.tol},
    }
    if args.command == "figure" and args.N is None and "trotter" not in file_values:
        overrides["trotter"] = [FIGURES[args.which][1]]
    if args.command in ("bae-solve", "verify", "figure") and args.tol is not None:
        overrides["bae_tol"] = args.tol
        overrides["tba"]["tol"] = None
    return build_config(file_values, overrides)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_bae_solve(config: RunConfig) -> int:
    out = _prepare_out(config.out)
    for N in config.trotter:
        params = model_params(config, N)
        state = solve_for_rank(config.k, params, tol=config.bae_tol, max_iter=config.bae_max_iter)
        path = save_state(state, params, out / f"roots_N{N}_k{config.k}.json")
        print(f"N={N} u={params.u:.6g} k={config.k}: {classify_strings(state).describe()}; "
              f"residual {normalized_residuals(state, params).max():.2e}; "
              f"symmetry {max(symmetry_residuals(state).values()):.2e} -> {path}")
    return EXIT_OK


def cmd_qtm_diag(config: RunConfig) -> int:
    out = _prepare_out(config.out)
    rows = []
    for N in config.trotter:
        params = model_params(config, N)
        values = top_eigenvalues(build_qtm(params, 0.0), 2)
        for k, lam in enumerate(values, start=1):
            rows.append((N, params.u, 0.0, k, lam))
            print(f"N={N} u={params.u:.6g} lambda_{k} = {lam:.12g}")
    write_eigenvalues_csv(out / "eigenvalues.csv", rows)
    return EXIT_OK


def cmd_dvf_zeros(config: RunConfig) -> int:
    out = _prepare_out(config.out)
    for N in config.trotter:
        params = model_params(config, N)
        state = solve_for_rank(config.k, params, tol=config.bae_tol)
        for m in range(1, config.tba.m_max + 1):
            index = FusionIndex(m, config.k)
            zeros = find_zeros(index, state, params)
            write_zeros_csv(out / f"zeros_m{m}.csv", zeros)
            save_zeros_json(out / f"zeros_m{m}.json", index, params, zeros)
            print(f"N={N} k={config.k} m={m}: {classify_zeros(zeros, m)}")
    return EXIT_OK


def cmd_verify(config: RunConfig) -> int:
    out = _prepare_out(config.out)
    report = verify(config.trotter, u=config.u if config.u is not None else 0.05,
                    m_max=min(config.tba.m_max, 3), seed=config.seed, tba_config=config.tba,
                    ed_beta=config.betas[0], J=config.J)
    (out / "verify.json").write_text(json.dumps(report, indent=2, default=str) + "\n")
    for c in report["checks"]:
        flag = "ok" if c["ok"] else "FAIL"
        print(f"{c['check']:>10} N={c['N']} k={c['k']} m={c['m']}: {c['value']:.3e} {flag}")
    return EXIT_VALIDATION if report["failed"] else EXIT_OK


def cmd_tba(config: RunConfig) -> int:
    report = run_scan(replace(config, excited=config.excited or config.command == "excited"))
    for row in report.rows:
        if row["status"] != "ok":
            continue
        line = f"beta={row['beta']:g} f={row['f']:.12g} -beta*f={row['minus_beta_f']:.12g}"
        if "inv_xi" in row:
            line += f" 1/xi={row['inv_xi']:.10g} x1={row['x1']:.10g}"
        print(line)
    return EXIT_OK if report.ok else EXIT_CONVERGENCE


def cmd_figure(config: RunConfig) -> int:
    u = config.u if config.u is not None else 0.05
    summary = reproduce_figure(config.figure, config.out, u=u, N=config.trotter[0],
                               tol=config.bae_tol)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "bae-solve": cmd_bae_solve, "qtm-diag": cmd_qtm_diag, "dvf-zeros": cmd_dvf_zeros,
    "verify": cmd_verify, "tba": cmd_tba, "excited": cmd_tba, "scan": cmd_tba,
    "figure": cmd_figure,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.version:
        print(f"ospqtm {_get_version()}")
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG

    _configure_logging(args)
    try:
        config = config_from_args(args)
        return COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"ospqtm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CONVERGENCE_ERRORS as exc:
        print(f"ospqtm: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except CorrelationError as exc:
        print(f"ospqtm: validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OspQtmError as exc:
        print(f"ospqtm: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
