"""Command-line entry point: ``vibdsde <command> config.json [overrides]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

import numpy as np

from .config import COMMANDS, RunConfig, comparison_problem, load_config, parse_config
from .errors import ConfigError, VibdsdeError
from .field import FieldGrid, build_field, field_diagnostics
from .forward import TOL_PROJ, forward_endpoints
from .io import write_csv, write_json, write_manifest
from .problem import run_problem
from .verify.checks import (comparison_check, coefficient_spot_check, moreau_yosida_suite, report,
                            yosida_rate_fit)
from .verify.moduli import ModulusRho, modulus_invariants

log = logging.getLogger("vibdsde")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 2, 3, 4


def _outputs(rc: RunConfig, out: Path, stem: str, header, rows, payload) -> list[Path]:
    files = []
    if "csv" in rc.formats:
        files.append(write_csv(out / f"{stem}.csv", header, rows))
    if "json" in rc.formats:
        files.append(write_json(out / f"{stem}.json", payload))
    return files


def cmd_forward(rc: RunConfig, out: Path, threads: int):
    p = rc.problem
    res = forward_endpoints(p.dom, p.coeffs, np.asarray(p.x0), p.bundle(), threads=threads)
    d = p.dom.dim
    header = ["path", *[f"x{i + 1}" for i in range(d)], "A_T", "min_phi"]
    rows = ([m, *res["X_T"][m], res["A_T"][m], res["min_phi"][m]] for m in range(p.M))
    A = res["A_T"]
    summary = {"mean_A_T": float(A.mean()), "std_err_A_T": float(A.std() / np.sqrt(len(A))),
               "min_phi": float(res["min_phi"].min()),
               "containment_violations": int(np.sum(res["min_phi"] < -TOL_PROJ)),
               "mean_X_T": res["X_T"].mean(axis=0).tolist()}
    return _outputs(rc, out, "forward", header, rows, summary), True


def cmd_solve(rc: RunConfig, out: Path, threads: int):
    p = rc.problem
    sol, fwd, _ = run_problem(p, threads=threads)
    d = p.dom.dim
    t = p.grid.nodes
    header = ["t", "y_mean", "y_std_err", *[f"z{i + 1}_mean" for i in range(d)], "u_mean", "v_mean"]

    def rows():
        for k in range(p.grid.N + 1):
            if k < p.grid.N:
                z = sol.Z[k].mean(axis=0)
                u, v = sol.U[k].mean(), sol.V[k].mean()
            else:
                z, u, v = [np.nan] * d, np.nan, np.nan
            yield [t[k], sol.Y[k].mean(), sol.y_se[k], *z, u, v]

    summary = {"Y0": float(sol.Y[0].mean()), "Y0_std_err": float(sol.y_se[0]),
               "mean_A_T": float(fwd.A[-1].mean()), "regression_fallback_steps": len(sol.fallback_steps)}
    return _outputs(rc, out, "solution", header, rows(), summary), True


def cmd_field(rc: RunConfig, out: Path, threads: int):
    p = rc.problem
    grid = FieldGrid(rc.field_times, rc.field_points, p.scenario_seed)
    res = build_field(grid, p.dom, p.coeffs, p.phi, p.psi, p.config, p.grid, p.M, p.seed, threads=threads)
    d = p.dom.dim
    header = ["t", *[f"x{i + 1}" for i in range(d)], "u", "std_err"]
    diag = None
    if len(rc.field_times) >= 2 and len(rc.field_points) >= 2:
        diag = field_diagnostics(res, p.dom, p.phi, p.psi, p.coeffs)
    payload = {"rows": [list(r) for r in res.rows()], "diagnostics": diag, "meta": res.meta}
    return _outputs(rc, out, "field", header, res.rows(), payload), True


def cmd_verify(rc: RunConfig, out: Path, threads: int):
    p = rc.problem
    reports: list[dict[str, Any]] = []
    for name in rc.verify_checks:
        if name == "moreau_yosida":
            reports.append(moreau_yosida_suite(rc.verify_draws, p.seed))
        elif name == "modulus":
            inv = modulus_invariants(ModulusRho.from_config(p.coeffs.modulus))
            ok = inv["rho_at_zero"] == 0 and all(v for k, v in inv.items() if isinstance(v, bool))
            reports.append(report("modulus", ok, inv, p.coeffs.modulus, p.seed))
        elif name == "coefficients":
            reports.append(coefficient_spot_check(p.coeffs, seed=p.seed, dim=p.dom.dim))
        elif name == "comparison":
            reports.append(comparison_check(p, comparison_problem(p, rc.comparison), threads=threads))
    rows = ([r["name"], int(r["pass"]), r["config_hash"]] for r in reports)
    files = _outputs(rc, out, "verify", ["name", "pass", "config_hash"], rows, reports)
    return files, all(r["pass"] for r in reports)


def cmd_rate(rc: RunConfig, out: Path, threads: int):
    rep = yosida_rate_fit(rc.problem, rc.rate_eps, threads=threads)
    m = rep["metrics"]
    rows = zip(m["eps"], m["gaps"])
    return _outputs(rc, out, "rate", ["eps", "gap"], rows, rep), rep["pass"]


HANDLERS = {"forward": cmd_forward, "solve": cmd_solve, "field": cmd_field, "verify": cmd_verify,
            "rate": cmd_rate}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vibdsde", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", help="JSON run configuration")
    ap.add_argument("--seed", type=int, help="overrides monte_carlo.seed and VIBDSDE_SEED")
    ap.add_argument("--paths", type=int, help="overrides monte_carlo.M")
    ap.add_argument("--steps", type=int, help="overrides grid.N")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--threads", type=int, default=1, help="parallelism cap; outputs do not depend on it")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        data, text = load_config(args.config)
        rc = parse_config(data, text, command=args.command, seed=args.seed, paths=args.paths,
                          steps=args.steps, out=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(rc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = rc.resolved()
    try:
        files, ok = HANDLERS[rc.command](rc, out, args.threads)
    except VibdsdeError as exc:
        code = EXIT_VERIFY if exc.category == "verification" else EXIT_RUNTIME
        if exc.category == "config":
            code = EXIT_CONFIG
        write_manifest(out, resolved, rc.problem.seed, [], status="error",
                       error={"type": type(exc).__name__, "category": exc.category, "message": str(exc)})
        print(f"{exc.category} error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    write_manifest(out, resolved, rc.problem.seed, files, status="ok" if ok else "verification_failed")
    for f in files:
        print(f)
    print(out / "manifest.json")
    return EXIT_OK if ok else EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
