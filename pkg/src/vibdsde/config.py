"""JSON run configuration: parsing, validation and conversion to a :class:`Problem`."""
from __future__ import annotations

import copy
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .backward import SolverConfig
from .coefficients import CoefficientSet
from .convex import ConvexSpec
from .errors import BadParameter, ConfigError
from .forward import DomainSpec
from .noise import make_time_grid
from .problem import Problem

COMMANDS = ("forward", "solve", "field", "verify", "rate")
FORMATS = ("csv", "json")
VERIFY_CHECKS = ("moreau_yosida", "modulus", "coefficients", "comparison")
SEED_ENV = "VIBDSDE_SEED"

_TOP = {"command", "domain", "coefficients", "constraints", "grid", "monte_carlo", "solver", "output",
        "x0", "field", "verify", "rate"}
_SECTIONS = {
    "constraints": {"phi", "psi"},
    "grid": {"t0", "T", "N"},
    "monte_carlo": {"M", "seed", "scenario_seed"},
    "output": {"dir", "formats"},
    "field": {"times", "points"},
    "verify": {"checks", "comparison", "draws"},
    "rate": {"eps"},
}


@dataclass
class RunConfig:
    command: str
    problem: Problem
    out_dir: str = "out"
    formats: tuple[str, ...] = FORMATS
    field_times: list[float] = field(default_factory=list)
    field_points: list[list[float]] = field(default_factory=list)
    verify_checks: list[str] = field(default_factory=lambda: list(VERIFY_CHECKS[:3]))
    verify_draws: int = 10_000
    comparison: dict[str, Any] | None = None
    rate_eps: list[float] = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    raw: dict[str, Any] = field(default_factory=dict)

    def resolved(self) -> dict[str, Any]:
        """Full configuration after defaults and overrides; re-parses to the same run."""
        p = self.problem.to_config()
        out: dict[str, Any] = {"command": self.command, **p,
                               "output": {"dir": self.out_dir, "formats": list(self.formats)}}
        if self.command == "field":
            out["field"] = {"times": self.field_times, "points": self.field_points}
        if self.command == "verify":
            out["verify"] = {"checks": self.verify_checks, "draws": self.verify_draws}
            if self.comparison is not None:
                out["verify"]["comparison"] = self.comparison
        if self.command == "rate":
            out["rate"] = {"eps": self.rate_eps}
        return out


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _fail(text: str, key: str, msg: str):
    line = _line_of(text, key.split(".")[-1])
    where = f" (line {line})" if line else ""
    raise ConfigError(f"{msg}: {key!r}{where}", key=key, line=line)


def load_config(path: str | os.PathLike) -> tuple[dict[str, Any], str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                          line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data, text


def parse_config(data: dict[str, Any], text: str = "", command: str | None = None, seed: int | None = None,
                 paths: int | None = None, steps: int | None = None, out: str | None = None) -> RunConfig:
    """Validate ``data`` and apply overrides.

    Seed precedence: ``seed`` argument, then the ``VIBDSDE_SEED`` environment
    variable, then ``monte_carlo.seed``.
    """
    data = copy.deepcopy(data)
    text = text or json.dumps(data, indent=1)
    for key in data:
        if key not in _TOP:
            _fail(text, key, "unknown config key")
    for sec, allowed in _SECTIONS.items():
        body = data.get(sec)
        if body is None:
            continue
        if not isinstance(body, dict):
            _fail(text, sec, "section must be an object")
        for key in body:
            if key not in allowed:
                _fail(text, f"{sec}.{key}", "unknown config key")

    cmd = command or data.get("command")
    if cmd not in COMMANDS:
        _fail(text, "command", f"command must be one of {COMMANDS}, got {cmd!r}")

    def build(section, fn, *args):
        try:
            return fn(*args)
        except (BadParameter, TypeError, ValueError) as exc:
            _fail(text, section, f"invalid {section} ({exc})")

    dom = build("domain", DomainSpec.from_config, data.get("domain", {"kind": "whole_space", "dim": 1}))
    coeffs = build("coefficients", CoefficientSet.from_config, data.get("coefficients", {}))
    cons = data.get("constraints", {})
    phi = build("constraints.phi", ConvexSpec.from_config, cons.get("phi"))
    psi = build("constraints.psi", ConvexSpec.from_config, cons.get("psi"))
    solver = build("solver", SolverConfig.from_config, data.get("solver"))
    g = data.get("grid", {})
    N = steps if steps is not None else g.get("N", 100)
    grid = build("grid", make_time_grid, float(g.get("t0", 0.0)), float(g.get("T", 1.0)), N)
    mc = data.get("monte_carlo", {})
    M = paths if paths is not None else mc.get("M", 1000)
    if not isinstance(M, int) or M < 1:
        _fail(text, "monte_carlo.M", f"M must be a positive integer, got {M!r}")
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {os.environ[SEED_ENV]!r}", key=SEED_ENV) from None
    seed = seed if seed is not None else mc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        _fail(text, "monte_carlo.seed", f"seed must be a non-negative integer, got {seed!r}")
    scen = mc.get("scenario_seed")
    x0 = data.get("x0", [0.0] * dom.dim)
    if not isinstance(x0, list) or len(x0) != dom.dim:
        _fail(text, "x0", f"x0 must be a list of {dom.dim} numbers")
    problem = Problem(dom, coeffs, phi, psi, tuple(float(v) for v in x0), grid, M, seed, scen, solver)
    if cmd in ("forward", "solve", "rate"):
        if dom.phi(problem.x0) < 0:
            _fail(text, "x0", "x0 must lie in the closed domain")

    o = data.get("output", {})
    formats = o.get("formats", list(FORMATS))
    if not isinstance(formats, list) or not formats or any(f not in FORMATS for f in formats):
        _fail(text, "output.formats", f"formats must be a non-empty subset of {FORMATS}")
    rc = RunConfig(cmd, problem, out if out is not None else o.get("dir", "out"),
                   tuple(f for f in FORMATS if f in formats), raw=data)

    if cmd == "field":
        fsec = data.get("field") or _fail(text, "field", "field command needs a 'field' section")
        times, points = fsec.get("times"), fsec.get("points")
        if not times or not points:
            _fail(text, "field", "field section needs non-empty 'times' and 'points'")
        rc.field_times = [float(t) for t in times]
        rc.field_points = [[float(v) for v in (p if isinstance(p, list) else [p])] for p in points]
        for t in rc.field_times:
            build("field.times", grid.index_of, t)
    if cmd == "verify":
        vsec = data.get("verify", {})
        checks = vsec.get("checks", rc.verify_checks)
        bad = [c for c in checks if c not in VERIFY_CHECKS]
        if bad:
            _fail(text, "verify.checks", f"unknown checks {bad}; known {list(VERIFY_CHECKS)}")
        rc.verify_checks = list(checks)
        rc.verify_draws = int(vsec.get("draws", rc.verify_draws))
        if "comparison" in checks:
            comp = vsec.get("comparison")
            if not isinstance(comp, dict) or set(comp) - {"chi", "f", "g"} or not comp:
                _fail(text, "verify.comparison", "comparison needs an object overriding some of chi, f, g")
            build("verify.comparison", comparison_problem, problem, comp)
            rc.comparison = comp
    if cmd == "rate":
        eps = data.get("rate", {}).get("eps", rc.rate_eps)
        rc.rate_eps = [float(e) for e in eps]
        if len(eps) < 3 or any(b >= a for a, b in zip(rc.rate_eps, rc.rate_eps[1:])) or rc.rate_eps[-1] <= 0:
            _fail(text, "rate.eps", "eps needs >= 3 strictly decreasing positive values")
    return rc


def comparison_problem(problem: Problem, overrides: dict[str, Any]) -> Problem:
    """Second problem of a comparison: ``problem`` with ``chi``, ``f``, ``g`` replaced."""
    cfg = problem.coeffs.to_config()
    cfg.update(overrides)
    return problem.with_(coeffs=CoefficientSet.from_config(cfg))
