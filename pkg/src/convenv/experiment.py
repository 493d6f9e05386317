"""Refinement sweeps: solve at several mesh sizes, measure errors, fit orders.

A sweep is described by an :class:`ExperimentConfig`. Each level uses
``delta = C_delta * h**a`` and ``theta = C_theta * h**b``, and its error is
the nodal maximum of ``|I_h u - u_eps|``.
"""
from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .directions import build_angular, build_lattice
from .envelopes import ExampleProblem, get_example
from .mesh import MeshTooLarge, NotInMesh, build_mesh
from .operator import DiscretizationParams, build_stencils
from .solver import MaxIterationsExceeded, SingularSystem, howard_solve, solve_polytope
from .widestencil import build_grid, wide_howard_solve

log = logging.getLogger(__name__)

METHODS = ("two_scale", "wide_stencil", "polytope")
TABLE_COLUMNS = ["h", "delta", "theta", "S", "nodes", "error_linf", "iters", "runtime_s"]
RATE_COLUMNS = ["scaling", "order", "residual"]

# failures that mark a level as failed instead of aborting the sweep
LEVEL_ERRORS = (MaxIterationsExceeded, SingularSystem, NotInMesh, MeshTooLarge,
                MemoryError, ValueError, AssertionError)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One refinement sweep.

    ``regression_window`` is the number of finest successful levels entering
    the order fit (``0`` uses all of them).
    """

    example: str | ExampleProblem = "ex1"
    method: str = "two_scale"
    levels: tuple = (2.0 ** -4, 2.0 ** -5, 2.0 ** -6)
    delta_c: float = 0.5
    delta_exp: float = 0.5
    theta_c: float = 0.25
    theta_exp: float = 0.5
    regression_window: int = 3
    out_dir: str | None = None
    seed: int = 0
    max_iter: int = 100

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        lv = tuple(float(h) for h in self.levels)
        object.__setattr__(self, "levels", lv)
        if any(h <= 0 for h in lv) or any(b >= a for a, b in zip(lv, lv[1:])):
            raise ConfigError("levels must be positive and strictly decreasing")
        if self.delta_c <= 0 or self.theta_c <= 0:
            raise ConfigError("delta_c and theta_c must be positive")
        if self.regression_window < 0 or self.max_iter < 1:
            raise ConfigError("regression_window must be >= 0 and max_iter >= 1")
        if isinstance(self.example, str):
            try:
                get_example(self.example)
            except KeyError as exc:
                raise ConfigError(str(exc)) from None

    @property
    def problem(self) -> ExampleProblem:
        return self.example if isinstance(self.example, ExampleProblem) else get_example(self.example)

    @property
    def scaling(self) -> str:
        return (f"{self.problem.id}:{self.method}:delta={self.delta_c:g}h^{self.delta_exp:.4g}"
                f":theta={self.theta_c:g}h^{self.theta_exp:.4g}")

    def delta(self, h: float) -> float:
        floor = np.sqrt(2.0) * h if self.method == "wide_stencil" else h
        return max(floor, self.delta_c * h ** self.delta_exp)

    def theta(self, h: float) -> float:
        return min(1.0, self.theta_c * h ** self.theta_exp)


@dataclass
class LevelResult:
    h: float
    delta: float
    theta: float
    S: int
    nodes: int
    error_linf: float
    iters: int
    runtime_s: float
    failed: bool = False
    message: str = ""


@dataclass
class ConvergenceReport:
    scaling: str
    levels: list = field(default_factory=list)
    order: float = float("nan")
    residual: float = float("nan")

    @property
    def failed(self) -> bool:
        return any(lv.failed for lv in self.levels)


def fit_order(hs, errors):
    """Least-squares slope of ``log(error)`` against ``log(h)``.

    Returns ``(order, residual)`` with ``residual`` the 2-norm of the fit
    residuals in log space.
    """
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    ok = np.isfinite(hs) & np.isfinite(errors) & (hs > 0) & (errors > 0)
    if ok.sum() < 2:
        raise ValueError("need at least two valid (h, error) pairs")
    x, y = np.log(hs[ok]), np.log(errors[ok])
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0]), float(np.linalg.norm(A @ coef - y))


def run_level(config: ExperimentConfig, h: float) -> LevelResult:
    ex = config.problem
    delta, theta = config.delta(h), config.theta(h)
    t0 = time.perf_counter()
    if config.method == "wide_stencil":
        grid = build_grid(ex.domain, h)
        dirs = build_lattice(h, delta)
        rep, _ = wide_howard_solve(ex.f, grid, dirs, max_iter=config.max_iter)
        err = np.abs(rep.u - ex.u_exact(grid.nodes)).max()
        n = grid.n_nodes
    else:
        mesh = build_mesh(ex.domain, h)
        dirs = build_angular(theta)
        params = DiscretizationParams(h, delta, theta)
        fv = mesh.interpolate(ex.f)
        if config.method == "polytope":
            rep = solve_polytope(fv, mesh, params, dirs, max_iter=config.max_iter)
        else:
            rep = howard_solve(fv, build_stencils(mesh, params, dirs), max_iter=config.max_iter)
        err = np.abs(rep.u - mesh.interpolate(ex.u_exact)).max()
        n = mesh.n_nodes
    return LevelResult(h, delta, theta, dirs.S, n, float(err), rep.iterations,
                       time.perf_counter() - t0)


def _safe_level(config, h):
    try:
        return run_level(config, h)
    except LEVEL_ERRORS as exc:
        log.error("level h=%g failed: %s", h, exc)
        nan = float("nan")
        return LevelResult(h, config.delta(h), config.theta(h), 0, 0, nan, 0, nan,
                           failed=True, message=f"{type(exc).__name__}: {exc}")


def max_workers(n_jobs: int) -> int:
    raw = os.environ.get("CE_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"CE_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(cap, n_jobs))


def run_experiment(config: ExperimentConfig) -> ConvergenceReport:
    """Solve every level; failed levels are marked and skipped by the fit."""
    workers = max_workers(len(config.levels))
    if workers == 1:
        results = [_safe_level(config, h) for h in config.levels]
    else:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda h: _safe_level(config, h), config.levels))
    report = ConvergenceReport(config.scaling, results)
    good = [lv for lv in results if not lv.failed]
    if config.regression_window:
        good = good[-config.regression_window:]
    if len(good) >= 2:
        report.order, report.residual = fit_order([lv.h for lv in good],
                                                  [lv.error_linf for lv in good])
    return report


# ----------------------------------------------------------------------------
# report files
# ----------------------------------------------------------------------------

def emit_report(reports, out_dir) -> dict:
    """Write ``table.csv``, ``rates.csv`` and ``plot.dat`` under ``out_dir``."""
    if isinstance(reports, ConvergenceReport):
        reports = [reports]
    out = Path(out_dir)
    paths = {k: out / k for k in ("table.csv", "rates.csv", "plot.dat")}
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(paths["table.csv"], "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(TABLE_COLUMNS)
            for rep in reports:
                for lv in rep.levels:
                    wr.writerow([repr(lv.h), repr(lv.delta), repr(lv.theta), lv.S, lv.nodes,
                                 repr(lv.error_linf), lv.iters, f"{lv.runtime_s:.3f}"])
        with open(paths["rates.csv"], "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(RATE_COLUMNS)
            for rep in reports:
                wr.writerow([rep.scaling, repr(rep.order), repr(rep.residual)])
        with open(paths["plot.dat"], "w") as fh:
            for rep in reports:
                fh.write(f"# {rep.scaling}  order {rep.order:.4f}\n# h error_linf\n")
                for lv in rep.levels:
                    if not lv.failed:
                        fh.write(f"{lv.h!r} {lv.error_linf!r}\n")
                fh.write("\n\n")
    except OSError as exc:
        raise OSError(f"cannot write report under {out}: {exc}") from exc
    return paths


def read_report(out_dir) -> list:
    """Parse ``table.csv`` and ``rates.csv`` back into reports.

    Level rows are split between scalings by the level counts implied by
    strictly decreasing ``h``.
    """
    out = Path(out_dir)
    with open(out / "table.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    with open(out / "rates.csv", newline="") as fh:
        rates = list(csv.DictReader(fh))
    groups, cur = [], []
    for row in rows:
        lv = LevelResult(float(row["h"]), float(row["delta"]), float(row["theta"]), int(row["S"]),
                         int(row["nodes"]), float(row["error_linf"]), int(row["iters"]),
                         float(row["runtime_s"]))
        lv.failed = not np.isfinite(lv.error_linf)
        if cur and lv.h >= cur[-1].h:
            groups.append(cur)
            cur = []
        cur.append(lv)
    if cur:
        groups.append(cur)
    while len(groups) < len(rates):
        groups.append([])
    return [ConvergenceReport(r["scaling"], g, float(r["order"]), float(r["residual"]))
            for r, g in zip(rates, groups)]


# ----------------------------------------------------------------------------
# config files: flat ``key = value`` lines, ``#`` starts a comment
# ----------------------------------------------------------------------------

def parse_number(text: str) -> float:
    """Float from ``0.25``, ``1/3`` or ``2^-5``."""
    s = text.strip().replace(" ", "")
    try:
        if "^" in s:
            base, exp = s.split("^", 1)
            return float(Fraction(base)) ** float(Fraction(exp))
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def _parse_levels(text: str) -> tuple:
    return tuple(parse_number(t) for t in text.split(",") if t.strip())


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


CONFIG_KEYS = {
    "example": str,
    "method": str,
    "levels": _parse_levels,
    "delta_c": parse_number,
    "delta_exp": parse_number,
    "theta_c": parse_number,
    "theta_exp": parse_number,
    "regression_window": _parse_int,
    "out_dir": str,
    "seed": _parse_int,
    "max_iter": _parse_int,
}


def parse_config_text(text: str) -> dict:
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        values[key] = val
    return values


def make_config(raw: dict) -> ExperimentConfig:
    """Build a config from string values (file entries and overrides)."""
    kwargs = {}
    for key, val in raw.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        kwargs[key] = CONFIG_KEYS[key](val)
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    raw = parse_config_text(text)
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return make_config(raw)


def table1_configs(full: bool = False) -> list:
    """The first example with ``delta = 0.5 h^(1/2)``, ``theta = 0.25 h^(1/2)``."""
    ks = range(4, 9) if full else range(4, 7)
    return [ExperimentConfig("ex1", "two_scale", tuple(2.0 ** -k for k in ks))]


__all__ = [
    "ConfigError", "ExperimentConfig", "LevelResult", "ConvergenceReport", "fit_order",
    "run_level", "run_experiment", "emit_report", "read_report", "parse_number",
    "parse_config_text", "make_config", "load_config", "table1_configs",
]
