"""Convergence and noise studies over the manufactured benchmarks, plus CSV I/O.

Study runs invert the analytic measurement series of a benchmark (the
machine-precision roundtrip against discretely generated data lives in the
test suite, where it belongs).  Errors in the state are taken at the final
time over interior nodes; the coefficient error is the sup over the half-step
times where the recovery defines it.  All output is deterministic: rerunning
a study with the same configuration writes byte-identical files.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .forward import make_step_operators
from .grid import CoefficientSeries, Grid, Trajectory, make_grid
from .inverse import (
    DenominatorNearZero,
    NoiseSpec,
    perturb_measurements,
    run_inverse,
    smooth_measurements,
)
from .manufactured import ManufacturedProblem, build_manufactured
from .riesz import assemble

__all__ = [
    "StudyConfig",
    "ConvergenceRow",
    "ConvergenceTable",
    "InverseRunResult",
    "NoiseCase",
    "NoiseStudyResult",
    "rate_fit",
    "run_inverse_case",
    "convergence_study_time",
    "convergence_study_space",
    "noise_study",
    "emit_outputs",
    "write_csv",
    "format_float",
    "load_config",
]


@dataclass(frozen=True)
class StudyConfig:
    """Settings of one study; file keys and CLI flags map onto these fields."""

    example: str = "example1"
    s: float = 0.5
    l: float = 1.0
    t_final: float = 1.0
    n_values: Tuple[int, ...] = (800,)
    m_values: Tuple[int, ...] = (50, 100, 200, 400, 800)
    tau_equals_h: bool = False
    solver: Optional[str] = None
    tol: float = 1e-12
    deltas: Tuple[float, ...] = (0.01, 0.03, 0.05)
    seeds: Tuple[int, ...] = tuple(range(10))
    source: str = "discrete"
    smooth_window: int = 1
    out: str = "out"

    def __post_init__(self) -> None:
        if not self.n_values or not self.m_values:
            raise ValueError("n_values and m_values must be nonempty")
        if self.example not in ("example1", "example2"):
            raise ValueError(f"unknown example {self.example!r}")
        if not 0.0 < self.s < 1.0:
            raise ValueError("s must lie in (0, 1)")
        if self.source not in ("discrete", "quadrature"):
            raise ValueError(f"unknown source {self.source!r}")
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ValueError("smooth_window must be odd and >= 1")


def format_float(x: float) -> str:
    """17 significant digits: enough to round-trip any double, reproducibly."""
    return f"{x:.17g}"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a CSV with LF endings and full-precision floats; overwrite quietly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(format_float(v) if isinstance(v, float) else str(v) for v in row)
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def rate_fit(errors: Sequence[float], steps: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(step)."""
    errors = np.asarray(errors, dtype=float)
    steps = np.asarray(steps, dtype=float)
    if errors.size < 2 or errors.size != steps.size:
        raise ValueError("need at least two matching (error, step) pairs")
    if np.any(errors <= 0.0) or np.any(steps <= 0.0):
        raise ValueError("errors and steps must be positive")
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])


@dataclass(frozen=True)
class InverseRunResult:
    """One inverse run against a benchmark, with errors versus the exact data."""

    grid: Grid
    problem: ManufacturedProblem
    trajectory: Trajectory
    recovered: CoefficientSeries
    linf_u: float
    l2_u: float
    linf_r: float
    l2_r: float
    measurement_provenance: str

    def r_rows(self) -> List[Tuple[float, float, float, float]]:
        t_mid = self.grid.midpoint_times()
        exact = self.problem.r_at_midpoints(self.grid)
        rec = self.recovered.values
        return [
            (float(t_mid[n]), float(rec[n]), float(exact[n]), float(abs(rec[n] - exact[n])))
            for n in range(self.grid.M)
        ]

    def u_rows(self) -> List[Tuple[float, float, float, float]]:
        x = self.grid.interior_x()
        exact = self.problem.u_exact(self.grid.T, x)
        num = self.trajectory.final
        return [
            (float(x[i]), float(num[i]), float(exact[i]), float(abs(num[i] - exact[i])))
            for i in range(x.size)
        ]


def _errors_against_exact(
    problem: ManufacturedProblem, grid: Grid, trajectory: Trajectory, recovered: CoefficientSeries
) -> Tuple[float, float, float, float]:
    x = grid.interior_x()
    du = trajectory.final - problem.u_exact(grid.T, x)
    dr = recovered.values - problem.r_at_midpoints(grid)
    linf_u = float(np.max(np.abs(du)))
    l2_u = float(np.sqrt(grid.h * np.sum(du * du)))
    linf_r = float(np.max(np.abs(dr)))
    l2_r = float(np.sqrt(grid.tau * np.sum(dr * dr)))
    return linf_u, l2_u, linf_r, l2_r


def run_inverse_case(
    example: str,
    grid: Grid,
    source: str = "discrete",
    solver: Optional[str] = None,
    tol: float = 1e-12,
    noise: Optional[NoiseSpec] = None,
    smooth_window: Optional[int] = None,
) -> InverseRunResult:
    """Invert one benchmark on one grid from its analytic measurements.

    Optional seeded noise is applied first, then optional smoothing; both are
    recorded in the result's measurement provenance.  ``smooth_window``
    defaults to the window carried by the noise spec (1 = off).
    """
    op = assemble(grid)
    spec, data = build_manufactured(example, grid, source=source, op=op)
    measurements = data.measurements
    noisy = noise is not None and noise.delta > 0.0
    if smooth_window is None:
        smooth_window = noise.smoothing_window if noise is not None else 1
    if noisy:
        measurements = perturb_measurements(measurements, noise)
    if smooth_window > 1:
        measurements = smooth_measurements(measurements, smooth_window)
    ops = make_step_operators(grid, op=op, solver=solver, tol=tol)
    with warnings.catch_warnings():
        if noisy:
            # noisy data is incompatible with phi at t=0 by construction
            warnings.simplefilter("ignore", UserWarning)
        trajectory, recovered = run_inverse(data, grid, measurements=measurements, ops=ops)
    linf_u, l2_u, linf_r, l2_r = _errors_against_exact(spec, grid, trajectory, recovered)
    return InverseRunResult(
        grid=grid,
        problem=spec,
        trajectory=trajectory,
        recovered=recovered,
        linf_u=linf_u,
        l2_u=l2_u,
        linf_r=linf_r,
        l2_r=l2_r,
        measurement_provenance=measurements.provenance,
    )


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    tau: float
    linf_u: float
    l2_u: float
    linf_r: float
    order_u: Optional[float]  # between this row and the previous one
    order_r: Optional[float]


@dataclass(frozen=True)
class ConvergenceTable:
    """Rows of a refinement study plus least-squares fitted orders."""

    rows: Tuple[ConvergenceRow, ...]
    varied: str  # "tau" or "h"

    def steps(self) -> np.ndarray:
        return np.array([r.tau if self.varied == "tau" else r.h for r in self.rows])

    def fitted_order_u(self) -> float:
        return rate_fit([r.linf_u for r in self.rows], self.steps())

    def fitted_order_r(self) -> float:
        return rate_fit([r.linf_r for r in self.rows], self.steps())

    def csv_rows(self) -> List[Tuple]:
        out: List[Tuple] = []
        for r in self.rows:
            out.append(
                (
                    r.h,
                    r.tau,
                    r.linf_u,
                    r.l2_u,
                    r.linf_r,
                    "" if r.order_u is None else format_float(r.order_u),
                    "" if r.order_r is None else format_float(r.order_r),
                )
            )
        return out


def _order(prev_err: float, err: float, prev_step: float, step: float) -> float:
    return math.log(prev_err / err) / math.log(prev_step / step)


def _table_from_cases(cases: List[InverseRunResult], varied: str) -> ConvergenceTable:
    rows: List[ConvergenceRow] = []
    for k, case in enumerate(cases):
        step = case.grid.tau if varied == "tau" else case.grid.h
        if k == 0:
            order_u = order_r = None
        else:
            prev = cases[k - 1]
            prev_step = prev.grid.tau if varied == "tau" else prev.grid.h
            order_u = _order(prev.linf_u, case.linf_u, prev_step, step)
            order_r = _order(prev.linf_r, case.linf_r, prev_step, step)
        rows.append(
            ConvergenceRow(
                h=case.grid.h,
                tau=case.grid.tau,
                linf_u=case.linf_u,
                l2_u=case.l2_u,
                linf_r=case.linf_r,
                order_u=order_u,
                order_r=order_r,
            )
        )
    return ConvergenceTable(rows=tuple(rows), varied=varied)


def convergence_study_time(config: StudyConfig) -> ConvergenceTable:
    """Refine tau at fixed N: errors should fall at the stepper's second order."""
    n = config.n_values[0]
    cases = []
    for m in config.m_values:
        grid = make_grid(config.l, config.t_final, n, m, config.s)
        cases.append(
            run_inverse_case(config.example, grid, config.source, config.solver, config.tol)
        )
    return _table_from_cases(cases, varied="tau")


def convergence_study_space(config: StudyConfig) -> ConvergenceTable:
    """Refine h with tau = h: spatial consistency enters through the source mode."""
    cases = []
    for n in config.n_values:
        m = round(n * config.t_final / config.l)
        grid = make_grid(config.l, config.t_final, n, max(m, 1), config.s)
        cases.append(
            run_inverse_case(config.example, grid, config.source, config.solver, config.tol)
        )
    return _table_from_cases(cases, varied="h")


@dataclass(frozen=True)
class NoiseCase:
    """One (delta, seed) recovery, raw and (optionally) smoothed."""

    delta: float
    seed: int
    completed: bool
    linf_r: float
    l2_r: float
    linf_r_smoothed: Optional[float]
    result: Optional[InverseRunResult]
    failure: str = ""


@dataclass(frozen=True)
class NoiseStudyResult:
    example: str
    s: float
    cases: Tuple[NoiseCase, ...]
    smooth_window: int

    def mean_linf_r(self) -> dict:
        """Mean raw coefficient error per noise level, over completed seeds."""
        out: dict = {}
        for delta in sorted({c.delta for c in self.cases}):
            errs = [c.linf_r for c in self.cases if c.delta == delta and c.completed]
            out[delta] = float(np.mean(errs)) if errs else float("nan")
        return out

    @property
    def all_completed(self) -> bool:
        return all(c.completed for c in self.cases)


def noise_study(config: StudyConfig) -> NoiseStudyResult:
    """Recover the coefficient from noisy measurements over a seed ensemble.

    A denominator failure aborts only its own (delta, seed) case.  When the
    configured smoothing window exceeds 1, each case is recovered twice: from
    the raw noisy series and from the smoothed one.
    """
    n = config.n_values[0]
    m = config.m_values[0]
    grid = make_grid(config.l, config.t_final, n, m, config.s)
    cases: List[NoiseCase] = []
    for delta in config.deltas:
        for seed in config.seeds:
            spec = NoiseSpec(delta=delta, seed=seed)
            try:
                raw = run_inverse_case(
                    config.example, grid, config.source, config.solver, config.tol, noise=spec
                )
                smoothed_err = None
                if config.smooth_window > 1:
                    smoothed = run_inverse_case(
                        config.example,
                        grid,
                        config.source,
                        config.solver,
                        config.tol,
                        noise=spec,
                        smooth_window=config.smooth_window,
                    )
                    smoothed_err = smoothed.linf_r
                cases.append(
                    NoiseCase(
                        delta=delta,
                        seed=seed,
                        completed=True,
                        linf_r=raw.linf_r,
                        l2_r=raw.l2_r,
                        linf_r_smoothed=smoothed_err,
                        result=raw,
                    )
                )
            except DenominatorNearZero as exc:
                cases.append(
                    NoiseCase(
                        delta=delta,
                        seed=seed,
                        completed=False,
                        linf_r=float("nan"),
                        l2_r=float("nan"),
                        linf_r_smoothed=None,
                        result=None,
                        failure=str(exc),
                    )
                )
    return NoiseStudyResult(
        example=config.example, s=config.s, cases=tuple(cases), smooth_window=config.smooth_window
    )


def emit_outputs(result, outdir) -> List[Path]:
    """Write the CSV artifacts of a study result; returns the paths written."""
    outdir = Path(outdir)
    written: List[Path] = []
    if isinstance(result, ConvergenceTable):
        written.append(
            write_csv(
                outdir / "table.csv",
                ("h", "tau", "linf_u", "l2_u", "linf_r", "order_u", "order_r"),
                result.csv_rows(),
            )
        )
    elif isinstance(result, NoiseStudyResult):
        summary_rows = []
        for case in result.cases:
            tag = f"delta{case.delta:g}_seed{case.seed}"
            if case.completed and case.result is not None:
                written.append(
                    write_csv(
                        outdir / f"r_recovered_{tag}.csv",
                        ("t_mid", "r_recovered", "r_exact", "abs_error"),
                        case.result.r_rows(),
                    )
                )
                written.append(
                    write_csv(
                        outdir / f"u_final_{tag}.csv",
                        ("x", "u_num", "u_exact", "abs_error"),
                        case.result.u_rows(),
                    )
                )
            summary_rows.append(
                (
                    case.delta,
                    case.seed,
                    int(case.completed),
                    case.linf_r,
                    case.l2_r,
                    float("nan") if case.linf_r_smoothed is None else case.linf_r_smoothed,
                )
            )
        written.append(
            write_csv(
                outdir / "noise_summary.csv",
                ("delta", "seed", "completed", "linf_r", "l2_r", "linf_r_smoothed"),
                summary_rows,
            )
        )
    elif isinstance(result, InverseRunResult):
        written.append(
            write_csv(
                outdir / "r_series.csv",
                ("t_mid", "r_recovered", "r_exact", "abs_error"),
                result.r_rows(),
            )
        )
        written.append(
            write_csv(
                outdir / "u_final.csv",
                ("x", "u_num", "u_exact", "abs_error"),
                result.u_rows(),
            )
        )
    else:
        raise TypeError(f"no CSV writer for result of type {type(result).__name__}")
    return written


_LIST_KEYS = {"n_values", "m_values", "deltas", "seeds"}
_INT_KEYS = {"smooth_window"}
_FLOAT_KEYS = {"s", "l", "t_final", "tol"}
_BOOL_KEYS = {"tau_equals_h"}


def load_config(path) -> StudyConfig:
    """Parse a flat ``key = value`` UTF-8 config file; unknown keys are rejected."""
    path = Path(path)
    known = {f.name for f in fields(StudyConfig)}
    values: dict = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key in _LIST_KEYS:
            parts = [p for p in value.split(",") if p.strip()]
            if key in ("n_values", "m_values", "seeds"):
                values[key] = tuple(int(p) for p in parts)
            else:
                values[key] = tuple(float(p) for p in parts)
        elif key in _INT_KEYS:
            values[key] = int(value)
        elif key in _FLOAT_KEYS:
            values[key] = float(value)
        elif key in _BOOL_KEYS:
            if value.lower() not in ("true", "false", "0", "1"):
                raise ValueError(f"{path}:{lineno}: boolean expected, got {value!r}")
            values[key] = value.lower() in ("true", "1")
        else:
            values[key] = value
    return StudyConfig(**values)
