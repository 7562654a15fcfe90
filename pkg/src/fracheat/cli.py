"""Command-line front end: forward/inverse runs, studies, and operator dumps.

Every command accepts a flat ``key = value`` config file; explicit flags
override file values, which override built-in defaults.  All numeric output
goes to CSV files with 17-significant-digit floats, so reruns with the same
configuration are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .forward import make_step_operators, run_forward
from .grid import make_grid
from .inverse import DenominatorNearZero, NoiseSpec
from .manufactured import build_manufactured
from .riesz import assemble, quadrature_oracle
from .studies import (
    StudyConfig,
    convergence_study_space,
    convergence_study_time,
    emit_outputs,
    load_config,
    noise_study,
    rate_fit,
    run_inverse_case,
    write_csv,
)

_EXAMPLES = {"1": "example1", "2": "example2"}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--example", choices=("1", "2"), default=None, help="benchmark problem id")
    p.add_argument("--s", type=float, default=None, help="fractional order in (0, 1)")
    p.add_argument("--N", type=int, default=None, help="number of spatial subintervals")
    p.add_argument("--M", type=int, default=None, help="number of time steps")
    p.add_argument("--l", type=float, default=None, help="domain length (default 1)")
    p.add_argument("--T", type=float, default=None, help="final time (default 1)")
    p.add_argument("--solver", choices=("cholesky", "cg"), default=None)
    p.add_argument("--tol", type=float, default=None, help="iterative solver tolerance")
    p.add_argument("--delta", type=float, default=None, help="relative noise level")
    p.add_argument("--seed", type=int, default=None, help="noise RNG seed")
    p.add_argument("--smooth-window", type=int, default=None, help="odd moving-average window")
    p.add_argument("--source", choices=("discrete", "quadrature"), default=None)
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--config", type=str, default=None, help="key = value config file")


def _build_config(args: argparse.Namespace) -> StudyConfig:
    """defaults < config file < explicit flags"""
    config = load_config(args.config) if args.config else StudyConfig()
    updates = {}
    if args.example is not None:
        updates["example"] = _EXAMPLES[args.example]
    if args.s is not None:
        updates["s"] = args.s
    if args.N is not None:
        updates["n_values"] = (args.N,)
    if args.M is not None:
        updates["m_values"] = (args.M,)
    if args.l is not None:
        updates["l"] = args.l
    if args.T is not None:
        updates["t_final"] = args.T
    if args.solver is not None:
        updates["solver"] = args.solver
    if args.tol is not None:
        updates["tol"] = args.tol
    if args.delta is not None:
        updates["deltas"] = (args.delta,)
    if args.seed is not None:
        updates["seeds"] = (args.seed,)
    if args.smooth_window is not None:
        updates["smooth_window"] = args.smooth_window
    if args.source is not None:
        updates["source"] = args.source
    if args.out is not None:
        updates["out"] = args.out
    return replace(config, **updates)


def _single_grid(config: StudyConfig):
    return make_grid(config.l, config.t_final, config.n_values[0], config.m_values[0], config.s)


def _cmd_forward(args: argparse.Namespace) -> int:
    config = _build_config(args)
    grid = _single_grid(config)
    op = assemble(grid)
    spec, data = build_manufactured(config.example, grid, source=config.source, op=op)
    ops = make_step_operators(grid, op=op, solver=config.solver, tol=config.tol)
    trajectory = run_forward(data, grid, ops=ops)

    outdir = Path(config.out)
    times, x = grid.times(), grid.interior_x()
    rows = (
        (float(times[n]), float(x[i]), float(trajectory.states[n, i]))
        for n in range(grid.M + 1)
        for i in range(grid.interior_dim)
    )
    write_csv(outdir / "trajectory.csv", ("t", "x", "u"), rows)
    exact = spec.u_exact(grid.T, x)
    write_csv(
        outdir / "u_final.csv",
        ("x", "u_num", "u_exact", "abs_error"),
        [
            (float(x[i]), float(trajectory.final[i]), float(exact[i]),
             float(abs(trajectory.final[i] - exact[i])))
            for i in range(x.size)
        ],
    )
    err = float(np.max(np.abs(trajectory.final - exact)))
    print(f"forward {config.example} N={grid.N} M={grid.M} s={grid.s}: "
          f"Linf error in u at T = {err:.6e}")
    return 0


def _cmd_inverse(args: argparse.Namespace) -> int:
    config = _build_config(args)
    grid = _single_grid(config)
    # single-run noise comes from the explicit flag only; delta lists belong
    # to the noise study
    noise = None
    if args.delta is not None and args.delta > 0:
        noise = NoiseSpec(delta=args.delta, seed=config.seeds[0])
    try:
        result = run_inverse_case(
            config.example,
            grid,
            source=config.source,
            solver=config.solver,
            tol=config.tol,
            noise=noise,
            smooth_window=config.smooth_window,
        )
    except DenominatorNearZero as exc:
        print(f"inverse run failed: {exc}", file=sys.stderr)
        return 1
    emit_outputs(result, Path(config.out))
    print(f"inverse {config.example} N={grid.N} M={grid.M} s={grid.s} "
          f"[{result.measurement_provenance}]: Linf error in r = {result.linf_r:.6e}, "
          f"in u at T = {result.linf_u:.6e}")
    return 0


def _print_table(config: StudyConfig, table, label: str) -> int:
    emit_outputs(table, Path(config.out))
    for row in table.rows:
        print(f"h={row.h:.6g} tau={row.tau:.6g} linf_u={row.linf_u:.4e} "
              f"l2_u={row.l2_u:.4e} linf_r={row.linf_r:.4e}")
    if len(table.rows) >= 2:
        print(f"{label}: fitted order u = {table.fitted_order_u():.3f}, "
              f"r = {table.fitted_order_r():.3f}")
    return 0


def _cmd_convergence_time(args: argparse.Namespace) -> int:
    config = _build_config(args)
    return _print_table(config, convergence_study_time(config), "convergence-time")


def _cmd_convergence_space(args: argparse.Namespace) -> int:
    config = _build_config(args)
    if len(config.n_values) == 1:
        # the study needs a refinement path: expand a single N by doublings
        n = config.n_values[0]
        if args.N is None and args.config is None:
            config = replace(config, n_values=(100, 200, 400, 800))
        else:
            config = replace(config, n_values=(n, 2 * n, 4 * n))
    return _print_table(config, convergence_study_space(config), "convergence-space")


def _cmd_noise(args: argparse.Namespace) -> int:
    config = _build_config(args)
    if args.N is None and args.M is None and args.config is None:
        # noise ensembles default to the desk-scale grid
        config = replace(config, n_values=(100,), m_values=(100,))
    study = noise_study(config)
    emit_outputs(study, Path(config.out))
    for delta, mean in study.mean_linf_r().items():
        print(f"delta={delta:g}: mean Linf error in r over seeds = {mean:.6e}")
    if not study.all_completed:
        failed = [(c.delta, c.seed) for c in study.cases if not c.completed]
        print(f"failed cases: {failed}", file=sys.stderr)
        return 1
    return 0


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    config = _build_config(args)
    n0 = config.n_values[0] if args.N is None else args.N
    defects, hs, rows = [], [], []
    for n in (n0, 2 * n0):
        grid = make_grid(config.l, config.t_final, n, 1, config.s)
        op = assemble(grid)
        spec, _ = build_manufactured(config.example, grid, source="discrete", op=op)
        mode = spec.modes[0]
        nodal = mode.shape(grid.interior_x())
        defect = op.apply(nodal) - quadrature_oracle(
            mode.shape, grid, u_xx=mode.shape_xx, check=False
        )
        norm = float(np.sqrt(grid.h * np.sum(defect * defect)))
        defects.append(norm)
        hs.append(grid.h)
        rows.append((grid.h, norm))
        print(f"N={n}: consistency defect (L2) = {norm:.6e}")
    order = rate_fit(defects, hs)
    print(f"observed consistency order = {order:.3f}")
    write_csv(Path(config.out) / "oracle_defect.csv", ("h", "defect_l2"), rows)
    return 0


def _cmd_operator_dump(args: argparse.Namespace) -> int:
    config = _build_config(args)
    grid = _single_grid(config)
    dense = assemble(grid).dense()
    rows = [tuple(float(v) for v in row) for row in dense]
    header = tuple(f"col{j}" for j in range(dense.shape[1]))
    path = write_csv(Path(config.out) / "operator.csv", header, rows)
    print(f"wrote {dense.shape[0]}x{dense.shape[1]} operator to {path}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracheat",
        description="Fractional heat equation: forward solves and coefficient recovery",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "forward": ("solve the direct problem with the exact coefficient", _cmd_forward),
        "inverse": ("recover the coefficient from measured integrals", _cmd_inverse),
        "convergence-time": ("error table under time refinement", _cmd_convergence_time),
        "convergence-space": ("error table under space refinement with tau = h",
                              _cmd_convergence_space),
        "noise": ("recovery from noisy measurements over a seed ensemble", _cmd_noise),
        "oracle-check": ("consistency defect of the stiffness matrix vs quadrature",
                         _cmd_oracle_check),
        "operator-dump": ("write the dense stiffness matrix to CSV", _cmd_operator_dump),
    }
    for name, (help_text, fn) in commands.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except DenominatorNearZero as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
