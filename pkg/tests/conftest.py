"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from fracheat import assemble, build_manufactured, make_grid


def smooth_bump(x):
    """C-infinity bump supported on [0.2, 0.8], for consistency measurements."""
    x = np.asarray(x, dtype=float)
    z = (x - 0.5) / 0.3
    out = np.zeros_like(x)
    inside = np.abs(z) < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return out


@pytest.fixture(scope="session")
def grid16():
    return make_grid(1.0, 1.0, 16, 10, 0.5)


@pytest.fixture(scope="session")
def op16(grid16):
    return assemble(grid16)


@pytest.fixture(scope="session")
def example1_64():
    grid = make_grid(1.0, 1.0, 64, 64, 0.5)
    op = assemble(grid)
    spec, data = build_manufactured("example1", grid, source="discrete", op=op)
    return grid, op, spec, data
