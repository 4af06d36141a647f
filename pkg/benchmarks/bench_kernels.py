#!/usr/bin/env python3
"""Benchmark: compiled kernels vs the pure numpy fallback.

Times raw SOR sweeps on assembled disk systems and a full nonlinear
Dirichlet solve with each backend.  Run from the repo root:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from khessian import kernels
from khessian.fd2d import assemble_operator, solve_dirichlet
from khessian.grid2d import Disk, build_grid
from khessian.nonlinearity import Nonlinearity, Weight


def time_sweeps(grid, n_sweeps=400):
    cof, nbr, diag, const, _ = assemble_operator(grid, 0.0)
    rhs = np.sin(1.0 + np.arange(grid.n_interior, dtype=float))
    x = np.zeros(grid.n_interior)
    t0 = time.perf_counter()
    for _ in range(n_sweeps):
        kernels.sor_color_sweep(x, nbr, cof, diag, rhs, grid.red_ids, 1.9)
        kernels.sor_color_sweep(x, nbr, cof, diag, rhs, grid.black_ids, 1.9)
    return (time.perf_counter() - t0) / n_sweeps


def time_solve(grid):
    f = Nonlinearity.exponential(2)
    w = Weight.constant(1.0)

    def g(x, y):
        r2 = np.asarray(x, float) ** 2 + np.asarray(y, float) ** 2
        return np.log(2.0 / (1.0 - r2))

    t0 = time.perf_counter()
    solve_dirichlet(grid, f, w, g, tol=1e-9)
    return time.perf_counter() - t0


def main():
    if not kernels.COMPILED_AVAILABLE:
        print("compiled kernels unavailable; nothing to compare")
        return
    print(f"{'case':<26}{'pure':>12}{'compiled':>12}{'speedup':>9}")
    for h_inv in (64, 128):
        grid = build_grid(Disk(1.0), 1.0 / h_inv)
        row = {}
        for name in ("pure", "compiled"):
            kernels.set_backend(name)
            row[name] = time_sweeps(grid)
        print(f"sweep disk h=1/{h_inv:<4}   {row['pure'] * 1e3:>10.3f}ms"
              f"{row['compiled'] * 1e3:>10.3f}ms{row['pure'] / row['compiled']:>8.1f}x")
    for h_inv in (64, 128):
        grid = build_grid(Disk(0.9), 1.0 / h_inv)
        row = {}
        for name in ("pure", "compiled"):
            kernels.set_backend(name)
            row[name] = time_solve(grid)
        print(f"solve disk h=1/{h_inv:<4}   {row['pure']:>10.3f}s {row['compiled']:>10.3f}s "
              f"{row['pure'] / row['compiled']:>7.1f}x")
    kernels.set_backend("auto")


if __name__ == "__main__":
    main()
