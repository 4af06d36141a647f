"""2d finite-difference solver for the Laplacian case (order k = 1).

Damped Newton on the Shortley-Weller 5-point discretisation of
Delta u = b(d(x)) f(u), with red-black SOR inner linear solves.  The odd
orders k >= 2 are handled radially elsewhere; a genuine 2d wide-stencil
scheme for them is out of scope.

Determinism: node ordering, color ordering and the residual-check cadence
are fixed, so identical inputs give bit-identical fields regardless of the
kernel backend.
"""

import math
from dataclasses import dataclass, field
import numpy as np

from . import kernels
from ._quad import vectorized
from .errors import ParameterError, ReportTruncated, SolveFailure
from .grid2d import Field2D
from .nonlinearity import Nonlinearity, Weight
from .profiles import ProfileFns, predicted_profile

__all__ = ["assemble_operator", "solve_dirichlet", "exhaust", "Report2D", "asymptotics_report_2d"]

_K_ORDER = 1  # this module is the k = 1 lane


def _boundary_values(grid: Field2D, g):
    """Dirichlet data at every cut-arm intersection; NaN on uncut arms."""
    out = np.full((grid.n_interior, 4), np.nan)
    cut = ~np.isnan(grid.arm_xy[:, :, 0])
    if callable(g):
        gx = grid.arm_xy[:, :, 0][cut]
        gy = grid.arm_xy[:, :, 1][cut]
        out[cut] = np.asarray(g(gx, gy), dtype=float)
    else:
        out[cut] = float(g)
    return out


def assemble_operator(grid: Field2D, g):
    """Shortley-Weller Laplacian: (cof, nbr-safe, diag, const, gvals).

    const carries the known boundary contributions, so A u + const
    approximates Delta u on the interior unknowns.
    """
    aE, aW, aN, aS = (grid.arm[:, t] * grid.h for t in range(4))
    cof = np.empty((grid.n_interior, 4))
    cof[:, 0] = 2.0 / (aE * (aE + aW))
    cof[:, 1] = 2.0 / (aW * (aE + aW))
    cof[:, 2] = 2.0 / (aN * (aN + aS))
    cof[:, 3] = 2.0 / (aS * (aN + aS))
    diag = -(2.0 / (aE * aW) + 2.0 / (aN * aS))
    gvals = _boundary_values(grid, g)
    cut = ~np.isnan(gvals)
    const = np.where(cut, cof * np.nan_to_num(gvals), 0.0).sum(axis=1)
    cof = np.where(cut, 0.0, cof)  # cut arms feed const, not unknowns
    return cof, grid.nbr, diag, const, gvals


def _default_omega(grid: Field2D):
    return 2.0 / (1.0 + math.sin(math.pi * grid.h / (2.0 * grid.domain.char_radius)))


def _sor_solve(x, nbr, cof, jdiag, rhs, red, black, omega, tol_inner, scale, max_sweeps):
    out = np.empty_like(rhs)
    eps = np.finfo(float).eps

    def converged():
        kernels.apply_operator(x, nbr, cof, jdiag, out)
        res = np.abs(out - rhs)
        # rounding floor: the residual cannot cancel below eps * term size
        floor = 16.0 * eps * (np.abs(jdiag) * np.abs(x) + np.abs(rhs))
        return bool(np.all(res <= np.maximum(tol_inner * scale, floor)))

    for sweep in range(max_sweeps):
        kernels.sor_color_sweep(x, nbr, cof, jdiag, rhs, red, omega)
        kernels.sor_color_sweep(x, nbr, cof, jdiag, rhs, black, omega)
        if sweep % 8 == 7 and converged():
            return sweep + 1
    if converged():
        return max_sweeps
    raise SolveFailure(f"inner SOR stalled after {max_sweeps} sweeps (target {tol_inner:.3g})")


def _source_b(grid: Field2D, bweight: Weight, b_override):
    if b_override is not None:
        return np.asarray(b_override(grid.node_x, grid.node_y), dtype=float)
    m = vectorized(bweight.m)
    return bweight.b_lower * np.asarray(m(grid.node_d), dtype=float) ** (_K_ORDER + 1)


def solve_dirichlet(grid: Field2D, f: Nonlinearity, bweight: Weight, g, tol,
                    b_override=None, u0=None, omega=None, max_newton=100,
                    max_sweeps=500_000):
    """Solve Delta u = b f(u) with Dirichlet data g; returns a new Field2D.

    Outer damped Newton to residual max-norm <= tol, inner red-black SOR to
    tol/10.  Residuals are measured against the per-node source scale
    1 + b f(u): with exponential sources the raw residual sits at
    eps * b f(u) near the boundary, so an unscaled max-norm target below
    that rounding floor would never be reached.
    """
    if tol <= 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    cof, nbr, diag, const, gvals = assemble_operator(grid, g)
    b = _source_b(grid, bweight, b_override)
    f_raw = vectorized(f.f)
    fp_raw = vectorized(f.f_prime)
    fv = lambda u: np.asarray(f_raw(np.maximum(u, 1e-12)), float)
    fpv = lambda u: np.asarray(fp_raw(np.maximum(u, 1e-12)), float)
    omega = _default_omega(grid) if omega is None else float(omega)

    if u0 is not None:
        u = np.array(u0, dtype=float, copy=True)
    else:
        u = np.full(grid.n_interior, float(np.nanmean(gvals)))

    out = np.empty_like(u)

    eps = np.finfo(float).eps

    def residual(uv):
        kernels.apply_operator(uv, nbr, cof, diag, out)
        return out + const - b * fv(uv)

    def scaled_norm(res_vec, uv):
        return float(np.max(np.abs(res_vec) / (1.0 + b * fv(uv))))

    def at_floor(res_vec, uv):
        floor = 64.0 * eps * (np.abs(diag) * np.abs(uv) + np.abs(const) + b * fv(uv))
        return bool(np.all(np.abs(res_vec) <= floor))

    res = residual(u)
    norm = scaled_norm(res, u)
    history = [norm]
    sweeps_total = 0
    for _ in range(max_newton):
        if norm <= tol or at_floor(res, u):
            break
        jdiag = diag - b * fpv(u)
        delta = np.zeros_like(u)
        sweeps_total += _sor_solve(
            delta, nbr, cof, jdiag, -res, grid.red_ids, grid.black_ids,
            omega, tol / 10.0, 1.0 + b * fv(u), max_sweeps,
        )
        step = 1.0
        while step >= 2.0**-30:
            u_try = u + step * delta
            res_try = residual(u_try)
            norm_try = scaled_norm(res_try, u_try)
            if math.isfinite(norm_try) and norm_try < norm:
                break
            step *= 0.5
        else:
            if at_floor(res, u):
                break  # residual is pure round-off; nothing left to gain
            raise SolveFailure(
                f"Newton damping floor reached (residual {norm:.3g})", residuals=history
            )
        u, res, norm = u_try, res_try, norm_try
        history.append(norm)
    else:
        raise SolveFailure(f"Newton did not converge in {max_newton} steps", residuals=history)

    return grid.with_values(
        u,
        meta={
            **grid.meta,
            "tol": tol,
            "omega": omega,
            "newton_iters": len(history) - 1,
            "residual_history": history,
            "sweeps": sweeps_total,
            "kernel_backend": kernels.backend_name(),
        },
    )


def exhaust(grid: Field2D, f: Nonlinearity, bweight: Weight, j_schedule, tol,
            b_override=None, **solve_kw):
    """Increasing boundary-data sweep with continuation; returns (limit, diagnostics).

    Diagnostics track per-step increment bounds and the interior Cauchy
    ratio on the core region d >= 0.2 * diam.
    """
    js = [float(j) for j in j_schedule]
    if len(js) < 1 or any(b_ <= a for a, b_ in zip(js, js[1:])):
        raise ParameterError("boundary-data schedule must be strictly increasing")
    diam = 2.0 * max(grid.domain.half_extents)
    core = grid.node_d >= 0.2 * diam
    fields = []
    u_prev = None
    diags = {"j": [], "increment_min": [], "increment_max": [], "core_increment": [],
             "cauchy_ratio": [], "center_value": []}
    center = int(np.argmax(grid.node_d))
    for j in js:
        try:
            fld = solve_dirichlet(grid, f, bweight, j, tol, b_override=b_override,
                                  u0=u_prev, **solve_kw)
        except SolveFailure as exc:
            exc.partial = fields  # completed levels so far
            raise
        u = fld.interior_values()
        diags["j"].append(j)
        diags["center_value"].append(float(u[center]))
        if u_prev is not None:
            inc = u - u_prev
            diags["increment_min"].append(float(inc.min()))
            diags["increment_max"].append(float(inc.max()))
            diags["core_increment"].append(float(np.max(np.abs(inc[core]))) if core.any() else math.nan)
            if len(diags["core_increment"]) >= 2 and diags["core_increment"][-2] > 0:
                diags["cauchy_ratio"].append(
                    diags["core_increment"][-1] / diags["core_increment"][-2]
                )
        fields.append(fld)
        u_prev = u
    limit = fields[-1]
    diags["prev_values"] = fields[-2].interior_values() if len(fields) > 1 else None
    return limit, diags


@dataclass
class Report2D:
    """Binned boundary-asymptotics report: per-bin ratio spread u / prediction."""

    bins: np.ndarray  # columns: d_lo, d_hi, count, ratio_min, ratio_median, ratio_max
    flagged: np.ndarray  # truncation flag per bin
    meta: dict = field(default_factory=dict)


def asymptotics_report_2d(fld: Field2D, p: ProfileFns, xi, bin_edges=None,
                          n_bins=6, d_max=None, prev_values=None):
    """Per-bin min/median/max of u / phi(xi M(d)) over boundary-collar nodes.

    When the previous exhaustion iterate is supplied, bins where the median
    ratio still moves by more than 1% are flagged as truncation-dominated.
    """
    d = fld.node_d
    u = fld.interior_values()
    if bin_edges is None:
        top = 0.2 * fld.domain.char_radius if d_max is None else float(d_max)
        lo = max(float(d.min()), 1e-6 * top)
        bin_edges = np.geomspace(lo * 1.0001, top, n_bins + 1)
    bin_edges = np.asarray(bin_edges, dtype=float)

    rows = []
    flags = []
    for lo, hi in zip(bin_edges[:-1], bin_edges[1:]):
        sel = (d >= lo) & (d < hi)
        if not sel.any():
            raise ReportTruncated(
                f"empty collar bin [{lo:.3g}, {hi:.3g})",
                rows=np.array(rows) if rows else np.empty((0, 6)),
            )
        pred = np.array([predicted_profile(p, xi, dd) for dd in d[sel]])
        ratio = u[sel] / pred
        rows.append((lo, hi, int(sel.sum()), float(ratio.min()),
                     float(np.median(ratio)), float(ratio.max())))
        if prev_values is not None:
            prev_ratio = prev_values[sel] / pred
            moved = abs(np.median(ratio) - np.median(prev_ratio))
            flags.append(bool(moved > 0.01 * abs(np.median(ratio))))
        else:
            flags.append(False)
    return Report2D(bins=np.array(rows), flagged=np.array(flags),
                    meta={"xi": xi, "bin_edges": bin_edges.tolist()})
