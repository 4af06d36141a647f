"""Radial solvers for the k-Hessian blow-up equation on balls.

Contains the torsion-type auxiliary solve (right side b, zero boundary
data), forward integration of the blow-up initial value problem with
singularity detection, the monotone boundary-data exhaustion as a two-point
boundary value scheme, the sublevel subsolution built from the torsion
solution, and boundary-asymptotics reports.

Every solve is single-threaded and deterministic; distinct solves share no
mutable state.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded
from scipy.optimize import bisect, brentq

from ._quad import _GL_NODES, _GL_WEIGHTS, vectorized
from .errors import IntegrationFailure, ParameterError, ReportTruncated, SolveFailure
from .nonlinearity import Nonlinearity, Weight
from .profiles import ProfileFns, predicted_profile

__all__ = [
    "RadialProblem",
    "RadialSolution",
    "solve_torsion",
    "integrate_blowup_ivp",
    "shoot_blowup_radius",
    "solve_exhaustion_bvp",
    "AsymptoticsReport",
    "asymptotics_report",
    "build_radial_subsolution",
]


@dataclass(frozen=True)
class RadialProblem:
    """S_k(D^2 u) = b(|x|) f(u) on the ball of radius R in R^n."""

    n: int
    k: int
    R: float
    f: Nonlinearity
    b: Callable

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"dimension must be >= 2, got {self.n}")
        if not 1 <= self.k <= self.n:
            raise ParameterError(f"order k={self.k} out of range 1..{self.n}")
        if self.R <= 0:
            raise ParameterError(f"ball radius must be positive, got {self.R}")

    @staticmethod
    def from_weight(n, k, R, f, weight: Weight, base=None):
        """Compose b(r) = base * m(R - r)**(k+1) from a boundary weight."""
        base = weight.b_lower if base is None else float(base)
        m = vectorized(weight.m)

        def b(r):
            d = np.clip(R - np.asarray(r, float), 1e-300, None)
            return base * np.asarray(m(d), float) ** (k + 1.0)

        return RadialProblem(n=n, k=k, R=R, f=f, b=b)


@dataclass
class RadialSolution:
    """Sampled radial solution; Rstar is the detected blow-up radius."""

    r: np.ndarray
    u: np.ndarray
    u1: np.ndarray
    Rstar: Optional[float]
    meta: dict = field(default_factory=dict)
    value: Optional[Callable] = None
    deriv1: Optional[Callable] = None
    deriv2: Optional[Callable] = None


class _CumulativeUniform:
    """int_0^r fn on a uniform grid with per-segment Gauss-Legendre panels."""

    def __init__(self, fn, R, n_seg=2048):
        self.fn = fn
        self.R = float(R)
        self.nodes = np.linspace(0.0, self.R, n_seg + 1)
        self.h = self.nodes[1] - self.nodes[0]
        mids = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        pts = mids[:, None] + 0.5 * self.h * _GL_NODES[None, :]
        seg = 0.5 * self.h * np.asarray(fn(pts), float) @ _GL_WEIGHTS
        self.prefix = np.concatenate([[0.0], np.cumsum(seg)])

    def value(self, r):
        arr = np.asarray(r, dtype=float)
        flat = np.atleast_1d(arr).ravel()
        idx = np.clip((flat / self.h).astype(int), 0, len(self.nodes) - 2)
        lo = self.nodes[idx]
        mid = 0.5 * (lo + flat)
        half = 0.5 * (flat - lo)
        pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        local = half * (np.asarray(self.fn(pts), float) @ _GL_WEIGHTS)
        out = self.prefix[idx] + local
        if arr.ndim == 0:
            return float(out[0])
        return out.reshape(arr.shape)


def solve_torsion(prob: RadialProblem, n_seg=2048):
    """Solve S_k(D^2 w) = b with w = 0 on the boundary, radially.

    Uses the exact divergence-form reduction
    r^(n-k) (w')^k = (k / C(n-1,k-1)) int_0^r s^(n-1) b(s) ds,
    so the only numerics are two nested cumulative quadratures.  Returns a
    RadialSolution with attached analytic-grade callables for w, w', w''.
    """
    n, k, R = prob.n, prob.k, prob.R
    c = math.comb(n - 1, k - 1)
    bfn = vectorized(prob.b)
    moment = _CumulativeUniform(lambda s: np.asarray(s, float) ** (n - 1) * np.asarray(bfn(s), float), R, n_seg)

    def wp(r):
        r = np.asarray(r, dtype=float)
        G = (k / c) * np.asarray(moment.value(r), float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r > 0.0, G ** (1.0 / k) * r ** ((k - n) / k), 0.0)
        return out

    accum = _CumulativeUniform(wp, R, n_seg)
    WR = float(accum.value(R))

    def w(r):
        return np.asarray(accum.value(r), float) - WR

    def wpp(r):
        r = np.asarray(r, dtype=float)
        G = (k / c) * np.asarray(moment.value(r), float)
        Gp = (k / c) * r ** (n - 1) * np.asarray(bfn(r), float)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (1.0 / k) * G ** (1.0 / k - 1.0) * Gp * r ** ((k - n) / k)
            t2 = G ** (1.0 / k) * ((k - n) / k) * r ** ((k - n) / k - 1.0)
        out = t1 + t2
        return np.where(r > 0.0, out, np.nan)

    rs = np.linspace(0.0, R, 513)
    return RadialSolution(
        r=rs,
        u=np.asarray(w(rs), float),
        u1=np.asarray(wp(rs), float),
        Rstar=R,
        meta={"kind": "torsion", "n": n, "k": k, "R": R},
        value=lambda r: w(r),
        deriv1=lambda r: wp(r),
        deriv2=lambda r: wpp(r),
    )


# Cash-Karp 5(4) embedded pair
_CK_C = np.array([0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8])
_CK_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([3 / 10, -9 / 10, 6 / 5]),
    np.array([-11 / 54, 5 / 2, -70 / 27, 35 / 27]),
    np.array([1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096]),
]
_CK_B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
_CK_B4 = np.array([2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4])
_CK_E = _CK_B5 - _CK_B4


def _ck_step(rhs, r, y, h):
    ks = np.empty((6, 2))
    ks[0] = rhs(r, y)
    for i in range(1, 6):
        ks[i] = rhs(r + _CK_C[i] * h, y + h * (_CK_A[i] @ ks[:i]))
    y5 = y + h * (_CK_B5 @ ks)
    err = h * (_CK_E @ ks)
    return y5, err


def _make_rhs(prob: RadialProblem):
    n, k = prob.n, prob.k
    c_hi = math.comb(n - 1, k)
    c_lo = math.comb(n - 1, k - 1)
    f = prob.f.f
    b = prob.b

    def rhs(r, y):
        u, v = y
        t = v / r
        with np.errstate(over="ignore", invalid="ignore"):
            fu = float(f(u))
            num = float(b(r)) * fu - c_hi * t**k
            den = c_lo * t ** (k - 1)
            upp = num / den
        return np.array([v, upp])

    return rhs


def _admissible(upp, t, n, k):
    for j in range(1, k + 1):
        if math.comb(n - 1, j) * t**j + math.comb(n - 1, j - 1) * upp * t ** (j - 1) <= 0.0:
            return False
    return True


def _blowup_remainder(u, v, upp):
    """Distance to the singularity from the local blow-up model.

    Exact for pure power blow-up C d^-q and for logarithmic blow-up
    -q log d (up to O(d) relative); returns 0 when the model is invalid.
    """
    den = u * upp - v * v
    if den <= 0.0 or v <= 0.0 or u <= 0.0:
        return 0.0
    return u * v / den


def integrate_blowup_ivp(prob: RadialProblem, u0, tol, u_cap=1e12, v_cap=1e12, max_steps=3_000_000):
    """Integrate outward from the centre until the solution blows up.

    Adaptive Cash-Karp 5(4) with per-step error <= tol (mixed absolute /
    relative).  Terminates on u or u' crossing the cap, or when the step
    size stalls at rounding level near the singularity; Rstar combines the
    termination radius, a Richardson-extrapolated crossing location from the
    last two step halvings, and the local blow-up model remainder.
    """
    if u0 <= 0.0:
        raise ParameterError(f"initial value must be positive, got {u0}")
    if tol <= 0.0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    n, k, R = prob.n, prob.k, prob.R
    rhs = _make_rhs(prob)

    b0 = float(prob.b(1e-12 * R))
    f0 = float(prob.f.f(u0))
    c0 = (b0 * f0 / math.comb(n, k)) ** (1.0 / k)
    r = 1e-8 * R
    y = np.array([u0 + 0.5 * c0 * r * r, c0 * r])

    rs, us, vs = [r], [y[0]], [y[1]]
    h = r
    eps = np.finfo(float).eps
    steps = rejected = 0
    termination = None

    def locate_crossing(r0, y0, h_acc):
        def overshoot(theta, halve):
            if halve:
                ym, _ = _ck_step(rhs, r0, y0, 0.5 * theta * h_acc)
                yy, _ = _ck_step(rhs, r0 + 0.5 * theta * h_acc, ym, 0.5 * theta * h_acc)
            else:
                yy, _ = _ck_step(rhs, r0, y0, theta * h_acc)
            return max(yy[0] / u_cap, yy[1] / v_cap) - 1.0, yy

        def solve(halve):
            lo, hi = 0.0, 1.0
            y_hi = None
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                val, ymid = overshoot(mid, halve)
                if val >= 0.0:
                    hi, y_hi = mid, ymid
                else:
                    lo = mid
            if y_hi is None:
                _, y_hi = overshoot(1.0, halve)
                hi = 1.0
            return r0 + hi * h_acc, y_hi

        rc0, _ = solve(False)
        rc1, yc1 = solve(True)
        r_star = rc1 + (rc1 - rc0) / 31.0
        return r_star, yc1

    while steps < max_steps:
        steps += 1
        if h < 32.0 * eps * r:
            upp = rhs(r, y)[1]
            rem = _blowup_remainder(y[0], y[1], upp)
            Rstar = r + (rem if 0.0 < rem < r else 0.0)
            termination = "stall"
            break
        with np.errstate(over="ignore", invalid="ignore"):
            y_new, err = _ck_step(rhs, r, y, h)
        scale = tol * (1.0 + np.abs(y))
        if not np.all(np.isfinite(y_new)) or not np.all(np.isfinite(err)):
            h *= 0.25
            rejected += 1
            continue
        enorm = float(np.max(np.abs(err) / scale))
        if enorm > 1.0:
            h *= max(0.2, 0.9 * enorm**-0.2)
            rejected += 1
            continue
        # accepted; admissibility of the new state
        r_new = r + h
        upp_new = rhs(r_new, y_new)[1]
        t_new = y_new[1] / r_new
        if not (t_new > 0.0) or not math.isfinite(upp_new) or not _admissible(upp_new, t_new, n, k):
            sol = RadialSolution(
                r=np.array(rs), u=np.array(us), u1=np.array(vs), Rstar=None,
                meta={"termination": "admissibility", "steps": steps},
            )
            raise IntegrationFailure(
                f"admissibility lost at r={r_new:.6g} (u={y_new[0]:.6g})", solution=sol
            )
        if y_new[0] > u_cap or y_new[1] > v_cap:
            r_cross, y_cross = locate_crossing(r, y, h)
            upp = rhs(r_cross, y_cross)[1]
            rem = _blowup_remainder(y_cross[0], y_cross[1], upp)
            Rstar = r_cross + (rem if 0.0 < rem < r_cross else 0.0)
            rs.append(r_cross)
            us.append(y_cross[0])
            vs.append(y_cross[1])
            termination = "cap"
            break
        r, y = r_new, y_new
        rs.append(r)
        us.append(y[0])
        vs.append(y[1])
        h *= min(5.0, max(0.2, 0.9 * (enorm + 1e-16) ** -0.2))
    else:
        raise IntegrationFailure(
            f"no blow-up detected in {max_steps} steps",
            solution=RadialSolution(
                r=np.array(rs), u=np.array(us), u1=np.array(vs), Rstar=None,
                meta={"termination": "max_steps", "steps": steps},
            ),
        )

    return RadialSolution(
        r=np.array(rs),
        u=np.array(us),
        u1=np.array(vs),
        Rstar=float(Rstar),
        meta={
            "termination": termination,
            "steps": steps,
            "rejected": rejected,
            "tol": tol,
            "u_cap": u_cap,
            "v_cap": v_cap,
            "u0": u0,
            "n": n,
            "k": k,
        },
    )


def shoot_blowup_radius(prob: RadialProblem, target=None, tol=1e-9, coarse_tol=1e-8,
                        u0_init=1.0, max_expand=60):
    """Find u0 such that the blow-up radius equals ``target`` (default prob.R).

    The blow-up radius is strictly decreasing in u0 (comparison principle),
    so a bracket expansion plus Brent root finding converges quickly.
    Returns (u0, solution-at-tol).
    """
    target = prob.R if target is None else float(target)

    def gap(u0):
        return integrate_blowup_ivp(prob, u0, coarse_tol).Rstar - target

    lo = hi = float(u0_init)
    glo = ghi = gap(lo)
    for _ in range(max_expand):
        if glo > 0.0:
            break
        lo /= 4.0
        glo = gap(lo)
    else:
        raise SolveFailure("could not bracket the target blow-up radius from below")
    for _ in range(max_expand):
        if ghi < 0.0:
            break
        hi *= 4.0
        ghi = gap(hi)
    else:
        raise SolveFailure("could not bracket the target blow-up radius from above")
    u0 = brentq(gap, lo, hi, xtol=1e-13 * max(1.0, lo), rtol=8.9e-16, maxiter=200)
    return float(u0), integrate_blowup_ivp(prob, float(u0), tol)


def _slope_power(x, kpow, floor):
    return x * np.abs(x) ** (kpow - 1.0) if kpow > 1 else x


def solve_exhaustion_bvp(prob: RadialProblem, j_schedule, grid_h, tol, max_newton=100):
    """Monotone boundary-data exhaustion: solve with u(R) = j for each j.

    Conservative flux discretisation of the radial divergence form on a
    uniform grid, damped Newton with tridiagonal Jacobians, continuation in
    j (the previous solution seeds the next solve).  The odd flux extension
    x |x|^(k-1) keeps Newton well defined when an iterate loses monotonicity.
    """
    js = [float(j) for j in j_schedule]
    if any(b <= a for a, b in zip(js, js[1:])):
        raise ParameterError("boundary-data schedule must be strictly increasing")
    n, k, R = prob.n, prob.k, prob.R
    N = max(8, int(round(R / grid_h)))
    h = R / N
    r = np.linspace(0.0, R, N + 1)
    rmid = 0.5 * (r[:-1] + r[1:])
    c_lo = math.comb(n - 1, k - 1)
    c_full = math.comb(n, k)
    alpha = c_lo / (k * h * r[1:N] ** (n - 1))
    rmid_pow = rmid ** (n - k)
    b_nodes = np.asarray(vectorized(prob.b)(r[:N]), float)
    # domain guard: transient Newton iterates may dip below f's domain (0, inf)
    f_raw = vectorized(prob.f.f)
    fp_raw = vectorized(prob.f.f_prime)
    fv = lambda u: f_raw(np.maximum(u, 1e-12))
    fpv = lambda u: fp_raw(np.maximum(u, 1e-12))

    def residual(U, j):
        full = np.concatenate([U, [j]])
        g = np.diff(full) / h
        flux = rmid_pow * g * np.abs(g) ** (k - 1)
        res = np.empty(N)
        res[0] = c_full * (2.0 * g[0] / h) * abs(2.0 * g[0] / h) ** (k - 1) - b_nodes[0] * fv(U[0])
        res[1:] = alpha * (flux[1:] - flux[:-1]) - b_nodes[1:] * fv(U[1:])
        return res, g

    def jacobian_banded(U, g):
        sp = np.maximum(k * np.abs(g) ** (k - 1), k * (1e-9 * max(1.0, abs(js[-1])) / R) ** (k - 1))
        dflux = rmid_pow * sp / h
        ab = np.zeros((3, N))
        s0 = max(k * abs(2.0 * g[0] / h) ** (k - 1),
                 k * (1e-9 * max(1.0, abs(js[-1])) / h) ** (k - 1))
        ab[1, 0] = -c_full * s0 * 2.0 / (h * h) - b_nodes[0] * fpv(U[0])
        if N > 1:
            ab[0, 1] = c_full * s0 * 2.0 / (h * h)
        for i in range(1, N):
            ab[1, i] = -alpha[i - 1] * (dflux[i] + dflux[i - 1]) - b_nodes[i] * fpv(U[i])
            ab[2, i - 1] = alpha[i - 1] * dflux[i - 1]
            if i + 1 < N:
                ab[0, i + 1] = alpha[i - 1] * dflux[i]
        return ab

    def scaled_norm(res, U):
        return float(np.max(np.abs(res) / (1.0 + np.abs(b_nodes * fv(U)))))

    solutions = []
    U = None
    for j in js:
        if U is None:
            # positive start with nonzero slope: keeps the degenerate flux
            # derivative alive for k >= 2 and stays inside f's domain
            U = j * (0.5 + 0.5 * (r[:N] / R) ** 2)
        else:
            U = U.copy()
        res, g = residual(U, j)
        norm = scaled_norm(res, U)
        history = [norm]
        for it in range(max_newton):
            if norm <= tol:
                break
            ab = jacobian_banded(U, g)
            delta = solve_banded((1, 1), ab, -res)
            step = 1.0
            while step >= 2.0**-30:
                U_try = U + step * delta
                res_try, g_try = residual(U_try, j)
                norm_try = scaled_norm(res_try, U_try)
                if norm_try < norm and np.all(np.isfinite(res_try)):
                    break
                step *= 0.5
            else:
                raise SolveFailure(
                    f"Newton damping floor reached at j={j} (residual {norm:.3g})",
                    residuals=history,
                )
            U, res, g, norm = U_try, res_try, g_try, norm_try
            history.append(norm)
        else:
            raise SolveFailure(
                f"Newton did not converge in {max_newton} steps at j={j}", residuals=history
            )
        full = np.concatenate([U, [j]])
        u1 = np.gradient(full, r)
        solutions.append(
            RadialSolution(
                r=r.copy(), u=full, u1=u1, Rstar=R,
                meta={"kind": "exhaustion", "j": j, "newton_iters": len(history) - 1,
                      "residual_history": history, "h": h, "tol": tol},
            )
        )
    return solutions


@dataclass
class AsymptoticsReport:
    """Rows (d, u, predicted, ratio) quantifying the boundary sandwich."""

    rows: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.rows[:, 0]

    @property
    def ratio(self):
        return self.rows[:, 3]


def asymptotics_report(sol: RadialSolution, p: ProfileFns, xi, d_values=None,
                       d_hi=None, decades=2.0, per_decade=8):
    """Compare u against phi(xi M(d)) on a geometric ladder of distances.

    Default ladder: from d_hi = 0.1 Rstar down the requested number of
    decades.  Raises ReportTruncated (carrying the resolved rows) when the
    solution samples do not reach the requested distances.
    """
    if sol.Rstar is None:
        raise ParameterError("solution carries no blow-up radius")
    Rstar = sol.Rstar
    d_samp = Rstar - sol.r
    good = d_samp > 0.0
    if not np.any(good):
        raise ReportTruncated("no samples below the blow-up radius", rows=np.empty((0, 4)))
    d_min_avail = float(d_samp[good].min())
    d_max_avail = float(d_samp[good].max())

    explicit = d_values is not None
    if explicit:
        ladder = np.sort(np.asarray(d_values, dtype=float))[::-1]
        if np.any(ladder <= 0.0) or np.any(ladder >= Rstar):
            raise ReportTruncated(
                "requested distances outside (0, Rstar)", rows=np.empty((0, 4))
            )
    else:
        top = 0.1 * Rstar if d_hi is None else float(d_hi)
        npts = int(round(decades * per_decade)) + 1
        ladder = top * 10.0 ** (-np.arange(npts) / per_decade)

    usable = (ladder >= d_min_avail) & (ladder <= d_max_avail)
    # interpolate u on log-distance; samples are monotone in d
    order = np.argsort(d_samp[good])
    interp = PchipInterpolator(np.log(d_samp[good][order]), sol.u[good][order])
    rows = []
    for d in ladder[usable]:
        u = float(interp(math.log(d)))
        pred = predicted_profile(p, xi, d)
        rows.append((d, u, pred, u / pred))
    rows = np.array(rows) if rows else np.empty((0, 4))
    if not np.all(usable):
        raise ReportTruncated(
            f"solution resolves distances only in [{d_min_avail:.3g}, {d_max_avail:.3g}]",
            rows=rows,
        )
    return AsymptoticsReport(rows=rows, meta={"xi": xi, "Rstar": Rstar})


class RadialSubsolution:
    """Sublevel subsolution psi(-w) built from the torsion solution."""

    def __init__(self, torsion: RadialSolution, p: ProfileFns):
        p._need_psi()
        self._w = torsion
        self._psi = p.psi
        self._Psi = p.Psi

    def __call__(self, r):
        w = np.atleast_1d(np.asarray(self._w.value(r), float))
        out = np.array([self._psi(max(-x, 1e-300)) for x in w])
        return out if out.size > 1 else float(out[0])

    def sublevel_radius(self, j):
        """Radius r_j with value j: the radial realisation of the sublevel set."""
        target = -float(self._Psi(j))
        w0 = float(self._w.value(0.0))
        if target <= w0:
            raise ParameterError(f"sublevel {j} is below the centre value {self(0.0):.6g}")
        return float(bisect(lambda r: float(self._w.value(r)) - target,
                            0.0, self._w.meta["R"], xtol=1e-14, maxiter=200))

    @property
    def torsion(self):
        return self._w


def build_radial_subsolution(prob: RadialProblem, p: ProfileFns):
    """psi(-w) with w the torsion solution of the same problem."""
    return RadialSubsolution(solve_torsion(prob), p)
