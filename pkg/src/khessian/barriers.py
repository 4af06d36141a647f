"""Boundary-collar barrier construction and numerical certification.

Builds the explicit super/subsolution pair phi(xi_eps M(d -+ shift)) on a
collar of the boundary, evaluates the composite Hessian spectrum of radial
functions of the distance in principal coordinates, and certifies the
differential inequalities and cone admissibility on quasi-random collar
samples.  The collar width is found by automated halving (the analysis only
asserts existence of a small enough width).  A second, global certificate
checks phi(-eps w) against the torsion solution w on the whole ball for a
dyadic ladder of eps.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from ._quad import vectorized
from .errors import (
    CertificationFailure,
    ConditionViolation,
    GeometryError,
    ParameterError,
)
from .nonlinearity import Nonlinearity, Weight
from .profiles import ProfileFns, check_limit_Ff
from .radial import RadialSolution
from .symfunc import sigma_all, sk_radial

__all__ = [
    "CollarGeometry",
    "ball_geometry",
    "ellipse_geometry",
    "BarrierParams",
    "make_barrier_params",
    "composite_eigs",
    "build_barriers",
    "collar_ratios",
    "MarginReport",
    "collar_samples",
    "verify_supersolution",
    "verify_subsolution",
    "certify_barriers",
    "certify_upper_barrier_global",
]


@dataclass(frozen=True)
class CollarGeometry:
    """Principal curvatures along the boundary plus their symmetric-function extremes.

    ``rho(param)`` returns the n-1 principal curvatures at the boundary
    point indexed by param in [0, 1); ``l0``/``L0`` are the extremes of
    sigma_{k-1} of those curvatures, ``focal_radius`` bounds the collar
    width where 1 - d rho stays positive.
    """

    n: int
    k: int
    rho: Callable
    l0: float
    L0: float
    focal_radius: float
    label: str = "geometry"


def ball_geometry(n, k, R=1.0):
    if not 1 <= k <= n:
        raise ParameterError(f"order k={k} out of range 1..{n}")
    if R <= 0:
        raise ParameterError(f"ball radius must be positive, got {R}")
    curv = np.full(n - 1, 1.0 / R)
    s = float(sigma_all(curv, k - 1)[k - 1]) if k >= 2 else 1.0
    return CollarGeometry(
        n=n, k=k, rho=lambda param: curv.copy(), l0=s, L0=s,
        focal_radius=R, label=f"ball(n={n}, R={R})",
    )


def ellipse_geometry(a, b, k=1):
    """2d ellipse boundary: one principal curvature kappa(t)."""
    if not (a >= b > 0):
        raise ParameterError(f"ellipse needs a >= b > 0, got a={a}, b={b}")
    if k not in (1, 2):
        raise ParameterError(f"planar geometry supports k in {{1, 2}}, got {k}")

    def kappa(t):
        return a * b / (a**2 * np.sin(t) ** 2 + b**2 * np.cos(t) ** 2) ** 1.5

    def rho(param):
        return np.array([float(kappa(2.0 * math.pi * param))])

    if k == 1:
        l0 = L0 = 1.0  # sigma_0 of the curvatures
    else:
        l0, L0 = b / a**2, a / b**2
    return CollarGeometry(
        n=2, k=k, rho=rho, l0=l0, L0=L0, focal_radius=b**2 / a,
        label=f"ellipse(a={a}, b={b})",
    )


@dataclass(frozen=True)
class BarrierParams:
    """Inflated amplitude pair and collar widths for one epsilon."""

    eps: float
    sigma_shift: float
    delta_eps: float
    xi_eps_lower: float
    xi_eps_upper: float


def make_barrier_params(p: ProfileFns, geom: CollarGeometry, eps, delta_eps, sigma_shift=None):
    w = p.weight
    if not 0.0 < eps < w.b_lower / 2.0:
        raise ParameterError(
            f"(3.3) barrier slack must satisfy 0 < eps < b_lower/2, got eps={eps}"
        )
    gap = 1.0 - (1.0 - p.C_m) / p.C_f
    if gap <= 0.0:
        raise ConditionViolation(
            f"(1.5) constant gap violated: C_f={p.C_f:.6g}, C_m={p.C_m:.6g}", label="(1.5)"
        )
    if delta_eps <= 0.0:
        raise ParameterError(f"collar width must be positive, got {delta_eps}")
    sigma_shift = 0.1 * delta_eps if sigma_shift is None else float(sigma_shift)
    if not 0.0 < sigma_shift < delta_eps:
        raise ParameterError(
            f"shift must lie in (0, delta_eps), got {sigma_shift} vs {delta_eps}"
        )
    kp1 = p.k + 1.0
    return BarrierParams(
        eps=float(eps),
        sigma_shift=sigma_shift,
        delta_eps=float(delta_eps),
        xi_eps_lower=((w.b_lower - 2.0 * eps) / ((1.0 + eps) * geom.L0 * gap)) ** (1.0 / kp1),
        xi_eps_upper=((w.b_upper + 2.0 * eps) / ((1.0 - eps) * geom.l0 * gap)) ** (1.0 / kp1),
    )


def composite_eigs(g1, g2, d, rho):
    """Hessian spectrum of g(distance) in principal coordinates.

    Normal eigenvalue g''; tangential eigenvalues -g' rho_i / (1 - d rho_i).
    Valid inside the focal region 1 - d rho_i > 0.
    """
    rho = np.asarray(rho, dtype=float)
    den = 1.0 - d * rho
    if np.any(den <= 0.0):
        raise GeometryError(f"focal radius exceeded at d={d}: 1 - d*rho = {den.min():.3g}")
    return np.concatenate([[g2], -g1 * rho / den])


class ProfileBarrier:
    """phi(xi M(d + shift)) with analytic first and second distance derivatives."""

    def __init__(self, p: ProfileFns, xi, shift, window, label):
        self.p = p
        self.xi = float(xi)
        self.shift = float(shift)
        self.window = window
        self.label = label

    def _d1(self, d):
        lo, hi = self.window
        if not lo < d < hi:
            raise ParameterError(
                f"{self.label}: distance {d:.6g} outside the validity window ({lo:.6g}, {hi:.6g})"
            )
        return d + self.shift

    def value(self, d):
        t = self.xi * float(self.p.M(self._d1(d)))
        return self.p.phi(t)

    def deriv1(self, d):
        d1 = self._d1(d)
        t = self.xi * float(self.p.M(d1))
        return self.xi * float(self.p.m(d1)) * self.p.phi_prime(t)

    def deriv2(self, d):
        d1 = self._d1(d)
        t = self.xi * float(self.p.M(d1))
        return (
            self.xi * float(self.p.m_prime(d1)) * self.p.phi_prime(t)
            + self.xi**2 * float(self.p.m(d1)) ** 2 * self.p.phi_second(t)
        )


def build_barriers(p: ProfileFns, geom: CollarGeometry, bp: BarrierParams):
    """(upper, lower) barrier pair on their respective collar windows."""
    upper = ProfileBarrier(
        p, bp.xi_eps_lower, -bp.sigma_shift,
        (bp.sigma_shift, 2.0 * bp.delta_eps), "upper barrier",
    )
    lower = ProfileBarrier(
        p, bp.xi_eps_upper, +bp.sigma_shift,
        (0.0, 2.0 * bp.delta_eps - bp.sigma_shift), "lower barrier",
    )
    return upper, lower


def collar_ratios(p: ProfileFns, xi, d):
    """The two collar quantities controlling admissibility and the margins.

    Returns (A, B) with A -> 0 and B -> 1 - (1 - C_m)/C_f as d -> 0+.
    """
    t = xi * float(p.M(d))
    s = p.phi(t)
    P = float(((p.k + 1.0) * p.F(s)) ** (p.k / (p.k + 1.0))) / (t * float(p.f(s)))
    A = (float(p.M(d)) / float(p.m(d))) * P
    B = 1.0 - (float(p.M(d)) * float(p.m_prime(d)) / float(p.m(d)) ** 2) * P
    return A, B


@dataclass
class MarginReport:
    """Per-sample certification record for one barrier inequality."""

    kind: str
    eps: float
    delta_eps: float
    sigma_shift: float
    passed: bool
    worst_margin: float
    sup_sigma_k_tilted: float
    samples: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_json(self, indent=None):
        return json.dumps(
            {
                "kind": self.kind,
                "eps": self.eps,
                "delta_eps": self.delta_eps,
                "sigma_shift": self.sigma_shift,
                "passed": self.passed,
                "worst_margin": self.worst_margin,
                "sup_sigma_k_tilted": self.sup_sigma_k_tilted,
                "extras": self.extras,
                "samples": self.samples,
            },
            indent=indent,
            sort_keys=True,
        )


def collar_samples(bp: BarrierParams, kind, nsamples=200, seed=0):
    """Quasi-random (distance, boundary-param) pairs in the barrier window.

    Distances are log-uniform (the inequalities are hardest near the inner
    edge); the boundary parameter is uniform.  Deterministic for a fixed
    seed.
    """
    if kind == "super":
        lo, hi = bp.sigma_shift * 1.02, 2.0 * bp.delta_eps * 0.98
    elif kind == "sub":
        top = 2.0 * bp.delta_eps - bp.sigma_shift
        lo, hi = top * 1e-3, top * 0.98
    else:
        raise ParameterError(f"unknown sample kind {kind!r}")
    u = qmc.Halton(d=2, scramble=True, seed=seed).random(nsamples)
    d = lo * (hi / lo) ** u[:, 0]
    return np.column_stack([d, u[:, 1]])


def _verify(kind, barrier, p, geom, bp, f, bweight, samples, tol_scale=1e-9):
    fv = vectorized(f.f)
    m = vectorized(bweight.m)
    kp1 = p.k + 1
    base = bweight.b_lower if kind == "super" else bweight.b_upper
    worst = math.inf
    sup_tilt = 0.0
    rows = []
    ok = True
    for d, param in np.asarray(samples, dtype=float):
        rho = geom.rho(param)
        lam = composite_eigs(barrier.deriv1(d), barrier.deriv2(d), d, rho)
        sig = sigma_all(lam, p.k)[1:]
        admissible = bool(np.all(sig > 0.0))
        tilt = rho / (1.0 - d * rho)
        sup_tilt = max(sup_tilt, float(sigma_all(tilt, p.k)[p.k]))
        uval = barrier.value(d)
        bx = base * float(m(d)) ** kp1
        scale = bx * float(fv(uval))
        sk = float(sig[p.k - 1])
        margin = (scale - sk) if kind == "super" else (sk - scale)
        passed = admissible and margin >= -tol_scale * scale
        ok = ok and passed
        worst = min(worst, margin / scale if scale > 0 else margin)
        d_shift = d - bp.sigma_shift if kind == "super" else d + bp.sigma_shift
        xi = bp.xi_eps_lower if kind == "super" else bp.xi_eps_upper
        A, B = collar_ratios(p, xi, d_shift)
        rows.append(
            {
                "d": float(d),
                "param": float(param),
                "margin": float(margin),
                "scale": float(scale),
                "sigma_j": [float(s) for s in sig],
                "admissible": admissible,
                "ratio_A": A,
                "ratio_B": B,
            }
        )
    return MarginReport(
        kind=kind,
        eps=bp.eps,
        delta_eps=bp.delta_eps,
        sigma_shift=bp.sigma_shift,
        passed=ok,
        worst_margin=worst,
        sup_sigma_k_tilted=sup_tilt,
        samples=rows,
    )


def verify_supersolution(u_upper, p, geom, bp, f, bweight, samples):
    """Check S_k(D^2 upper) <= b f(upper) and cone admissibility at samples."""
    return _verify("super", u_upper, p, geom, bp, f, bweight, samples)


def verify_subsolution(u_lower, p, geom, bp, f, bweight, samples):
    """Check S_k(D^2 lower) >= b f(lower) and cone admissibility at samples."""
    return _verify("sub", u_lower, p, geom, bp, f, bweight, samples)


def certify_barriers(p: ProfileFns, geom: CollarGeometry, f: Nonlinearity, bweight: Weight,
                     eps=0.1, delta0=None, nsamples=200, seed=0, max_halvings=24,
                     sigma_frac=0.1):
    """Find a collar width for which both barrier inequalities certify.

    Halves the width from 0.2 * focal radius until both the supersolution
    and subsolution reports pass on fresh quasi-random samples; the analysis
    guarantees success for small enough widths, so exhaustion of the ladder
    signals a genuine violation (or an infeasible parameter set).
    """
    delta = 0.2 * geom.focal_radius if delta0 is None else float(delta0)
    worst = None
    for _ in range(max_halvings):
        bp = make_barrier_params(p, geom, eps, delta, sigma_frac * delta)
        upper, lower = build_barriers(p, geom, bp)
        rep_s = verify_supersolution(
            upper, p, geom, bp, f, bweight, collar_samples(bp, "super", nsamples, seed)
        )
        rep_l = verify_subsolution(
            lower, p, geom, bp, f, bweight, collar_samples(bp, "sub", nsamples, seed)
        )
        if rep_s.passed and rep_l.passed:
            return bp, rep_s, rep_l
        worst = min(rep_s.worst_margin, rep_l.worst_margin)
        delta *= 0.5
    raise CertificationFailure(
        f"no collar width certified after {max_halvings} halvings "
        f"(worst relative margin {worst:.3g})",
        worst_margin=worst,
    )


def certify_upper_barrier_global(p: ProfileFns, w_sol: RadialSolution, f: Nonlinearity,
                                 b: Callable, eps_ladder=None, r_samples=None,
                                 tol_scale=1e-9):
    """Certify phi(-eps w) as a global upper barrier for some ladder eps.

    Descends the dyadic eps ladder until S_k(D^2 phi(-eps w)) <= b f(...)
    holds at every sample radius (with cone admissibility); returns the
    largest working eps and its report.  Also records the decay diagnostic
    of F**(k/(k+1))/f that drives the smallness of the barrier multiplier.
    """
    n, k, R = w_sol.meta["n"], w_sol.meta["k"], w_sol.meta["R"]
    if w_sol.value is None or w_sol.deriv1 is None or w_sol.deriv2 is None:
        raise ParameterError("torsion solution must carry value/deriv callables")
    if eps_ladder is None:
        eps_ladder = [2.0**-i for i in range(21)]
    if r_samples is None:
        r_samples = np.linspace(0.02, 0.98, 97) * R
    fv = vectorized(f.f)
    bv = vectorized(b)
    worst_overall = -math.inf
    last_rows = None
    ff_decay = check_limit_Ff(p.profile)
    for eps in eps_ladder:
        ok = True
        worst = math.inf
        rows = []
        for r in r_samples:
            wv = float(w_sol.value(r))
            w1 = float(w_sol.deriv1(r))
            w2 = float(w_sol.deriv2(r))
            t = -eps * wv
            if t <= 0.0:
                ok = False
                break
            h1 = -eps * w1 * p.phi_prime(t)
            h2 = -eps * w2 * p.phi_prime(t) + eps**2 * w1**2 * p.phi_second(t)
            lam = np.concatenate([[h2], np.full(n - 1, h1 / r)])
            sig = sigma_all(lam, k)[1:]
            admissible = bool(np.all(sig > 0.0))
            lhs = sk_radial(h1, h2, r, n, k)
            rhs = float(bv(r)) * float(fv(p.phi(t)))
            margin = rhs - lhs
            worst = min(worst, margin / rhs if rhs > 0 else margin)
            if not admissible or margin < -tol_scale * rhs:
                ok = False
            rows.append({"r": float(r), "margin": float(margin), "rhs": float(rhs),
                         "admissible": admissible})
        if ok:
            report = {
                "eps": eps,
                "worst_relative_margin": worst,
                "Ff_decay_probe": ff_decay,
                "samples": rows,
            }
            return eps, report
        worst_overall = max(worst_overall, worst)
        last_rows = rows
    raise CertificationFailure(
        f"no ladder eps certified the global upper barrier "
        f"(best worst-margin {worst_overall:.3g})",
        worst_margin=worst_overall,
        report=last_rows,
    )