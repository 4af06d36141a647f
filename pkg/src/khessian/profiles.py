"""Blow-up profile machinery: growth integrals, their inverses, and the
limit constants that control boundary asymptotics.

For a nonlinearity f of order k the kit provides

* ``F(s)``   cumulative integral of f from 0 (exact for built-in kinds),
* ``H(s)``   ((k+1) F(s))**(1/(k+1)),
* ``Phi(s)`` int_s^inf dtau/H(tau)  (finite iff the blow-up condition holds),
* ``phi(t)`` the inverse of Phi -- the universal boundary blow-up shape,
* ``Psi/psi`` the analogous pair built from f**(-1/k),
* ``C_f``    lim H'(s) Phi(s), and for a weight m: M = int m and
  ``C_m``     lim (M/m)'(t) as t -> 0+.

``Phi`` is always evaluated by quadrature (tail-substituted geometric
tables), even when a closed form exists, so that closed forms remain
available as independent oracles.  ``phi`` is inverted by bracketing and
bisection: the derivative of Phi blows up at small arguments, which makes
Newton refinement unsafe there, and inverted values are memoised anyway.
"""

import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._quad import CumulativeFromZero, DecayingTailIntegral, vectorized
from .errors import (
    ConditionViolation,
    KellerOssermanViolation,
    KHessianError,
    LimitNotDetected,
    ParameterError,
)
from .nonlinearity import Nonlinearity, Weight

__all__ = [
    "Profile",
    "ProfileFns",
    "build_profile",
    "compute_Cf",
    "build_weight",
    "build_psi",
    "assemble_profile",
    "xi_bounds",
    "PowerAsymptote",
    "power_law_asymptote",
    "check_limit_Ff",
    "predicted_profile",
    "profile_table",
]


class Profile:
    """Weight-independent profile machinery for one (f, k) pair."""

    def __init__(self, nl: Nonlinearity, k: int, per_decade: int = 64):
        if int(k) < 1:
            raise ParameterError(f"order k must be >= 1, got {k}")
        self.k = int(k)
        self.nl = nl
        nl.check_f1()
        if nl.kind == "power" and nl.gamma <= self.k:
            # exact tail exponent of 1/H for the power kind
            raise KellerOssermanViolation(
                f"(f2) power nonlinearity with gamma={nl.gamma} <= k={self.k}: "
                "the profile integral diverges",
                tail_exponent=(nl.gamma + 1.0) / (self.k + 1.0),
            )

        self._f = vectorized(nl.f)
        self._fp = vectorized(nl.f_prime)
        if nl.F_closed(1.0) is not None:
            self._F = nl.F_closed
        else:
            table = CumulativeFromZero(self._f, name="F")
            self._F = vectorized(lambda s: table.value(s))

        kp1 = self.k + 1.0

        def inv_H(s):
            s = np.asarray(s, dtype=float)
            with np.errstate(over="ignore"):
                F = np.asarray(self._F(s), dtype=float)
            out = np.where(np.isfinite(F), (kp1 * np.where(F > 0, F, 1.0)) ** (-1.0 / kp1), 0.0)
            return np.where(F > 0, out, np.inf)

        tail_hint = None
        if nl.kind == "power":
            tail_hint = (nl.gamma + 1.0) / kp1
        elif nl.kind == "custom" and nl.tail_exponent_hint is not None:
            tail_hint = (nl.tail_exponent_hint + 1.0) / kp1
        self._ko = DecayingTailIntegral(
            inv_H, per_decade=per_decade, tail_hint=tail_hint, name="profile integral"
        )
        self.ko_ok = True
        self._phi_cache = functools.lru_cache(maxsize=1 << 16)(self._phi_uncached)

    # -- basic functions ----------------------------------------------------

    def f(self, s):
        return self._f(s)

    def f_prime(self, s):
        return self._fp(s)

    def F(self, s):
        return self._F(s)

    def H(self, s):
        return ((self.k + 1.0) * self._F(s)) ** (1.0 / (self.k + 1.0))

    def H_prime(self, s):
        return ((self.k + 1.0) * self._F(s)) ** (-self.k / (self.k + 1.0)) * self._f(s)

    def Ff_ratio(self, s):
        """F(s)**(k/(k+1)) / f(s); tends to 0 under the blow-up condition."""
        return np.asarray(self._F(s), float) ** (self.k / (self.k + 1.0)) / self._f(s)

    # -- the integral and its inverse ----------------------------------------

    def Phi(self, s):
        return self._ko.value(s)

    def phi_domain_sup(self):
        """Supremum of Phi (the largest admissible argument of phi)."""
        return self._ko.sup_value()

    def _phi_uncached(self, t):
        return self._ko.invert(t, rtol=1e-13)

    def phi(self, t):
        t = float(t)
        if not (t > 0.0) or not math.isfinite(t):
            raise ParameterError(f"phi argument must be positive finite, got {t}")
        return self._phi_cache(t)

    def phi_prime(self, t):
        return -float(self.H(self.phi(t)))

    def phi_second(self, t):
        s = self.phi(t)
        return float(((self.k + 1.0) * self._F(s)) ** ((1.0 - self.k) / (self.k + 1.0)) * self._f(s))


def build_profile(nl, k, per_decade=64):
    """Construct the weight-independent profile machinery."""
    return Profile(nl, k, per_decade=per_decade)


def _aitken(seq):
    """Aitken delta-squared acceleration with degenerate-difference guards."""
    acc = []
    for i in range(len(seq) - 2):
        d2 = seq[i + 2] - 2.0 * seq[i + 1] + seq[i]
        scale = max(abs(seq[i + 2]), abs(seq[i + 1]), abs(seq[i]), 1e-300)
        if abs(d2) < 1e-14 * scale:
            acc.append(seq[i + 2])
        else:
            acc.append(seq[i + 2] - (seq[i + 2] - seq[i + 1]) ** 2 / d2)
    return acc


def _detect_limit(seq, osc_tol, what):
    if len(seq) < 3:
        raise LimitNotDetected(f"{what}: fewer than 3 finite probes", probes=seq)
    acc = _aitken(seq)
    tail = acc[-3:] if len(acc) >= 3 else acc
    spread = max(tail) - min(tail)
    ref = max(abs(tail[-1]), 1e-300)
    if spread > osc_tol * ref:
        raise LimitNotDetected(
            f"{what}: relative oscillation {spread / ref:.3g} exceeds {osc_tol}", probes=seq
        )
    return tail[-1]


def compute_Cf(p: Profile, s0=1.0, max_terms=40, osc_tol=1e-3):
    """Limit constant of H'(s) Phi(s) along s = s0 * 2**i, Aitken-accelerated."""
    if not p.ko_ok:
        raise ParameterError("profile integral not finite; C_f undefined")
    seq = []
    for i in range(max_terms):
        s = s0 * 2.0**i
        with np.errstate(over="ignore", invalid="ignore"):
            hp = float(p.H_prime(s))
            if not math.isfinite(hp):
                break
            v = hp * p.Phi(s)
        if not math.isfinite(v):
            break
        seq.append(v)
    return _detect_limit(seq, osc_tol, "C_f probe sequence")


def build_weight(w: Weight, per_decade=64, osc_tol=1e-7):
    """Cumulative weight M and the limit constant C_m of (M/m)' at 0+.

    M uses the closed form for built-in kinds and a quadrature table for
    custom weights; C_m is always the extrapolated numeric limit (central
    differences of M/m on a dyadic ladder, Aitken-accelerated).
    """
    w.check_b2()
    if w.M_closed(1.0) is not None:
        M = w.M_closed
    else:
        table = CumulativeFromZero(vectorized(w.m), seed=min(1.0, w.delta0 / 4), name="M")
        M = vectorized(lambda t: table.value(t))

    g = lambda t: float(M(t)) / float(w.m(t))
    t0 = min(0.25, w.delta0 / 8.0)
    eta = 1.0 / 64.0
    seq = []
    for i in range(40):
        t = t0 * 2.0**-i
        d = (g(t * (1.0 + eta)) - g(t * (1.0 - eta))) / (2.0 * t * eta)
        if not math.isfinite(d):
            break
        seq.append(d)
        if len(seq) >= 6:
            acc = _aitken(seq)
            tail = acc[-3:]
            if max(tail) - min(tail) <= osc_tol * max(abs(tail[-1]), 1e-300):
                return M, float(tail[-1])
    return M, float(_detect_limit(seq, 1e-4, "C_m probe sequence"))


class PsiPair:
    """Inverse pair built from f**(-1/k): Psi and its inverse psi."""

    def __init__(self, nl: Nonlinearity, k: int, per_decade: int = 64):
        self.k = int(k)
        f = vectorized(nl.f)

        def integrand(s):
            with np.errstate(over="ignore"):
                v = np.asarray(f(s), dtype=float)
            return np.where(np.isfinite(v), v, np.inf) ** (-1.0 / k)

        tail_hint = nl.gamma / k if nl.kind == "power" else None
        self._table = DecayingTailIntegral(
            integrand, per_decade=per_decade, tail_hint=tail_hint, name="subsolution integral"
        )
        self._f = f
        self._psi_cache = functools.lru_cache(maxsize=1 << 14)(self._table.invert)
        self._self_check()

    def Psi(self, s):
        return self._table.value(s)

    def psi(self, t):
        t = float(t)
        if not (t > 0.0) or not math.isfinite(t):
            raise ParameterError(f"psi argument must be positive finite, got {t}")
        return self._psi_cache(t)

    def psi_prime(self, t):
        return -float(self._f(self.psi(t))) ** (1.0 / self.k)

    def _self_check(self, rel=1e-6):
        # psi'(s) = -f(psi(s))**(1/k), checked by central differences
        for t in (0.02, 0.07, 0.2, 0.7, 2.0):
            h = 1e-6 * t
            fd = (self.psi(t + h) - self.psi(t - h)) / (2.0 * h)
            an = self.psi_prime(t)
            if abs(fd - an) > rel * max(abs(an), 1e-300) * 50:
                raise KHessianError(
                    f"subsolution inverse self-check failed at t={t}: fd={fd}, analytic={an}"
                )


def build_psi(nl, k, per_decade=64):
    """Build (Psi, psi); raises KellerOssermanViolation if the tail diverges."""
    pair = PsiPair(nl, k, per_decade=per_decade)
    return pair.Psi, pair.psi


@dataclass
class ProfileFns:
    """Assembled profile/weight bundle used by the solvers and checkers."""

    k: int
    nonlinearity: Nonlinearity
    weight: Weight
    profile: Profile
    M: Callable
    C_f: float
    C_m: float
    ko_ok: bool
    condition15_ok: bool
    psi_pair: Optional[PsiPair] = None

    # callables forwarded from the backing profile
    def f(self, s):
        return self.profile.f(s)

    def F(self, s):
        return self.profile.F(s)

    def H(self, s):
        return self.profile.H(s)

    def Phi(self, s):
        return self.profile.Phi(s)

    def phi(self, t):
        return self.profile.phi(t)

    def phi_prime(self, t):
        return self.profile.phi_prime(t)

    def phi_second(self, t):
        return self.profile.phi_second(t)

    def Psi(self, s):
        self._need_psi()
        return self.psi_pair.Psi(s)

    def psi(self, t):
        self._need_psi()
        return self.psi_pair.psi(t)

    def m(self, t):
        return self.weight.m(t)

    def m_prime(self, t):
        return self.weight.m_prime(t)

    def _need_psi(self):
        if self.psi_pair is None:
            self.psi_pair = PsiPair(self.nonlinearity, self.k)

    def header(self):
        return {
            "k": self.k,
            "nonlinearity": self.nonlinearity.describe(),
            "weight": self.weight.describe(),
            "C_f": self.C_f,
            "C_m": self.C_m,
            "ko_ok": self.ko_ok,
            "condition15_ok": self.condition15_ok,
        }


def assemble_profile(nl, w, k, with_psi=False):
    """Build the full ProfileFns bundle for a nonlinearity/weight/order triple."""
    prof = build_profile(nl, k)
    C_f = compute_Cf(prof)
    M, C_m = build_weight(w)
    bundle = ProfileFns(
        k=int(k),
        nonlinearity=nl,
        weight=w,
        profile=prof,
        M=M,
        C_f=C_f,
        C_m=C_m,
        ko_ok=prof.ko_ok,
        condition15_ok=bool(C_f > 1.0 - C_m),
    )
    if with_psi:
        bundle._need_psi()
    return bundle


def xi_bounds(w: Weight, L0, l0, C_f, C_m, k):
    """Asymptotic amplitude bounds from the weight constants and curvature extremes."""
    if not (0.0 < l0 <= L0):
        raise ParameterError(f"need 0 < l0 <= L0, got l0={l0}, L0={L0}")
    gap = 1.0 - (1.0 - C_m) / C_f
    if gap <= 0.0:
        raise ConditionViolation(
            f"(1.5) constant gap violated: C_f={C_f:.6g} <= 1 - C_m={1.0 - C_m:.6g}",
            label="(1.5)",
        )
    xi_lower = (w.b_lower / (L0 * gap)) ** (1.0 / (k + 1.0))
    xi_upper = (w.b_upper / (l0 * gap)) ** (1.0 / (k + 1.0))
    return xi_lower, xi_upper


@dataclass(frozen=True)
class PowerAsymptote:
    """Closed-form boundary asymptote u ~ coeff * d**exponent for power cases."""

    exponent: float
    coeff_lower: float
    coeff_upper: float


def power_law_asymptote(k, gamma, l0, L0, alpha=None):
    """Closed-form asymptote for f = s**gamma with constant or power weight.

    ``alpha=None`` is the constant-weight case (b comparable to 1 near the
    boundary); ``alpha>0`` is the power-weight case b ~ d**(alpha (k+1)).
    Lower coefficient pairs with l0, upper with L0.
    """
    k = int(k)
    if gamma <= k:
        raise ParameterError(f"(f2) closed-form asymptote needs gamma > k, got gamma={gamma}, k={k}")
    if not (0.0 < l0 <= L0):
        raise ParameterError(f"need 0 < l0 <= L0, got l0={l0}, L0={L0}")
    gk = gamma - k
    if alpha is None:
        exponent = -(k + 1.0) / gk
        base = (k + 1.0) ** k * (gamma + 1.0) / gk ** (k + 1.0)
    else:
        alpha = float(alpha)
        if alpha <= 0.0:
            raise ParameterError(f"power-weight asymptote needs alpha > 0, got {alpha}")
        exponent = -(k + 1.0) * (alpha + 1.0) / gk
        base = (
            (gamma + alpha * k + alpha + 1.0)
            * (k + 1.0) ** k
            * (alpha + 1.0) ** k
            / gk ** (k + 1.0)
        )
    return PowerAsymptote(
        exponent=exponent,
        coeff_lower=(l0 * base) ** (1.0 / gk),
        coeff_upper=(L0 * base) ** (1.0 / gk),
    )


def check_limit_Ff(p: Profile, i_lo=5, i_hi=30):
    """Probe F(s)**(k/(k+1))/f(s) on s = 2**i and return the last finite value.

    The ratio must tend to 0 for the blow-up machinery to work; the returned
    value is the estimate at the largest finite probe (a sanity diagnostic,
    not a certified bound).
    """
    last = math.inf
    for i in range(i_lo, i_hi + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            r = float(p.Ff_ratio(2.0**i))
        if not math.isfinite(r):
            break
        last = r
    return last


def predicted_profile(p: ProfileFns, xi, d):
    """Predicted boundary profile phi(xi * M(d)) at distance d."""
    if not (0.0 < d < p.weight.delta0):
        raise ParameterError(
            f"distance d={d} outside the weight validity window (0, {p.weight.delta0})"
        )
    return p.phi(xi * float(p.M(d)))


def profile_table(p: ProfileFns, xi, ts):
    """Rows (t, phi, phi_prime, M, predicted) for export."""
    rows = []
    for t in np.asarray(ts, dtype=float):
        rows.append(
            (
                float(t),
                p.phi(t),
                p.phi_prime(t),
                float(p.M(t)),
                predicted_profile(p, xi, t) if t < p.weight.delta0 else math.nan,
            )
        )
    return rows
