"""Geometric-grid quadrature tables for the improper integrals of the profile kit.

Two table kinds are provided:

* :class:`DecayingTailIntegral` -- integrals of the form int_s^inf g(tau) dtau
  for a positive decreasing-at-infinity integrand.  The grid is geometric
  (``per_decade`` nodes per decade, integer-aligned exponents so extension is
  exact), each segment is integrated with fixed Gauss-Legendre quadrature,
  and the remaining tail above the top node is handled analytically from a
  fitted local power exponent.  A fitted exponent <= 1 raises
  :class:`KellerOssermanViolation`.

* :class:`CumulativeFromZero` -- int_0^t g for integrands integrable at 0;
  the sliver below the bottom node is closed with a local power fit.

Both tables extend themselves on demand, so callers never need to guess the
range of future queries.
"""

import math

import numpy as np
from scipy.optimize import bisect

from .errors import KellerOssermanViolation, KHessianError, ParameterError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)

# hard range cap: 10**+-290 keeps every node representable
_MAX_EXTENT = 290


def segment_integral(fn, a, b):
    """Fixed 10-point Gauss-Legendre quadrature of ``fn`` over [a, b]."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    vals = np.asarray(fn(mid + half * _GL_NODES), dtype=float)
    return half * float(np.dot(_GL_WEIGHTS, vals))


def vectorized(fn):
    """Return a callable that accepts numpy arrays, wrapping scalar-only fns."""
    try:
        out = fn(np.array([1.0, 2.0]))
        if np.shape(out) == (2,):
            return fn
    except Exception:
        pass
    return np.vectorize(fn, otypes=[float])


class DecayingTailIntegral:
    """Tabulated int_s^inf g with on-demand range extension."""

    def __init__(self, integrand, seed=1.0, per_decade=64, tail_hint=None, name="integral"):
        self.g = integrand
        self.per_decade = int(per_decade)
        self.tail_hint = tail_hint
        self.name = name
        # integer exponent bookkeeping: node j has exponent (i_lo + j)/per_decade
        e0 = round(math.log10(seed) * self.per_decade)
        self.i_lo = e0 - 2 * self.per_decade
        self.i_hi = e0 + 2 * self.per_decade
        self._rebuild()
        self._check_convergence()

    # -- grid management ----------------------------------------------------

    def _node(self, j):
        return 10.0 ** ((self.i_lo + j) / self.per_decade)

    def _nodes(self):
        idx = np.arange(self.i_lo, self.i_hi + 1)
        return 10.0 ** (idx / self.per_decade)

    def _rebuild(self):
        nodes = self._nodes()
        seg = np.array(
            [segment_integral(self.g, nodes[j], nodes[j + 1]) for j in range(len(nodes) - 1)]
        )
        self.nodes = nodes
        self.seg = seg
        self._refresh()

    def _refresh(self):
        # suffix[j] = integral from node j to the top node
        self.suffix = np.concatenate([np.cumsum(self.seg[::-1])[::-1], [0.0]])
        self.tail, self.tail_trusted, self.tail_exponent = self._fit_tail()

    def _extend_high(self):
        if self.i_hi + self.per_decade > _MAX_EXTENT * self.per_decade:
            raise KHessianError(f"{self.name}: upper range cap exceeded")
        old_top = self.nodes[-1]
        new_hi = self.i_hi + self.per_decade
        add = 10.0 ** (np.arange(self.i_hi, new_hi + 1) / self.per_decade)
        seg_add = np.array(
            [segment_integral(self.g, add[j], add[j + 1]) for j in range(len(add) - 1)]
        )
        self.i_hi = new_hi
        self.nodes = np.concatenate([self.nodes, add[1:]])
        self.seg = np.concatenate([self.seg, seg_add])
        self._refresh()
        return old_top

    def _extend_low(self):
        if self.i_lo - self.per_decade < -_MAX_EXTENT * self.per_decade:
            raise KHessianError(f"{self.name}: lower range cap exceeded")
        new_lo = self.i_lo - self.per_decade
        add = 10.0 ** (np.arange(new_lo, self.i_lo + 1) / self.per_decade)
        seg_add = np.array(
            [segment_integral(self.g, add[j], add[j + 1]) for j in range(len(add) - 1)]
        )
        self.i_lo = new_lo
        self.nodes = np.concatenate([add[:-1], self.nodes])
        self.seg = np.concatenate([seg_add, self.seg])
        self._refresh()

    # -- tail handling ------------------------------------------------------

    def _fit_tail(self):
        """Analytic tail above the top node from a fitted power exponent.

        Exponent fitted over the top decade; when the two half-decade slopes
        agree to ~1e-6 the integrand is locally an exact power and the tail
        formula g(S) S/(p-1) is exact.  For faster-than-power decay the same
        formula is a safe overestimate, used only to decide when the grid is
        high enough.
        """
        S = self.nodes[-1]
        gS = float(self.g(np.array([S]))[0])
        if gS == 0.0 or not math.isfinite(gS):
            return 0.0, True, math.inf
        gmid = float(self.g(np.array([S * 10 ** -0.5]))[0])
        glow = float(self.g(np.array([S * 0.1]))[0])
        if glow <= 0.0 or gmid <= 0.0:
            return 0.0, True, math.inf
        p_full = -(math.log(gS) - math.log(glow)) / math.log(10.0)
        p_half = -(math.log(gS) - math.log(gmid)) / (0.5 * math.log(10.0))
        exact_power = abs(p_half - p_full) <= 1e-6 * max(1.0, abs(p_full))
        p = p_half
        if self.tail_hint is not None and exact_power:
            p = self.tail_hint
        if p <= 1.0 + 1e-9:
            if exact_power:
                raise KellerOssermanViolation(
                    f"{self.name} diverges: integrand tail exponent {p:.6g} <= 1",
                    tail_exponent=p,
                )
            return math.inf, False, p
        return gS * S / (p - 1.0), exact_power, p

    def _check_convergence(self, max_extra_decades=8):
        """Raise if the tail exponent stays <= 1 as the grid is pushed up."""
        tries = 0
        while not self.tail_trusted and self.tail_exponent <= 1.01:
            if tries >= max_extra_decades:
                raise KellerOssermanViolation(
                    f"{self.name} diverges: fitted tail exponent "
                    f"{self.tail_exponent:.6g} after extension",
                    tail_exponent=self.tail_exponent,
                )
            self._extend_high()
            tries += 1

    # -- evaluation ---------------------------------------------------------

    def _segment_of(self, s):
        j = int(math.floor(math.log10(s) * self.per_decade)) - self.i_lo
        return min(max(j, 0), len(self.nodes) - 2)

    def value(self, s, rel_tail=1e-13):
        """int_s^inf g, accurate to ~1e-13 relative."""
        s = float(s)
        if not (s > 0.0) or not math.isfinite(s):
            raise ParameterError(f"{self.name}: argument must be positive finite, got {s}")
        while s < self.nodes[0] * (1.0 + 1e-12):
            self._extend_low()
        while s > self.nodes[-2]:
            self._extend_high()
        j = self._segment_of(s)
        local = segment_integral(self.g, s, self.nodes[j + 1])
        v = self.suffix[j + 1] + local
        while not self.tail_trusted and self.tail > rel_tail * (v + self.tail):
            self._extend_high()
            j = self._segment_of(s)
            local = segment_integral(self.g, s, self.nodes[j + 1])
            v = self.suffix[j + 1] + local
        return v + self.tail

    def node_values(self):
        return self.suffix + self.tail

    def sup_value(self, rel=1e-9, max_decades=40):
        """Limit of the integral as s -> 0+ (may be finite or +inf-like large)."""
        prev = self.node_values()[0]
        for _ in range(max_decades):
            self._extend_low()
            cur = self.node_values()[0]
            if cur - prev <= rel * max(cur, 1e-300):
                return cur
            prev = cur
        return prev

    def invert(self, target, rtol=1e-13):
        """Solve value(s) = target for s (value is strictly decreasing).

        Bisection within the bracketing grid segment (unconditionally safe;
        the derivative of the integral blows up at small arguments), then a
        few guarded Newton corrections inside the bracket so the inverse is
        a rounding-level-smooth function of the target -- downstream checks
        difference it numerically.
        """
        t = float(target)
        if not (t > 0.0) or not math.isfinite(t):
            raise ParameterError(f"{self.name}: inverse argument must be positive, got {t}")
        # make sure the node values bracket the target
        while self.node_values()[0] < t:
            prev = self.node_values()[0]
            self._extend_low()
            if self.node_values()[0] - prev <= 1e-14 * max(prev, 1e-300):
                raise ParameterError(
                    f"{self.name}: target {t:.6g} exceeds the supremum "
                    f"{self.node_values()[0]:.6g} of the integral"
                )
        while self.node_values()[-1] > 0.5 * t:
            self._extend_high()
        vals = self.node_values()
        j = int(np.searchsorted(-vals, -t))
        if j == 0:
            return self.nodes[0]
        a, b = self.nodes[j - 1], self.nodes[j]
        root = float(bisect(lambda s: self.value(s) - t, a, b, xtol=1e-300, rtol=rtol, maxiter=300))
        for _ in range(3):
            res = self.value(root) - t
            if res == 0.0:
                break
            slope = float(self.g(np.array([root]))[0])
            if slope <= 0.0 or not math.isfinite(slope):
                break
            nxt = root + res / slope
            if not (a <= nxt <= b):
                break
            if abs(nxt - root) <= 2.0 * np.finfo(float).eps * root:
                root = nxt
                break
            root = nxt
        return root


class CumulativeFromZero:
    """Tabulated int_0^t g for integrands integrable at 0."""

    def __init__(self, integrand, seed=1.0, per_decade=64, floor_decades=12, name="cumulative"):
        self.g = integrand
        self.per_decade = int(per_decade)
        self.name = name
        e0 = round(math.log10(seed) * self.per_decade)
        self.i_lo = e0 - floor_decades * self.per_decade
        self.i_hi = e0 + self.per_decade
        self._rebuild()

    def _nodes(self):
        idx = np.arange(self.i_lo, self.i_hi + 1)
        return 10.0 ** (idx / self.per_decade)

    def _head(self):
        """Closing integral below the bottom node from a local power fit."""
        s0 = self.nodes[0]
        g0 = float(self.g(np.array([s0]))[0])
        g1 = float(self.g(np.array([s0 * 10.0]))[0])
        if g0 <= 0.0 or g1 <= 0.0:
            raise ParameterError(f"{self.name}: integrand must be positive near 0")
        q = (math.log(g1) - math.log(g0)) / math.log(10.0)
        if q <= -1.0 + 1e-9:
            raise ParameterError(
                f"{self.name}: integrand not integrable at 0 (local exponent {q:.4g})"
            )
        return g0 * s0 / (q + 1.0)

    def _rebuild(self):
        self.nodes = self._nodes()
        self.seg = np.array(
            [
                segment_integral(self.g, self.nodes[j], self.nodes[j + 1])
                for j in range(len(self.nodes) - 1)
            ]
        )
        self.prefix = np.concatenate([[0.0], np.cumsum(self.seg)])
        self.head = self._head()

    def _extend_high(self):
        if self.i_hi + self.per_decade > _MAX_EXTENT * self.per_decade:
            raise KHessianError(f"{self.name}: upper range cap exceeded")
        new_hi = self.i_hi + self.per_decade
        add = 10.0 ** (np.arange(self.i_hi, new_hi + 1) / self.per_decade)
        seg_add = np.array(
            [segment_integral(self.g, add[j], add[j + 1]) for j in range(len(add) - 1)]
        )
        self.i_hi = new_hi
        self.nodes = np.concatenate([self.nodes, add[1:]])
        self.seg = np.concatenate([self.seg, seg_add])
        self.prefix = np.concatenate([[0.0], np.cumsum(self.seg)])

    def value(self, t):
        t = float(t)
        if t == 0.0:
            return 0.0
        if not (t > 0.0) or not math.isfinite(t):
            raise ParameterError(f"{self.name}: argument must be nonnegative finite, got {t}")
        if t <= self.nodes[0]:
            # inside the head region: rescale the power-fit closing integral
            g0 = float(self.g(np.array([self.nodes[0]]))[0])
            gt = float(self.g(np.array([t]))[0])
            q = (math.log(g0) - math.log(gt)) / (math.log(self.nodes[0]) - math.log(t)) \
                if gt > 0.0 and t < self.nodes[0] else 0.0
            if q <= -1.0 + 1e-9:
                raise ParameterError(f"{self.name}: integrand not integrable at 0")
            return gt * t / (q + 1.0)
        while t > self.nodes[-1]:
            self._extend_high()
        j = int(math.floor(math.log10(t) * self.per_decade)) - self.i_lo
        j = min(max(j, 0), len(self.nodes) - 2)
        return self.head + self.prefix[j] + segment_integral(self.g, self.nodes[j], t)
