"""Configuration-driven experiment runner.

Configs are flat ``key = value`` text files (``#`` starts a comment); the
schema is documented in the README.  Each invocation runs one experiment
and writes CSV data plus JSON metadata into the output directory; report
bodies are byte-identical across reruns, timestamps live in a
``*.runinfo.json`` sidecar.

Exit codes: 0 success (and all checks passed), 1 computational failure
(diagnostic written to ``error.json``), 2 config/parameter validation
failure with a message naming the violated condition label.
"""

import argparse
import json
import math
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__, reports
from .barriers import (
    ball_geometry,
    certify_barriers,
    certify_upper_barrier_global,
    ellipse_geometry,
)
from .errors import ConditionViolation, KellerOssermanViolation, ParameterError
from .fd2d import exhaust
from .grid2d import build_grid, parse_domain
from .nonlinearity import Nonlinearity, Weight
from .profiles import assemble_profile, profile_table, xi_bounds
from .radial import (
    RadialProblem,
    asymptotics_report,
    integrate_blowup_ivp,
    shoot_blowup_radius,
    solve_exhaustion_bvp,
    solve_torsion,
)

COMMANDS = (
    "profile",
    "radial-ivp",
    "radial-exhaust",
    "fd-exhaust",
    "check-barrier",
    "verify-asymptotics",
)


class Config:
    """Flat key-value config with typed accessors."""

    def __init__(self, pairs):
        self.pairs = dict(pairs)
        self.used = set()

    @staticmethod
    def parse(text):
        pairs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"config line {lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            pairs[key.strip()] = value.strip()
        return Config(pairs)

    def has(self, key):
        return key in self.pairs

    def get(self, key, cast=str, default=None, required=False):
        if key not in self.pairs:
            if required:
                raise ParameterError(f"config key {key!r} is required for this command")
            return default
        self.used.add(key)
        raw = self.pairs[key]
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"config key {key!r}: cannot parse {raw!r} ({exc})")

    def floats(self, key, default=None, required=False):
        raw = self.get(key, str, None, required)
        if raw is None:
            return default
        return [float(v) for v in raw.split(",") if v.strip()]


def _parse_nonlinearity(spec):
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "power":
        return Nonlinearity.power(float(rest))
    if kind in ("exp", "exponential"):
        return Nonlinearity.exponential(float(rest))
    raise ParameterError(f"(f1) unknown nonlinearity kind {kind!r} (use power:G or exp:A)")


def _parse_weight(spec, cfg):
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    kw = {
        "b_lower": cfg.get("b_lower", float, 1.0),
        "b_upper": cfg.get("b_upper", float, 1.0),
    }
    delta0 = cfg.get("delta0", float, None)
    if delta0 is not None:
        kw["delta0"] = delta0
    if kind in ("constant", "const"):
        return Weight.constant(float(rest) if rest else 1.0, **kw)
    if kind == "power":
        return Weight.power(float(rest), **kw)
    raise ParameterError(f"(b2) unknown weight kind {kind!r} (use constant:C or power:A)")


def _validate_orders(n, k, nl):
    if not 1 <= k <= n:
        raise ParameterError(f"order k={k} must satisfy 1 <= k <= n={n}")
    if nl.kind == "power" and nl.gamma <= k:
        raise KellerOssermanViolation(
            f"(f2) power exponent gamma={nl.gamma} must exceed k={k}",
            tail_exponent=(nl.gamma + 1.0) / (k + 1.0),
        )


def _bundle(cfg, nl, w, k):
    """Assemble the profile bundle, honouring explicit constant overrides."""
    p = assemble_profile(nl, w, k)
    cf = cfg.get("cf", float, None)
    cm = cfg.get("cm", float, None)
    if cf is not None:
        p.C_f = cf
    if cm is not None:
        p.C_m = cm
    p.condition15_ok = bool(p.C_f > 1.0 - p.C_m)
    if not p.condition15_ok:
        raise ConditionViolation(
            f"(1.5) constant gap violated: C_f={p.C_f:.6g} <= 1 - C_m={1.0 - p.C_m:.6g}",
            label="(1.5)",
        )
    return p


def _default_t_grid(cfg):
    tmin = cfg.get("t_min", float, 1e-3)
    tmax = cfg.get("t_max", float, 10.0)
    per_dec = cfg.get("t_per_decade", int, 10)
    klo = math.ceil(math.log10(tmin) * per_dec - 1e-9)
    khi = math.floor(math.log10(tmax) * per_dec + 1e-9)
    return [10.0 ** (kk / per_dec) for kk in range(klo, khi + 1)]


def _geometry(cfg, n, k):
    dom = cfg.get("domain", str, None)
    if dom is not None and dom.startswith("ellipse"):
        d = parse_domain(dom)
        return ellipse_geometry(d.a, d.b, k=k)
    R = cfg.get("R", float, 1.0)
    return ball_geometry(n, k, R)


def _resolve_xi(cfg, p, geom):
    raw = cfg.get("xi", str, "auto")
    if raw != "auto":
        return float(raw)
    lo, _ = xi_bounds(p.weight, geom.L0, geom.l0, p.C_f, p.C_m, p.k)
    return lo


def cmd_profile(cfg, outdir, base, quiet):
    k = cfg.get("k", int, required=True)
    nl = _parse_nonlinearity(cfg.get("f", str, required=True))
    w = _parse_weight(cfg.get("weight", str, "constant:1"), cfg)
    _validate_orders(cfg.get("n", int, max(2, k)), k, nl)
    p = _bundle(cfg, nl, w, k)
    geom = _geometry(cfg, cfg.get("n", int, max(2, k)), k)
    xi = _resolve_xi(cfg, p, geom)
    ts = cfg.floats("t_grid") or _default_t_grid(cfg)
    sup = p.profile.phi_domain_sup()
    ts = [t for t in ts if t < 0.95 * sup]
    rows = profile_table(p, xi, ts)
    reports.profile_files(outdir / base, p, xi, rows)
    if not quiet:
        print(f"profile: C_f={p.C_f:.6f} C_m={p.C_m:.6f} xi={xi:.6f} rows={len(rows)}")
    return 0


def _radial_problem(cfg):
    n = cfg.get("n", int, required=True)
    k = cfg.get("k", int, required=True)
    R = cfg.get("R", float, 1.0)
    nl = _parse_nonlinearity(cfg.get("f", str, required=True))
    w = _parse_weight(cfg.get("weight", str, "constant:1"), cfg)
    _validate_orders(n, k, nl)
    return RadialProblem.from_weight(n, k, R, nl, w), nl, w


def cmd_radial_ivp(cfg, outdir, base, quiet):
    prob, nl, w = _radial_problem(cfg)
    u0 = cfg.get("u0", float, required=True)
    tol = cfg.get("tol", float, 1e-9)
    sol = integrate_blowup_ivp(prob, u0, tol)
    reports.radial_solution_files(outdir / base, sol)
    if not quiet:
        print(f"radial-ivp: Rstar={sol.Rstar:.8f} steps={sol.meta['steps']}")
    return 0


def cmd_radial_exhaust(cfg, outdir, base, quiet):
    prob, nl, w = _radial_problem(cfg)
    js = cfg.floats("j_schedule", required=True)
    h = cfg.get("h", float, 1.0 / 256.0)
    tol = cfg.get("tol", float, 1e-9)
    sols = solve_exhaustion_bvp(prob, js, h, tol)
    rows = []
    for sol in sols:
        j = sol.meta["j"]
        rows.extend((j, r, u, u1) for r, u, u1 in zip(sol.r, sol.u, sol.u1))
    reports.write_csv(outdir / f"{base}.csv", ["j", "r", "u", "u1"], rows)
    mono = [float(np.min(b.u - a.u)) for a, b in zip(sols, sols[1:])]
    mid = len(sols[0].r) // 2
    incs = [abs(b.u[mid] - a.u[mid]) for a, b in zip(sols, sols[1:])]
    meta = {
        "j_schedule": js,
        "h": h,
        "tol": tol,
        "monotone_min_increment": mono,
        "center_increments": incs,
        "monotone_ok": bool(all(v >= -1e-8 for v in mono)),
    }
    reports.write_json(outdir / f"{base}.json", meta)
    if not quiet:
        print(f"radial-exhaust: {len(sols)} levels, monotone_ok={meta['monotone_ok']}")
    return 0


def cmd_fd_exhaust(cfg, outdir, base, quiet):
    nl = _parse_nonlinearity(cfg.get("f", str, required=True))
    w = _parse_weight(cfg.get("weight", str, "constant:1"), cfg)
    _validate_orders(2, 1, nl)
    dom = parse_domain(cfg.get("domain", str, required=True))
    h = cfg.get("h", float, 1.0 / 64.0)
    tol = cfg.get("tol", float, 1e-8)
    js = cfg.floats("j_schedule", required=True)
    grid = build_grid(dom, h)
    limit, diags = exhaust(grid, nl, w, js, tol)
    reports.field_files(outdir / base, limit, extra_meta={
        "j_schedule": js,
        "increment_min": diags["increment_min"],
        "cauchy_ratio": diags["cauchy_ratio"],
        "monotone_ok": bool(all(v >= -1e-8 for v in diags["increment_min"])),
    })
    if not quiet:
        print(f"fd-exhaust: nodes={grid.n_interior} monotone_ok="
              f"{all(v >= -1e-8 for v in diags['increment_min'])}")
    return 0


def cmd_check_barrier(cfg, outdir, base, quiet):
    n = cfg.get("n", int, required=True)
    k = cfg.get("k", int, required=True)
    nl = _parse_nonlinearity(cfg.get("f", str, required=True))
    w = _parse_weight(cfg.get("weight", str, "constant:1"), cfg)
    _validate_orders(n, k, nl)
    eps = cfg.get("eps", float, 0.1)
    if not 0.0 < eps < w.b_lower / 2.0:
        raise ParameterError(f"(3.3) barrier slack must satisfy 0 < eps < b_lower/2, got {eps}")
    p = _bundle(cfg, nl, w, k)
    geom = _geometry(cfg, n, k)
    seed = cfg.get("seed", int, 0)
    nsamples = cfg.get("samples", int, 200)
    bp, rep_s, rep_l = certify_barriers(p, geom, nl, w, eps=eps, nsamples=nsamples, seed=seed)
    out = {
        "geometry": geom.label,
        "delta_eps": bp.delta_eps,
        "eps": bp.eps,
        "supersolution": json.loads(rep_s.to_json()),
        "subsolution": json.loads(rep_l.to_json()),
    }
    passed = rep_s.passed and rep_l.passed
    if cfg.get("global_check", str, "false").lower() in ("true", "1", "yes"):
        R = cfg.get("R", float, 1.0)
        prob = RadialProblem.from_weight(n, k, R, nl, w)
        eps_g, rep_g = certify_upper_barrier_global(p, solve_torsion(prob), nl, prob.b)
        out["global_upper_barrier"] = {
            "eps": eps_g,
            "worst_relative_margin": rep_g["worst_relative_margin"],
        }
    reports.write_json(outdir / f"{base}.json", out)
    print(f"check-barrier: {'PASS' if passed else 'FAIL'} "
          f"(delta_eps={bp.delta_eps:.4g}, eps={bp.eps})")
    return 0 if passed else 1


def cmd_verify_asymptotics(cfg, outdir, base, quiet):
    prob, nl, w = _radial_problem(cfg)
    p = _bundle(cfg, nl, w, prob.k)
    geom = _geometry(cfg, prob.n, prob.k)
    xi = _resolve_xi(cfg, p, geom)
    tol = cfg.get("tol", float, 1e-9)
    d_lo = cfg.get("d_lo", float, 1e-4)
    d_hi = cfg.get("d_hi", float, 1e-2)
    band = cfg.floats("ratio_band", default=[0.9, 1.1])
    per_decade = cfg.get("per_decade", int, 8)
    u0, sol = shoot_blowup_radius(prob, tol=tol)
    npts = max(2, int(round(math.log10(d_hi / d_lo) * per_decade)) + 1)
    ladder = np.geomspace(d_lo, d_hi, npts)
    rep = asymptotics_report(sol, p, xi, d_values=ladder)
    rows = rep.rows  # descending in d: rows[0] at d_hi, rows[-1] at d_lo
    in_band = bool(np.all((rows[:, 3] >= band[0]) & (rows[:, 3] <= band[1])))
    trend = bool(abs(rows[-1, 3] - 1.0) <= abs(rows[0, 3] - 1.0) + 1e-12)
    passed = in_band and trend
    reports.write_csv(outdir / f"{base}.csv", ["d", "u", "predicted", "ratio"], rows)
    reports.write_json(outdir / f"{base}.json", {
        "xi": xi, "u0": u0, "Rstar": sol.Rstar, "band": band,
        "in_band": in_band, "trend_improves": trend, "passed": passed,
    })
    print(f"verify-asymptotics: {'PASS' if passed else 'FAIL'} "
          f"(Rstar={sol.Rstar:.6f}, ratio[{rows[0, 0]:.1e}]={rows[0, 3]:.4f})")
    return 0 if passed else 1


_DISPATCH = {
    "profile": cmd_profile,
    "radial-ivp": cmd_radial_ivp,
    "radial-exhaust": cmd_radial_exhaust,
    "fd-exhaust": cmd_fd_exhaust,
    "check-barrier": cmd_check_barrier,
    "verify-asymptotics": cmd_verify_asymptotics,
}


def run(cfg: Config, outdir: Path, seed=None, quiet=False):
    command = cfg.get("command", str, required=True)
    if command not in COMMANDS:
        raise ParameterError(f"unknown command {command!r}; expected one of {COMMANDS}")
    if seed is not None:
        cfg.pairs["seed"] = str(seed)
    outdir.mkdir(parents=True, exist_ok=True)
    base = cfg.get("out", str, command)
    status = _DISPATCH[command](cfg, outdir, base, quiet)
    reports.write_json(outdir / f"{base}.runinfo.json", {
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "command": command,
        "version": __version__,
    })
    return status


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="khessian",
        description="Experiment runner for the k-Hessian blow-up toolkit",
    )
    ap.add_argument("--config", required=True, help="path to a flat key=value config file")
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    ap.add_argument("--seed", type=int, default=None, help="override the sampling seed")
    ap.add_argument("--quiet", action="store_true", help="suppress informational output")
    args = ap.parse_args(argv)

    outdir = Path(args.out)
    try:
        cfg = Config.parse(Path(args.config).read_text())
        status = run(cfg, outdir, seed=args.seed, quiet=args.quiet)
    except (ParameterError, ConditionViolation, KellerOssermanViolation) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # computational failure: diagnose, never crash
        outdir.mkdir(parents=True, exist_ok=True)
        reports.write_json(outdir / "error.json", {
            "error": type(exc).__name__,
            "message": str(exc),
            "traceback": traceback.format_exc(),
        })
        print(f"computation failed: {exc} (diagnostics in {outdir / 'error.json'})",
              file=sys.stderr)
        return 1
    return status


if __name__ == "__main__":
    sys.exit(main())
