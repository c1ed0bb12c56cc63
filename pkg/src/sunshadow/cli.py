"""Command-line surface: the ``ssmap`` tool.

Every artifact embeds the fully resolved run configuration, either as a
``# config: {...}`` comment line (CSV) or a ``"config"`` field (JSON),
so datasets are self-describing and byte-reproducible for a fixed
configuration and seed.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import __version__
from . import brake as brake_mod
from . import core, manifolds, propagate, ssmap, stark
from .errors import ConfigInvalid, SunShadowError
from .params import PhysParams
from .propagate import RegimeKind
from .ssmap import SectionPoint

SCHEMA_VERSION = "1"

_PHYS_FIELDS = [f.name for f in dataclasses.fields(PhysParams)]


def _fmt(x) -> str:
    """Shortest round-trip decimal representation."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config file must hold a JSON object")
    return cfg


def _resolve_params(args: argparse.Namespace, cfg: dict) -> PhysParams:
    """Defaults < config file < command-line flags."""
    kwargs = {k: v for k, v in cfg.items() if k in _PHYS_FIELDS}
    for name in _PHYS_FIELDS:
        val = getattr(args, name, None)
        if val is not None:
            kwargs[name] = val
    return PhysParams(**kwargs)


def _resolve_opt(args: argparse.Namespace, cfg: dict, name: str, default):
    val = getattr(args, name, None)
    if val is not None:
        return val
    if name in cfg:
        return cfg[name]
    if default is None:
        raise ConfigInvalid(f"missing required option --{name.replace('_', '-')}")
    return default


def _config_echo(p: PhysParams, command: str, extra: dict) -> dict:
    out = {"command": command, "schema": SCHEMA_VERSION,
           "version": __version__}
    out.update(p.to_dict())
    out.update(extra)
    return out


def _emit_json(payload: dict, config: dict, out_path: str | None) -> None:
    doc = {"config": config}
    doc.update(payload)
    text = json.dumps(doc, indent=2, sort_keys=True, default=float)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _emit_csv(header: str, rows, config: dict, out_path: str | None) -> None:
    lines = ["# config: " + json.dumps(config, sort_keys=True, default=float),
             header]
    lines.extend(",".join(_fmt(c) for c in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_point(text: str) -> tuple[float, float]:
    try:
        u_s, pu_s = text.split(",")
        return float(u_s), float(pu_s)
    except ValueError as exc:
        raise ConfigInvalid(f"--point expects 'u,pu', got {text!r}") from exc


def _default_fixed_seed(ell: float, p: PhysParams) -> SectionPoint:
    """Seed the fixed-point Newton from the brake orbit's exit geometry."""
    sol = brake_mod.solve_brake(ell, p)
    return SectionPoint(np.sqrt(sol.xiE), -sol.puE, ell)


# ---------------------------------------------------------------------------
# diagnostics used by both the CLI and the test suite
# ---------------------------------------------------------------------------

def _sample_outcomes(ell: float, p: PhysParams, rng: np.random.Generator,
                     n_needed: int, u_lo: float = 1200.0,
                     u_hi: float = 3580.0, pu_amp: float = 3.0):
    """Yield Returned map outcomes with their crossing-event logs."""
    got = 0
    for _ in range(50 * n_needed):
        if got >= n_needed:
            return
        q = SectionPoint(rng.uniform(u_lo, u_hi),
                         rng.uniform(-pu_amp, pu_amp), ell)
        if ssmap.forbidden_class(q, p) != "admissible":
            continue
        out = ssmap.apply(q, p)
        if out.kind is not ssmap.OutcomeKind.Returned or not out.events:
            continue
        got += 1
        yield out


def _laplace_lenz_kepler_ld(s: core.ParabolicState, p: PhysParams) -> np.longdouble:
    """L_k in extended precision: the leap is ~1e-9 of L_k itself, so a
    double-precision evaluation would bury the comparison in its own
    rounding error."""
    u, v = np.longdouble(s.u), np.longdouble(s.v)
    pu, pv = np.longdouble(s.pu), np.longdouble(s.pv)
    rho = u * u + v * v
    return (pu * pu * v * v - pv * pv * u * u) / (2.0 * rho) \
        + np.longdouble(p.mu) * (u * u - v * v) / rho


def run_leaps_check(ell: float, p: PhysParams, seed: int = 0,
                    min_crossings: int = 100) -> dict:
    """Verify the crossing leap formulas on pseudo-random trajectories.

    Checks delta_ell = +-f R^2 / 2 (Kepler-leg invariant against the
    Stark-leg constant) and |delta_h| = f (u^2 - R^2/u^2)/2 at every
    detected crossing, and that L_s is restored on each Stark leg.
    """
    rng = np.random.default_rng(seed)
    # the leap formulas hold exactly on uv = +-R; locate crossings tightly
    # so the event-location error stays below the 1e-9 comparison level
    p = dataclasses.replace(p, event_tol_factor=1e-13)
    n_cross = 0
    max_ell_err = 0.0
    max_h_err = 0.0
    max_restore = 0.0
    leap_ell = p.f * p.R ** 2 / 2.0
    ell_ld = np.longdouble(ell)
    for out in _sample_outcomes(ell, p, rng, 4 * min_crossings):
        for ev in out.events:
            n_cross += 1
            # Kepler-leg invariant sits exactly one leap above the
            # Stark-leg constant; the crossing direction only sets which
            # of the two is "before".
            delta = float(_laplace_lenz_kepler_ld(ev.state, p) - ell_ld)
            max_ell_err = max(max_ell_err, abs(delta - leap_ell) / leap_ell)
            ub2 = ev.state.u ** 2
            pred = p.f * abs(ub2 - p.R ** 2 / ub2) / 2.0
            max_h_err = max(max_h_err, abs(abs(ev.delta_h) - pred) / pred)
            if ev.regime_after is RegimeKind.Stark:
                ls = core.laplace_lenz_stark(ev.state, p)
                max_restore = max(max_restore, abs(ls - ell) / max(abs(ell), 1.0))
        if n_cross >= min_crossings:
            break
    return {"n_crossings": n_cross, "max_delta_ell_rel_err": max_ell_err,
            "max_delta_h_rel_err": max_h_err,
            "max_ell_restore_rel_err": max_restore}


def _normalize_entry(s: core.ParabolicState):
    """Map a strip-entry state onto the u > sqrt(R), uv = -R chart.

    Uses the two exact symmetries of both flows: the double cover
    (u, v, pu, pv) -> -(u, v, pu, pv) and the y-reflection
    (u, v, pu, pv) -> (u, -v, pu, -pv).
    """
    cover = -1.0 if s.u < 0.0 else 1.0
    reflect = -1.0 if s.u * s.v > 0.0 else 1.0

    def apply(st: core.ParabolicState) -> core.ParabolicState:
        return core.ParabolicState(
            pu=cover * st.pu, pv=cover * reflect * st.pv,
            u=cover * st.u, v=cover * reflect * st.v,
            tau=st.tau, t=st.t)

    return apply


def run_transit_check(ell: float, p: PhysParams, seed: int = 0,
                      n_entries: int = 100) -> dict:
    """Compare analytic Kepler transits against event-detected flow."""
    rng = np.random.default_rng(seed)
    n_done = 0
    max_rel = 0.0
    max_resid = 0.0
    for out in _sample_outcomes(ell, p, rng, 4 * n_entries):
        evs = out.events
        for k in range(len(evs) - 1):
            if evs[k].regime_after is not RegimeKind.Kepler:
                continue
            chart = _normalize_entry(evs[k].state)
            entry = chart(evs[k].state)
            exit_num = chart(evs[k + 1].state)
            try:
                exit_an = propagate.kepler_transit_analytic(entry, p)
            except SunShadowError:
                continue
            num = np.array([exit_num.pu, exit_num.pv, exit_num.u, exit_num.v])
            ana = np.array([exit_an.pu, exit_an.pv, exit_an.u, exit_an.v])
            scale = np.maximum(np.abs(num), 1.0)
            max_rel = max(max_rel, float(np.max(np.abs(num - ana) / scale)))
            max_resid = max(max_resid,
                            propagate.polynomial_residual(exit_an, entry, p))
            n_done += 1
        if n_done >= n_entries:
            break
    return {"n_entries": n_done, "max_rel_err": max_rel,
            "max_scaled_residual": max_resid}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_classify(args, cfg, p):
    ell = _resolve_opt(args, cfg, "ell", None)
    hs = _resolve_opt(args, cfg, "hs", None)
    rc = stark.classify(ell, hs, p)
    qs = stark.quartic_structure(ell, hs, p)
    payload = {
        "region": rc.label.value,
        "bounded_u_branch": rc.bounded_u_branch_exists,
        "xi_roots": [[qs.xi1.real, qs.xi1.imag], [qs.xi2.real, qs.xi2.imag]],
        "eta_roots": [[qs.eta1.real, qs.eta1.imag], [qs.eta2.real, qs.eta2.imag]],
        "xi_real": qs.xi_real,
        "eta_real": qs.eta_real,
    }
    payload["summary"] = (
        f"region {rc.label.value}: "
        f"xi {'real' if qs.xi_real else 'complex'}, "
        f"eta {'real' if qs.eta_real else 'complex'}; "
        f"bounded u-branch: {rc.bounded_u_branch_exists}")
    _emit_json(payload, _config_echo(p, "classify",
                                     {"ell": ell, "hs": hs}), args.out)
    return 0


def _cmd_periods(args, cfg, p):
    ell = _resolve_opt(args, cfg, "ell", None)
    hs = _resolve_opt(args, cfg, "hs", None)
    t_u, t_v = stark.periods(ell, hs, p)
    payload = {"T_u": t_u, "T_v": t_v, "ratio": t_v / t_u}
    _emit_json(payload, _config_echo(p, "periods", {"ell": ell, "hs": hs}),
               args.out)
    return 0


def _cmd_zvp(args, cfg, p):
    ell = _resolve_opt(args, cfg, "ell", None)
    hs = _resolve_opt(args, cfg, "hs", None)
    pts = stark.zero_velocity_points(ell, hs, p)
    payload = {"points_uv": [list(q) for q in pts]}
    _emit_json(payload, _config_echo(p, "zvp", {"ell": ell, "hs": hs}),
               args.out)
    return 0


def _cmd_brake(args, cfg, p):
    ell = _resolve_opt(args, cfg, "ell", None)
    sol = brake_mod.solve_brake(ell, p)
    payload = {"solution": sol.to_dict(),
               "hs_bar": brake_mod.hs_bar(ell, p),
               "ell_window": list(brake_mod.ell_window(p))}
    _emit_json(payload, _config_echo(p, "brake", {"ell": ell}), args.out)
    return 0


def _cmd_fixed(args, cfg, p):
    ell = _resolve_opt(args, cfg, "ell", None)
    if args.point is not None:
        u, pu = _parse_point(args.point)
        seed = SectionPoint(u, pu, ell)
    else:
        seed = _default_fixed_seed(ell, p)
    fp = ssmap.find_fixed_point(seed, p)
    img = ssmap.apply(fp, p)
    resid = float(np.linalg.norm(img.point.as_array() - fp.as_array()))
    J = ssmap.jacobian(fp, p)
    lam, V = ssmap.eigen2(J)
    payload = {
        "fixed_point": {"u": fp.u, "pu": fp.pu, "ell_s": ell},
        "residual": resid,
        "jacobian": J.tolist(),
        "eigenvalues": [float(lam[0].real), float(lam[1].real)],
        "eigenvectors": V.real.T.tolist(),
    }
    _emit_json(payload, _config_echo(p, "fixed", {"ell": ell}), args.out)
    return 0


def _cmd_jacobian(args, cfg, p):
    ell = _resolve_opt(args, cfg, "ell", None)
    u, pu = _parse_point(_resolve_opt(args, cfg, "point", None))
    q = SectionPoint(u, pu, ell)
    J = ssmap.jacobian(q, p, method=args.method)
    lam, _ = ssmap.eigen2(J)
    payload = {"point": {"u": u, "pu": pu, "ell_s": ell},
               "method": args.method,
               "jacobian": J.tolist(),
               "eigenvalues_real": [float(z.real) for z in lam],
               "eigenvalues_imag": [float(z.imag) for z in lam]}
    _emit_json(payload, _config_echo(p, "jacobian",
                                     {"ell": ell, "point": [u, pu]}), args.out)
    return 0


def _cmd_scan(args, cfg, p):
    ell = _resolve_opt(args, cfg, "ell", None)
    grid = ssmap.scan_domain((args.umin, args.umax), (args.pumin, args.pumax),
                             args.nx, args.ny, ell, p)
    rows = []
    for i in range(len(grid["u"])):
        w = grid["winding"][i] if grid["cls"][i] == "D" else ""
        rows.append((grid["u"][i], grid["pu"][i], grid["cls"][i], w))
    extra = {"ell": ell, "umin": args.umin, "umax": args.umax,
             "pumin": args.pumin, "pumax": args.pumax,
             "nx": args.nx, "ny": args.ny}
    _emit_csv("u,pu,class,winding", rows, _config_echo(p, "scan", extra),
              args.out)
    return 0


def _cmd_iterate(args, cfg, p):
    ell = _resolve_opt(args, cfg, "ell", None)
    u, pu = _parse_point(_resolve_opt(args, cfg, "point", None))
    q = SectionPoint(u, pu, ell)
    rows = [(0, q.u, q.pu)]
    for k in range(1, args.n + 1):
        out = ssmap.apply(q, p)
        if out.kind is not ssmap.OutcomeKind.Returned:
            print(f"orbit left the domain at iterate {k}: {out.kind.value}",
                  file=sys.stderr)
            break
        q = out.point
        rows.append((k, q.u, q.pu))
    extra = {"ell": ell, "point": [u, pu], "n": args.n}
    _emit_csv("idx,u,pu", rows, _config_echo(p, "iterate", extra), args.out)
    return 0


def _cmd_area(args, cfg, p):
    ell = _resolve_opt(args, cfg, "ell", None)
    uc = _resolve_opt(args, cfg, "uc", 1250.0)
    rc = _resolve_opt(args, cfg, "rc", 250.0)
    c = _resolve_opt(args, cfg, "c", 1.0)
    m = int(_resolve_opt(args, cfg, "m", 200000))
    res = ssmap.area_experiment(uc, rc, c, m, ell, p)
    extra = {"ell": ell, "uc": uc, "rc": rc, "c": c, "m": m}
    _emit_json(res, _config_echo(p, "area", extra), args.out)
    return 0


def _cmd_manifold(args, cfg, p):
    ell = _resolve_opt(args, cfg, "ell", None)
    if args.point is not None:
        u, pu = _parse_point(args.point)
        seed = SectionPoint(u, pu, ell)
    else:
        seed = _default_fixed_seed(ell, p)
    fp = ssmap.find_fixed_point(seed, p)
    sign = "+" if args.dir >= 0 else "-"
    branch = manifolds.grow_branch(fp, sign + args.which, args.gens, p,
                                   horizon=args.horizon,
                                   samples=args.samples,
                                   correct=not args.no_correct)
    rows = []
    for prim in branch.primaries:
        for ci, comp in enumerate(prim.components):
            for idx, (uu, ppu) in enumerate(comp):
                rows.append((prim.generation, ci, idx, uu, ppu))
    extra = {"ell": ell, "which": args.which, "dir": args.dir,
             "gens": args.gens, "fixed_point": [fp.u, fp.pu],
             "horizon": args.horizon, "samples": args.samples}
    _emit_csv("gen,comp,idx,u,pu", rows, _config_echo(p, "manifold", extra),
              args.out)
    return 0


def _cmd_transit_check(args, cfg, p):
    ell = _resolve_opt(args, cfg, "ell", None)
    res = run_transit_check(ell, p, seed=args.seed, n_entries=args.n)
    _emit_json(res, _config_echo(p, "transit-check",
                                 {"ell": ell, "n": args.n, "seed": args.seed}),
               args.out)
    return 0


def _cmd_leaps_check(args, cfg, p):
    ell = _resolve_opt(args, cfg, "ell", None)
    res = run_leaps_check(ell, p, seed=args.seed, min_crossings=args.n)
    _emit_json(res, _config_echo(p, "leaps-check",
                                 {"ell": ell, "n": args.n, "seed": args.seed}),
               args.out)
    return 0


_COMMANDS = {
    "classify": _cmd_classify,
    "periods": _cmd_periods,
    "zvp": _cmd_zvp,
    "brake": _cmd_brake,
    "fixed": _cmd_fixed,
    "jacobian": _cmd_jacobian,
    "scan": _cmd_scan,
    "iterate": _cmd_iterate,
    "area": _cmd_area,
    "manifold": _cmd_manifold,
    "transit-check": _cmd_transit_check,
    "leaps-check": _cmd_leaps_check,
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--jobs", type=int,
                        help="cap worker threads for scans/manifolds")
    common.add_argument("--seed", type=int, default=0,
                        help="seed for pseudo-random suites")
    common.add_argument("--ell", type=float, help="L_s value, km^3/s^2")
    common.add_argument("--mu", type=float)
    common.add_argument("--f", type=float)
    common.add_argument("--R", type=float)
    common.add_argument("--r-escape", dest="r_escape", type=float)
    common.add_argument("--tau-budget", dest="tau_budget", type=float)
    common.add_argument("--switch-budget", dest="switch_budget", type=int)
    common.add_argument("--steps-per-period", dest="steps_per_period", type=int)
    common.add_argument("--tol-abs", dest="tol_abs", type=float)
    common.add_argument("--tol-rel", dest="tol_rel", type=float)

    ap = argparse.ArgumentParser(
        prog="ssmap",
        description="Sun-shadow hybrid dynamics: Stark/Kepler flows, the "
                    "shadow-boundary return map, and its analysis datasets.")
    ap.add_argument("--version", action="version",
                    version=f"ssmap {__version__} (schema {SCHEMA_VERSION})")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("classify", parents=[common],
                        help="Stark-orbit region of (ell, hs)")
    sp.add_argument("--hs", type=float)
    sp = sub.add_parser("periods", parents=[common],
                        help="AGM periods T_u, T_v")
    sp.add_argument("--hs", type=float)
    sp = sub.add_parser("zvp", parents=[common],
                        help="zero-velocity points of the Stark flow")
    sp.add_argument("--hs", type=float)
    sub.add_parser("brake", parents=[common],
                   help="solve the brake-orbit existence problem")
    sp = sub.add_parser("fixed", parents=[common],
                        help="hyperbolic fixed point of the map")
    sp.add_argument("--point", help="Newton seed 'u,pu' (default: from brake)")
    sp = sub.add_parser("jacobian", parents=[common],
                        help="map Jacobian at a section point")
    sp.add_argument("--point", help="'u,pu'")
    sp.add_argument("--method", default="variational",
                    choices=["variational", "finite-difference"])
    sp = sub.add_parser("scan", parents=[common],
                        help="classify a rectangular (u, pu) grid")
    sp.add_argument("--umin", type=float, required=True)
    sp.add_argument("--umax", type=float, required=True)
    sp.add_argument("--pumin", type=float, required=True)
    sp.add_argument("--pumax", type=float, required=True)
    sp.add_argument("--nx", type=int, required=True)
    sp.add_argument("--ny", type=int, required=True)
    sp = sub.add_parser("iterate", parents=[common],
                        help="iterate the map from one point")
    sp.add_argument("--point", help="'u,pu'")
    sp.add_argument("--n", type=int, default=1000)
    sp = sub.add_parser("area", parents=[common],
                        help="loop-area non-preservation experiment")
    sp.add_argument("--uc", type=float)
    sp.add_argument("--rc", type=float)
    sp.add_argument("--c", type=float)
    sp.add_argument("--m", type=int)
    sp = sub.add_parser("manifold", parents=[common],
                        help="grow an invariant-manifold branch")
    sp.add_argument("--which", default="unstable",
                    choices=["stable", "unstable"])
    sp.add_argument("--dir", type=int, default=+1, choices=[-1, 1])
    sp.add_argument("--gens", type=int, default=4)
    sp.add_argument("--point", help="fixed-point seed 'u,pu'")
    sp.add_argument("--horizon", type=int, default=3)
    sp.add_argument("--samples", type=int, default=5)
    sp.add_argument("--no-correct", action="store_true")
    sp = sub.add_parser("transit-check", parents=[common],
                        help="analytic vs numeric Kepler transits")
    sp.add_argument("--n", type=int, default=100)
    sp = sub.add_parser("leaps-check", parents=[common],
                        help="verify crossing leap formulas")
    sp.add_argument("--n", type=int, default=100)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _load_config(getattr(args, "config", None))
        if getattr(args, "jobs", None):
            import numba
            numba.set_num_threads(max(1, args.jobs))
        p = _resolve_params(args, cfg)
        return _COMMANDS[args.command](args, cfg, p)
    except ConfigInvalid as exc:
        print(f"ssmap: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except SunShadowError as exc:
        print(f"ssmap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
