"""Command-line entry point.

Subcommands:

  simulate     run the surface flow, write trace/snapshots/summary
  verify       residual ladders, recombination checks, monotonicity
               certificates; exit 4 if any certificate fails
  singularity  blowup analysis of a finished run directory; exit 5 if
               the run shows insufficient curvature growth
  oracle       radial reference solution (dense CSV + summary)
  constants    pinching constants pipeline and the sign audit

Configuration is a single JSON document; unknown keys are rejected so
typos surface as errors.  All outputs are deterministic for a fixed
config (sorted JSON keys, 17-significant-digit floats, no wall clock).

Exit codes: 0 ok, 1 bad config, 2 convexity lost, 3 time step below
dt_min, 4 failed verification certificate, 5 insufficient blowup.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import flow, geometry, identities, oracle, pinching, singularity
from .errors import (
    ConvexityLostError,
    InsufficientBlowupError,
    StepTooSmallError,
)
from .speed import SpeedParams


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "speed": {"alpha": 1.0, "h0": "e"},
    "geometry": {"kind": "sphere", "radius": 1.0, "a": 1.0, "c": 1.1, "path": None, "n_nodes": 256},
    "flow": {
        "cfl": 0.2,
        "h_stop": 1000.0,
        "dt_min": 1e-14,
        "t_stop": None,
        "snapshot_every": None,
        "snapshot_hmax_factor": 1.25,
        "redistribute_every": 5,
    },
    "pinching": {"C": "auto", "sigma": "auto", "tolerance_safety": 5.0, "n": 2},
    "singularity": {"bounded_ratio_tol": 0.2, "k_schedule": "auto", "roundness_threshold": 0.05},
    "oracle": {"tol": 1e-10},
    "verify": {
        "ladder_nodes": [129, 257, 513],
        "ladder_dts": [8e-3, 4e-3, 2e-3],
        "ladder_spheroid_c": 1.5,
        "run_n_nodes": 129,
        "run_h_stop": 100.0,
        "run_spheroid_c": 1.1,
    },
}


def _merge(section: str, user: dict) -> dict:
    base = dict(DEFAULTS[section])
    for key, val in user.items():
        if key not in base:
            raise ConfigError(f"{section}.{key}: unknown key")
        base[key] = val
    return base


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}:{err.colno}: invalid JSON ({err.msg})")
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a JSON object")
    cfg = {}
    for section in raw:
        if section not in DEFAULTS:
            raise ConfigError(f"{section}: unknown config section")
    for section in DEFAULTS:
        user = raw.get(section, {})
        if not isinstance(user, dict):
            raise ConfigError(f"{section}: must be a JSON object")
        cfg[section] = _merge(section, user)
    _validate(cfg)
    return cfg


def _require(cond, key, message):
    if not cond:
        raise ConfigError(f"{key}: {message}")


def _validate(cfg):
    sp = cfg["speed"]
    if sp["h0"] == "e":
        sp["h0"] = math.e
    _require(isinstance(sp["alpha"], (int, float)) and sp["alpha"] >= 0, "speed.alpha", "must be a number >= 0")
    _require(
        isinstance(sp["h0"], (int, float)) and sp["h0"] >= math.e * (1 - 1e-12),
        "speed.h0",
        f"must be >= e ({math.e})",
    )
    geo_c = cfg["geometry"]
    _require(geo_c["kind"] in ("sphere", "spheroid", "profile-file"), "geometry.kind",
             "must be sphere, spheroid, or profile-file")
    _require(int(geo_c["n_nodes"]) >= 8, "geometry.n_nodes", "must be an integer >= 8")
    if geo_c["kind"] == "sphere":
        _require(geo_c["radius"] > 0, "geometry.radius", "must be positive")
    if geo_c["kind"] == "spheroid":
        _require(geo_c["a"] > 0 and geo_c["c"] > 0, "geometry.a/geometry.c", "must be positive")
    if geo_c["kind"] == "profile-file":
        _require(geo_c["path"], "geometry.path", "required for profile-file geometry")
    fl = cfg["flow"]
    _require(0 < fl["cfl"] <= 1.0, "flow.cfl", "must be in (0, 1]")
    _require(fl["h_stop"] > 0, "flow.h_stop", "must be positive")
    _require(fl["dt_min"] > 0, "flow.dt_min", "must be positive")
    _require(int(fl["redistribute_every"]) >= 1, "flow.redistribute_every", "must be >= 1")
    pc = cfg["pinching"]
    _require(pc["C"] == "auto" or (isinstance(pc["C"], (int, float)) and pc["C"] > 0),
             "pinching.C", "must be 'auto' or a positive number")
    _require(pc["sigma"] == "auto" or (isinstance(pc["sigma"], (int, float)) and pc["sigma"] >= 0),
             "pinching.sigma", "must be 'auto' or a nonnegative number")
    _require(pc["tolerance_safety"] >= 0, "pinching.tolerance_safety", "must be >= 0")
    sg = cfg["singularity"]
    _require(sg["bounded_ratio_tol"] > 0, "singularity.bounded_ratio_tol", "must be positive")
    _require(sg["roundness_threshold"] > 0, "singularity.roundness_threshold", "must be positive")


def _speed(cfg) -> SpeedParams:
    return SpeedParams(alpha=float(cfg["speed"]["alpha"]), h0=float(cfg["speed"]["h0"]))


def _surface(cfg):
    g = cfg["geometry"]
    n = int(g["n_nodes"])
    if g["kind"] == "sphere":
        return geometry.sphere_profile(float(g["radius"]), n)
    if g["kind"] == "spheroid":
        return geometry.spheroid_profile(float(g["a"]), float(g["c"]), n)
    return geometry.read_profile_csv(g["path"])


def _resolve_constants(cfg, p: SpeedParams):
    """Pinching constants per config: 'auto' runs the constructive pipeline."""
    pc = cfg["pinching"]
    n = int(pc["n"])
    if p.alpha == 0.0:
        return None, 0.0
    consts = pinching.auto_constants(n, p.alpha)
    if pc["C"] != "auto":
        import dataclasses

        C = float(pc["C"])
        eps = pinching.epsilon_lower_bound(C, n, "sharp")
        feasible, _ = pinching.ratio_window_feasible(C, n, p.alpha)
        dgap = pinching.gap_comparison_constant(eps, n)
        consts = dataclasses.replace(
            consts, C=C, epsilon=eps, delta_gap=dgap, window_feasible=feasible,
            sigma=pinching.sigma_max(C, eps, dgap, p.alpha, n),
        )
    sigma = consts.sigma if pc["sigma"] == "auto" else float(pc["sigma"])
    return consts, sigma


def _flow_config(cfg, p: SpeedParams, sigma: float) -> flow.FlowConfig:
    fl = cfg["flow"]
    return flow.FlowConfig(
        speed=p,
        cfl=float(fl["cfl"]),
        h_stop=float(fl["h_stop"]),
        dt_min=float(fl["dt_min"]),
        t_stop=None if fl["t_stop"] is None else float(fl["t_stop"]),
        snapshot_every=None if fl["snapshot_every"] is None else float(fl["snapshot_every"]),
        snapshot_hmax_factor=(
            None if fl["snapshot_hmax_factor"] is None else float(fl["snapshot_hmax_factor"])
        ),
        redistribute_every=int(fl["redistribute_every"]),
        sigma=sigma,
    )


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _say(quiet, *args):
    if not quiet:
        print(*args)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg, out_dir, quiet=False) -> int:
    p = _speed(cfg)
    _, sigma = _resolve_constants(cfg, p)
    fcfg = _flow_config(cfg, p, sigma)
    surface = _surface(cfg)
    os.makedirs(out_dir, exist_ok=True)
    try:
        result = flow.run(surface, fcfg, out_dir=out_dir)
    except ConvexityLostError as err:
        if err.trace is not None:
            err.trace.write_csv(os.path.join(out_dir, "trace_partial.csv"))
        _say(quiet, f"convexity lost: {err}")
        return 2
    except StepTooSmallError as err:
        if err.trace is not None:
            err.trace.write_csv(os.path.join(out_dir, "trace_partial.csv"))
        _say(quiet, f"step too small: {err}")
        return 3
    _say(
        quiet,
        f"done: {result.reason} at t = {result.trace.t[-1]:.10g} "
        f"after {result.trace.n_rows} steps -> {out_dir}",
    )
    return 0


def cmd_verify(cfg, out_dir, quiet=False) -> int:
    p = _speed(cfg)
    consts, sigma = _resolve_constants(cfg, p)
    vc = cfg["verify"]
    os.makedirs(out_dir, exist_ok=True)
    report = {"passed": True}

    # residual refinement ladders and the snapshot-level identities
    builder = lambda n: geometry.spheroid_profile(1.0, float(vc["ladder_spheroid_c"]), n)
    nodes = [int(n) for n in vc["ladder_nodes"]]
    dts = [float(d) for d in vc["ladder_dts"]]
    ladders = []
    for eq in identities.EQUATIONS:
        rep_dt = identities.dt_ladder(eq, builder, p, nodes[-1], dts, sigma=sigma)
        rep_ds = identities.ds_ladder(eq, builder, p, nodes, dt0=dts[-1], sigma=sigma)
        ok = rep_dt.order >= 1.0 and rep_ds.order >= 1.8
        ladders.append({"dt": rep_dt.to_dict(), "ds": rep_ds.to_dict(), "passed": ok})
        report["passed"] = report["passed"] and ok
    report["ladders"] = ladders

    fld = geometry.curvatures(builder(nodes[-1]))
    gaps = {
        "gauss_recombination": identities.gauss_recombination_gap(fld, p),
        "quotient_rule": identities.quotient_rule_gap(fld, p),
        "weighted_recombination": identities.weighted_recombination_gap(fld, max(sigma, 1e-3), p),
    }
    gaps_ok = all(v <= 1e-10 for v in gaps.values())
    report["recombination_gaps"] = {**gaps, "passed": gaps_ok}
    report["passed"] = report["passed"] and gaps_ok

    # monotonicity certificates; tolerance model fit from exact-sphere
    # runs at the certified sigma (larger sigmas are adversarial inputs)
    n_run = int(vc["run_n_nodes"])
    h_stop = float(vc["run_h_stop"])
    sigma_fit = consts.sigma if consts is not None else 0.0
    sphere_traces = []
    for n in (max(n_run // 2 + 1, 33), n_run):
        for cfl in (cfg["flow"]["cfl"], 0.5 * cfg["flow"]["cfl"]):
            scfg = flow.FlowConfig(speed=p, cfl=cfl, h_stop=h_stop, sigma=sigma_fit)
            sphere_traces.append(flow.run(geometry.sphere_profile(1.0, n), scfg).trace)
    tol_model = pinching.fit_tolerance_model(
        sphere_traces, safety=float(cfg["pinching"]["tolerance_safety"])
    )

    run_cfg = flow.FlowConfig(
        speed=p, cfl=cfg["flow"]["cfl"], h_stop=h_stop, sigma=sigma
    )
    res = flow.run(
        geometry.spheroid_profile(1.0, float(vc["run_spheroid_c"]), n_run), run_cfg
    )
    if consts is not None:
        cert = pinching.certify_monotonicity(res.trace, consts, tol_model)
        report["certificate"] = cert.to_dict()
        if not cert.passed:
            viol_row = int(
                np.argmax(
                    np.maximum.accumulate(res.trace.gamma_min) - res.trace.gamma_min
                    + res.trace.gsigma_max - np.minimum.accumulate(res.trace.gsigma_max)
                )
            )
            report["certificate"]["violating_row"] = viol_row
            report["certificate"]["violating_time"] = float(res.trace.t[viol_row])
        report["passed"] = report["passed"] and cert.passed
        audit = pinching.sign_audit(consts, p)
        report["sign_audit"] = audit
        report["passed"] = report["passed"] and audit["pass"]

    gap = oracle.min_curvature_bound_gap(res.trace, 2)
    bound_ok = gap >= -5.0 * res.trace.ds0**2
    report["min_curvature_bound"] = {"worst_gap": gap, "passed": bound_ok}
    report["passed"] = report["passed"] and bound_ok

    scale = singularity.BlowupScale.for_speed(p)
    growth = oracle.max_curvature_growth_check(res.trace, scale, tol=1e-7)
    report["growth_inequality"] = growth
    report["passed"] = report["passed"] and growth["pass"]

    _write_json(os.path.join(out_dir, "verify_report.json"), report)
    _say(quiet, f"verify: {'PASS' if report['passed'] else 'FAIL'} -> {out_dir}/verify_report.json")
    return 0 if report["passed"] else 4


def cmd_singularity(cfg, run_dir, out_dir, quiet=False) -> int:
    summary_path = os.path.join(run_dir, "summary.json")
    if not os.path.exists(summary_path):
        raise ConfigError(f"{run_dir}: not a run directory (missing summary.json)")
    with open(summary_path) as fh:
        summary = json.load(fh)
    trace = flow.FlowTrace.read_csv(
        os.path.join(run_dir, "trace.csv"),
        sigma=summary.get("sigma", 0.0),
        ds0=summary.get("ds0", 0.0),
    )
    with open(os.path.join(run_dir, "snapshots.json")) as fh:
        snap_meta = json.load(fh)
    snapshots = []
    for row in snap_meta:
        surf = geometry.read_profile_csv(os.path.join(run_dir, "snapshots", row["file"]))
        surf.time = row["t"]
        snapshots.append(surf)

    p = SpeedParams(alpha=summary.get("alpha", cfg["speed"]["alpha"]),
                    h0=summary.get("h0", cfg["speed"]["h0"]))
    scale = singularity.BlowupScale.for_speed(p)
    sg = cfg["singularity"]
    os.makedirs(out_dir, exist_ok=True)
    try:
        ks = None if sg["k_schedule"] == "auto" else [int(k) for k in sg["k_schedule"]]
        report, rescaled = singularity.analyze(
            trace,
            snapshots,
            scale,
            bounded_ratio_tol=float(sg["bounded_ratio_tol"]),
            k_schedule=ks,
            roundness_threshold=float(sg["roundness_threshold"]),
        )
    except InsufficientBlowupError as err:
        _say(quiet, f"insufficient blowup: {err}")
        return 5
    report.to_json(os.path.join(out_dir, "singularity_report.json"))
    for rs in rescaled:
        fld = geometry.curvatures(rs.surface)
        geometry.write_snapshot(os.path.join(out_dir, f"rescaled_k{rs.k}.csv"), fld)
    _say(
        quiet,
        f"{report.classification}, T_est = {report.T_est:.10g}, "
        f"sphericity {'PASS' if report.verdict['pass'] else 'FAIL'} -> {out_dir}",
    )
    return 0


def cmd_oracle(cfg, out_dir, quiet=False) -> int:
    p = _speed(cfg)
    g = cfg["geometry"]
    r0 = float(g["radius"]) if g["kind"] == "sphere" else 1.0
    tol = float(cfg["oracle"]["tol"])
    sol = oracle.solve_sphere(r0, 2, p, tol=tol)
    os.makedirs(out_dir, exist_ok=True)
    sol.write_csv(os.path.join(out_dir, "oracle_dense.csv"))
    _write_json(
        os.path.join(out_dir, "oracle_summary.json"),
        {
            "r0": r0,
            "dim_n": 2,
            "alpha": p.alpha,
            "h0": p.h0,
            "tol": tol,
            "T_blowup": sol.T_blowup,
            "T_bound": r0**2 / 4.0,
        },
    )
    _say(quiet, f"T_blowup = {sol.T_blowup:.12g} -> {out_dir}")
    return 0


def cmd_constants(cfg, out_dir, quiet=False) -> int:
    p = _speed(cfg)
    if p.alpha == 0.0:
        raise ConfigError("speed.alpha: constants pipeline requires alpha > 0")
    consts, sigma = _resolve_constants(cfg, p)
    audit = pinching.sign_audit(consts, p) if consts.n == 2 else None
    os.makedirs(out_dir, exist_ok=True)
    payload = {
        "n": consts.n,
        "alpha": consts.alpha,
        "C": consts.C,
        "epsilon": consts.epsilon,
        "delta_window": consts.delta_window,
        "delta_gap": consts.delta_gap,
        "sigma_max": consts.sigma,
        "sigma_used": sigma,
        "window_feasible": consts.window_feasible,
        "sign_audit": audit,
    }
    _write_json(os.path.join(out_dir, "constants.json"), payload)
    _say(quiet, f"C = {consts.C:.12g}, sigma_max = {consts.sigma:.12g} -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logmcf",
        description="numerical laboratory for curvature flow with log-augmented speed",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="suppress stdout chatter")
    common.add_argument("--config", required=True, help="path to the JSON config")
    common.add_argument("--out", required=True, help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "verify", "oracle", "constants"):
        sub.add_parser(name, parents=[common])
    sp = sub.add_parser("singularity", parents=[common])
    sp.add_argument("--run", required=True, help="directory of a finished simulate run")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.quiet)
        if args.command == "verify":
            return cmd_verify(cfg, args.out, args.quiet)
        if args.command == "singularity":
            return cmd_singularity(cfg, args.run, args.out, args.quiet)
        if args.command == "oracle":
            return cmd_oracle(cfg, args.out, args.quiet)
        if args.command == "constants":
            return cmd_constants(cfg, args.out, args.quiet)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
