"""Time stepping for the axisymmetric curvature flow.

Every node of the generating profile moves by -f(H) along the outward
normal (rotated into the profile plane); poles move along the axis
only.  Time integration is explicit midpoint RK2 with the parabolic
stability bound dt = cfl * ds_min^2 / max f'(H), since f'(H) is the
effective diffusivity of the quasilinear operator.  Mesh quality is
maintained by periodic resampling to uniform arclength, which is purely
tangential and does not move the evolving set.

The per-step kernel duplicates the curvature formulas of
geometry.principal_curvatures in loop form so numba can compile the hot
path; the two implementations are asserted against each other in the
test suite.  Without numba the numpy fallback is used automatically.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import pinching
from .errors import ConvexityLostError, StepTooSmallError
from .geometry import (
    AxiSurface,
    PlanarCurve,
    curvatures,
    redistribute,
    write_snapshot,
)
from .speed import SpeedParams

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrapper(fn):
            return fn

        return wrapper


TRACE_HEADER = ["t", "dt", "H_min", "H_max", "A2_max", "gamma_min", "gsigma_max", "area", "volume"]


@njit(cache=True)
def _stage_kernel(rho, z, alpha, h0):
    """Curvature and speed of one profile state, loop form.

    Returns (speed_over_m, zx, rhox, stats) where stats packs the
    scalar reductions: [m_min, m_max, fp_max, H_min, H_max, A2_max,
    gamma_min, K_min_sign, area, volume, lam_min].
    """
    n = rho.shape[0]
    zx = np.empty(n)
    rhox = np.empty(n)
    m = np.empty(n)
    lam1 = np.empty(n)
    lam2 = np.empty(n)
    for i in range(n):
        if i == 0:
            rx = rho[1]
            rxx = 0.0
            zxv = 0.0
            zxx = 2.0 * (z[1] - z[0])
        elif i == n - 1:
            rx = -rho[n - 2]
            rxx = 0.0
            zxv = 0.0
            zxx = 2.0 * (z[n - 2] - z[n - 1])
        else:
            rx = 0.5 * (rho[i + 1] - rho[i - 1])
            rxx = rho[i + 1] - 2.0 * rho[i] + rho[i - 1]
            zxv = 0.5 * (z[i + 1] - z[i - 1])
            zxx = z[i + 1] - 2.0 * z[i] + z[i - 1]
        mi = math.sqrt(rx * rx + zxv * zxv)
        zx[i] = zxv
        rhox[i] = rx
        m[i] = mi
        lam1[i] = (rx * zxx - zxv * rxx) / (mi * mi * mi)
    for i in range(1, n - 1):
        lam2[i] = zx[i] / (rho[i] * m[i])
    lam2[0] = (4.0 * lam2[1] - lam2[2]) / 3.0
    lam2[n - 1] = (4.0 * lam2[n - 2] - lam2[n - 3]) / 3.0

    speed_over_m = np.empty(n)
    m_min = 1e300
    m_max = 0.0
    fp_max = 0.0
    h_min = 1e300
    h_max = -1e300
    a2_max = 0.0
    gamma_min = 1e300
    lam_min = 1e300
    area = 0.0
    volume = 0.0
    for i in range(n):
        l1 = lam1[i]
        l2 = lam2[i]
        if l1 < lam_min:
            lam_min = l1
        if l2 < lam_min:
            lam_min = l2
        h = l1 + l2
        if h < h_min:
            h_min = h
        if h > h_max:
            h_max = h
        a2 = l1 * l1 + l2 * l2
        if a2 > a2_max:
            a2_max = a2
        if h > 0.0:
            gm = l1 * l2 / (h * h)
            if gm < gamma_min:
                gamma_min = gm
        mi = m[i]
        if mi < m_min:
            m_min = mi
        if mi > m_max:
            m_max = mi
        area += rho[i] * mi
        volume += rho[i] * rho[i] * zx[i]
        hh = h + h0
        if hh <= 0.0:
            speed_over_m[i] = 0.0
            continue
        if alpha == 0.0:
            f = h
            fp = 1.0
        else:
            lg = math.log(hh)
            la = lg ** (alpha - 1.0)
            f = h * la * lg
            fp = la * (lg + alpha * h / hh)
        speed_over_m[i] = f / mi
        if fp > fp_max:
            fp_max = fp
    area *= 2.0 * math.pi
    volume = abs(volume) * math.pi
    stats = np.array(
        [m_min, m_max, fp_max, h_min, h_max, a2_max, gamma_min, 0.0, area, volume, lam_min]
    )
    return speed_over_m, zx, rhox, stats


def _stage_numpy(rho, z, alpha, h0):
    """Numpy fallback with the same contract as _stage_kernel."""
    n = rho.shape[0]
    zx = np.empty(n)
    rhox = np.empty(n)
    zx[1:-1] = 0.5 * (z[2:] - z[:-2])
    zx[0] = zx[-1] = 0.0
    rhox[1:-1] = 0.5 * (rho[2:] - rho[:-2])
    rhox[0] = rho[1]
    rhox[-1] = -rho[-2]
    zxx = np.empty(n)
    rhoxx = np.empty(n)
    zxx[1:-1] = z[2:] - 2.0 * z[1:-1] + z[:-2]
    zxx[0] = 2.0 * (z[1] - z[0])
    zxx[-1] = 2.0 * (z[-2] - z[-1])
    rhoxx[1:-1] = rho[2:] - 2.0 * rho[1:-1] + rho[:-2]
    rhoxx[0] = rhoxx[-1] = 0.0
    m = np.hypot(rhox, zx)
    lam1 = (rhox * zxx - zx * rhoxx) / m**3
    lam2 = np.empty(n)
    lam2[1:-1] = zx[1:-1] / (rho[1:-1] * m[1:-1])
    lam2[0] = (4.0 * lam2[1] - lam2[2]) / 3.0
    lam2[-1] = (4.0 * lam2[-2] - lam2[-3]) / 3.0
    h = lam1 + lam2
    hh = h + h0
    bad = hh <= 0.0
    hh_safe = np.where(bad, 1.0, hh)
    if alpha == 0.0:
        f = h.copy()
        fp = np.ones_like(h)
    else:
        lg = np.log(hh_safe)
        la = lg ** (alpha - 1.0)
        f = h * la * lg
        fp = la * (lg + alpha * h / hh_safe)
    f[bad] = 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(h > 0, lam1 * lam2 / (h * h), np.inf)
    stats = np.array(
        [
            m.min(),
            m.max(),
            fp.max(),
            h.min(),
            h.max(),
            (lam1**2 + lam2**2).max(),
            gamma.min(),
            0.0,
            2.0 * math.pi * np.sum(rho * m),
            abs(np.pi * np.sum(rho * rho * zx)),
            min(lam1.min(), lam2.min()),
        ]
    )
    return f / m, zx, rhox, stats


_stage = _stage_kernel if HAVE_NUMBA else _stage_numpy

# stats indices
_MMIN, _MMAX, _FPMAX, _HMIN, _HMAX, _A2MAX, _GMIN, _, _AREA, _VOL, _LAMMIN = range(11)


@dataclass
class FlowConfig:
    speed: SpeedParams
    cfl: float = 0.2
    h_stop: float = 1e3
    dt_min: float = 1e-14
    t_stop: float | None = None
    snapshot_every: float | None = None
    snapshot_hmax_factor: float | None = 1.25
    redistribute_every: int = 5
    sigma: float | None = None  # weight exponent for the gsigma trace column
    max_steps: int = 20_000_000

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must be in (0, 1]")
        if self.dt_min <= 0.0:
            raise ValueError("dt_min must be positive")
        if self.h_stop <= 0.0:
            raise ValueError("h_stop must be positive")
        if self.redistribute_every < 1:
            raise ValueError("redistribute_every must be >= 1")

    def resolved_sigma(self) -> float:
        """Configured sigma, or the certified auto value for this speed."""
        if self.sigma is not None:
            return self.sigma
        if self.speed.alpha == 0.0:
            return 0.0
        return pinching.auto_constants(2, self.speed.alpha).sigma


@dataclass
class FlowTrace:
    """Per-step time series of the monitored quantities."""

    t: np.ndarray
    dt: np.ndarray
    H_min: np.ndarray
    H_max: np.ndarray
    A2_max: np.ndarray
    gamma_min: np.ndarray
    gsigma_max: np.ndarray
    area: np.ndarray
    volume: np.ndarray
    sigma: float = 0.0
    ds0: float = 0.0  # initial mean node spacing, for tolerance models
    meta: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.t.size

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_HEADER)
            cols = [getattr(self, name) for name in TRACE_HEADER]
            for row in zip(*cols):
                w.writerow([format(v, ".17g") for v in row])

    @classmethod
    def read_csv(cls, path, sigma=0.0, ds0=0.0):
        data = np.genfromtxt(path, delimiter=",", names=True)
        cols = {name: np.atleast_1d(data[name]) for name in TRACE_HEADER}
        return cls(sigma=sigma, ds0=ds0, **cols)


@dataclass
class FlowResult:
    trace: FlowTrace
    surface: AxiSurface
    reason: str
    snapshots: list

    def summary(self) -> dict:
        tr = self.trace
        return {
            "termination_reason": self.reason,
            "t_final": float(tr.t[-1]),
            "steps": int(tr.n_rows),
            "H_min_final": float(tr.H_min[-1]),
            "H_max_final": float(tr.H_max[-1]),
            "gamma_min_final": float(tr.gamma_min[-1]),
            "gsigma_max_final": float(tr.gsigma_max[-1]),
            "sigma": tr.sigma,
            "ds0": tr.ds0,
            **tr.meta,
        }


def _advance(rho, z, w, zx, rhox):
    """Displace by w = f * dt / m along the outward normal (zx, -rhox)/m."""
    new_rho = rho - w * zx
    new_z = z + w * rhox
    new_rho[0] = 0.0
    new_rho[-1] = 0.0
    return new_rho, new_z


def _rk2(rho, z, p: SpeedParams, dt, stage=None):
    """One midpoint step from (rho, z); returns arrays + midpoint stats.

    stage is the cached _stage output for (rho, z), when the caller
    already evaluated it (the run loop does, for the trace row).
    """
    sm, zx, rhox, stats = _stage(rho, z, p.alpha, p.h0) if stage is None else stage
    mid_rho, mid_z = _advance(rho, z, 0.5 * dt * sm, zx, rhox)
    sm2, zx2, rhox2, stats2 = _stage(mid_rho, mid_z, p.alpha, p.h0)
    if stats2[_LAMMIN] <= 0.0:
        return None, None, stats2
    new_rho, new_z = _advance(rho, z, dt * sm2, zx2, rhox2)
    return new_rho, new_z, stats2


def step(surface: AxiSurface, cfg: FlowConfig, dt: float | None = None):
    """One RK2 midpoint step; returns (new surface, dt used).

    Raises StepTooSmallError if the stable step falls below cfg.dt_min
    and ConvexityLostError if a principal curvature goes nonpositive.
    """
    p = cfg.speed
    sm, zx, rhox, stats = _stage(surface.rho, surface.z, p.alpha, p.h0)
    if stats[_LAMMIN] <= 0.0:
        raise ConvexityLostError("surface is not strictly convex")
    if dt is None:
        dt = cfg.cfl * stats[_MMIN] ** 2 / stats[_FPMAX]
        if dt < cfg.dt_min:
            raise StepTooSmallError(f"stable dt {dt:.3e} fell below dt_min {cfg.dt_min:.3e}")
    new_rho, new_z, stats2 = _rk2(surface.rho, surface.z, p, dt, stage=(sm, zx, rhox, stats))
    if new_rho is None:
        raise ConvexityLostError("convexity lost at midpoint stage")
    _, _, _, stats3 = _stage(new_rho, new_z, p.alpha, p.h0)
    if stats3[_LAMMIN] <= 0.0:
        raise ConvexityLostError("convexity lost after step")
    out = AxiSurface(new_rho, new_z, surface.time + dt)
    out.validate()
    return out, dt


def euler_substep(surface: AxiSurface, p: SpeedParams, dt: float) -> AxiSurface:
    """Single forward Euler displacement with matched nodes.

    Used by the residual checks: no redistribution, no smoothing, so
    node identity is meaningful between the two snapshots.
    """
    sm, zx, rhox, _ = _stage(surface.rho, surface.z, p.alpha, p.h0)
    rho, z = _advance(surface.rho, surface.z, dt * sm, zx, rhox)
    return AxiSurface(rho, z, surface.time + dt)


def run(surface: AxiSurface, cfg: FlowConfig, out_dir=None) -> FlowResult:
    """Advance the surface until H_max >= h_stop (or t_stop / max_steps).

    Appends one trace row per step, resamples the mesh every
    cfg.redistribute_every steps when it has drifted from uniform, and
    collects profile snapshots on the configured flow-time cadence
    and/or whenever H_max has grown by snapshot_hmax_factor since the
    last snapshot (the geometric cadence is what resolves the approach
    to the blowup time).
    """
    surface = surface.copy()
    surface.validate()
    p = cfg.speed
    sigma = cfg.resolved_sigma()
    rows = []
    snapshots = []
    ds0 = float(surface.segment_lengths().mean())
    out_paths = [] if out_dir is not None else None
    if out_dir is not None:
        os.makedirs(os.path.join(out_dir, "snapshots"), exist_ok=True)

    rho, z = surface.rho.copy(), surface.z.copy()
    t = surface.time

    def make_surface():
        return AxiSurface(rho.copy(), z.copy(), t)

    def make_trace():
        arr = np.array(rows, dtype=float).reshape(-1, len(TRACE_HEADER))
        return FlowTrace(
            *[arr[:, i].copy() for i in range(len(TRACE_HEADER))],
            sigma=sigma,
            ds0=ds0,
            meta={
                "alpha": p.alpha,
                "h0": p.h0,
                "n_nodes": rho.size,
                "mcf_reference": p.is_mcf_reference,
            },
        )

    def snapshot(surf):
        snapshots.append(surf)
        if out_paths is not None:
            path = os.path.join(out_dir, "snapshots", f"snap_{len(out_paths):05d}.csv")
            write_snapshot(path, curvatures(surf))
            out_paths.append({"file": os.path.basename(path), "t": surf.time})

    sm, zx, rhox, stats = _stage(rho, z, p.alpha, p.h0)
    if stats[_LAMMIN] <= 0.0:
        raise ConvexityLostError("initial surface is not strictly convex")
    if cfg.h_stop <= stats[_HMAX]:
        raise ValueError("h_stop must exceed the initial H_max")

    next_snap_t = cfg.snapshot_every if cfg.snapshot_every is not None else np.inf
    next_snap_h = (
        stats[_HMAX] * cfg.snapshot_hmax_factor if cfg.snapshot_hmax_factor else np.inf
    )
    snapshot(make_surface())

    log_h0 = p.h0
    reason = "max_steps"
    n_since_redist = 0
    for _ in range(cfg.max_steps):
        dt = cfg.cfl * stats[_MMIN] ** 2 / stats[_FPMAX]
        if cfg.t_stop is not None and t + dt > cfg.t_stop:
            dt = cfg.t_stop - t
        if dt < cfg.dt_min:
            err = StepTooSmallError(f"stable dt {dt:.3e} below dt_min {cfg.dt_min:.3e}")
            err.trace = make_trace()
            raise err

        gsig_max = (0.25 - stats[_GMIN]) * math.log(stats[_HMAX] + log_h0) ** sigma
        rows.append(
            (
                t,
                dt,
                stats[_HMIN],
                stats[_HMAX],
                stats[_A2MAX],
                stats[_GMIN],
                gsig_max,
                stats[_AREA],
                stats[_VOL],
            )
        )

        new_rho, new_z, _ = _rk2(rho, z, p, dt, stage=(sm, zx, rhox, stats))
        if new_rho is None:
            err = ConvexityLostError("convexity lost during step (discretization failure)")
            err.trace = make_trace()
            raise err
        rho, z, t = new_rho, new_z, t + dt

        n_since_redist += 1
        if n_since_redist >= cfg.redistribute_every:
            n_since_redist = 0
            sm, zx, rhox, stats = _stage(rho, z, p.alpha, p.h0)
            if stats[_MMAX] > 1.005 * stats[_MMIN]:
                surf = redistribute(AxiSurface(rho, z, t))
                rho, z = surf.rho, surf.z
                sm, zx, rhox, stats = _stage(rho, z, p.alpha, p.h0)
        else:
            sm, zx, rhox, stats = _stage(rho, z, p.alpha, p.h0)

        if stats[_LAMMIN] <= 0.0:
            err = ConvexityLostError("convexity lost during step (discretization failure)")
            err.trace = make_trace()
            raise err

        if t >= next_snap_t or stats[_HMAX] >= next_snap_h:
            snapshot(make_surface())
            if t >= next_snap_t:
                next_snap_t += cfg.snapshot_every
            if cfg.snapshot_hmax_factor is not None:
                next_snap_h = stats[_HMAX] * cfg.snapshot_hmax_factor

        if stats[_HMAX] >= cfg.h_stop:
            reason = "h_stop"
            break
        if cfg.t_stop is not None and t >= cfg.t_stop * (1.0 - 1e-15):
            reason = "t_stop"
            break

    # terminal-state row, so the trace includes the state that triggered
    # termination (rows are otherwise appended before each step)
    gsig_max = (0.25 - stats[_GMIN]) * math.log(stats[_HMAX] + log_h0) ** sigma
    rows.append(
        (
            t,
            rows[-1][1] if rows else 0.0,
            stats[_HMIN],
            stats[_HMAX],
            stats[_A2MAX],
            stats[_GMIN],
            gsig_max,
            stats[_AREA],
            stats[_VOL],
        )
    )
    if snapshots[-1].time < t:
        snapshot(make_surface())
    trace = make_trace()
    result = FlowResult(trace=trace, surface=make_surface(), reason=reason, snapshots=snapshots)
    if out_dir is not None:
        trace.write_csv(os.path.join(out_dir, "trace.csv"))
        with open(os.path.join(out_dir, "snapshots.json"), "w") as fh:
            json.dump(out_paths, fh, indent=1, sort_keys=True)
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(result.summary(), fh, indent=1, sort_keys=True)
    return result


# ---------------------------------------------------------------------------
# planar curve driver (integrator validation against the n = 1 oracle)


def run_curve(curve: PlanarCurve, p: SpeedParams, cfl=0.2, kappa_stop=50.0, t_stop=None):
    """Shrink a closed convex plane curve under the same speed law.

    Minimal driver used to validate the explicit RK2 integrator against
    the shrinking-circle oracle; returns (final curve, times, kappa_max).
    """
    curve = PlanarCurve(curve.xy.copy(), curve.time)
    times, kmaxes = [], []
    for _ in range(10_000_000):
        kappa, nu = curve.curvature_normal()
        if kappa.min() <= 0.0:
            raise ConvexityLostError("curve lost convexity")
        times.append(curve.time)
        kmaxes.append(float(kappa.max()))
        if kmaxes[-1] >= kappa_stop:
            break
        dt = cfl * curve.min_spacing() ** 2 / p.deriv(kappa).max()
        if t_stop is not None:
            dt = min(dt, t_stop - curve.time)
            if dt <= 0.0:
                break
        mid = PlanarCurve(curve.xy - 0.5 * dt * p.value(kappa)[:, None] * nu, curve.time)
        kappa_m, nu_m = mid.curvature_normal()
        curve = PlanarCurve(
            curve.xy - dt * p.value(kappa_m)[:, None] * nu_m, curve.time + dt
        )
    return curve, np.array(times), np.array(kmaxes)
