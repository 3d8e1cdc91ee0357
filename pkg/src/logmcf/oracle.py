"""High-accuracy scalar reference solutions.

A round sphere stays round under the flow, so its radius obeys the
scalar ODE dr/dt = -f(n/r).  The adaptive integration of that ODE is
the ground truth the surface solver is tested against, and its blowup
time anchors the singularity analysis tests.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .speed import SpeedParams

RADIUS_FLOOR = 1e-6  # integrate down to this fraction of r0


@dataclass
class SphereSolution:
    """Dense radial solution of a shrinking round sphere."""

    r0: float
    dim_n: int
    speed: SpeedParams
    t: np.ndarray
    r: np.ndarray
    T_blowup: float
    _dense: object = field(repr=False, default=None)

    def radius(self, times):
        """Radius at arbitrary times inside the integrated range."""
        times = np.asarray(times, dtype=float)
        if np.any(times < 0.0) or np.any(times > self.t[-1]):
            raise ValueError(f"time outside integrated range [0, {self.t[-1]}]")
        out = self._dense(np.atleast_1d(times))[0]
        return out if times.ndim else float(out[0])

    def mean_curvature(self, times):
        return self.dim_n / self.radius(times)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "r"])
            for ti, ri in zip(self.t, self.r):
                w.writerow([format(ti, ".17g"), format(ri, ".17g")])


def _remaining_time(r_end: float, n: int, p: SpeedParams) -> float:
    """Exact time from radius r_end to the blowup, by Gauss quadrature.

    dt = dr / f(n/r) makes the remaining time the proper integral of
    r / (n * ln(n/r + h0)^alpha) over (0, r_end]; the integrand vanishes
    at 0, so a fixed high-order rule on the interval is accurate far
    beyond the integral's tiny magnitude.
    """
    x, w = np.polynomial.legendre.leggauss(64)
    r = 0.5 * r_end * (x + 1.0)
    vals = r / (n * np.log(n / r + p.h0) ** p.alpha)
    return float(0.5 * r_end * np.sum(w * vals))


def solve_sphere(r0: float, n: int, p: SpeedParams, tol: float = 1e-10) -> SphereSolution:
    """Integrate dr/dt = -f(n/r) down to r = 1e-6 * r0.

    The blowup time is the event time plus the closed quadrature of the
    remaining (singular but integrable) tail, so T is accurate to the
    integration tolerance rather than to the endpoint resolution.
    """
    if r0 <= 0:
        raise ValueError("r0 must be positive")

    floor = RADIUS_FLOOR * r0

    def rhs(t, y):
        # clamp: RK45 trial stages can overshoot past the event; the
        # accepted solution terminates at the floor, above the clamp
        r = y[0] if y[0] > 0.1 * floor else 0.1 * floor
        return [-p.value(n / r)]

    def hit_floor(t, y):
        return y[0] - floor

    hit_floor.terminal = True
    hit_floor.direction = -1

    # finite-time bound from the comparison ODE; equality only at alpha = 0
    t_cap = 1.05 * r0**2 / (2.0 * n) + 1e-12
    sol = solve_ivp(
        rhs,
        (0.0, t_cap),
        [r0],
        method="RK45",
        rtol=tol,
        atol=tol * r0,
        events=hit_floor,
        dense_output=True,
    )
    if sol.t_events[0].size == 0:
        raise RuntimeError("sphere integration never reached the radius floor")
    t_end = float(sol.t_events[0][0])
    r_end = float(sol.y_events[0][0][0])
    T = t_end + _remaining_time(r_end, n, p)
    return SphereSolution(
        r0=r0, dim_n=n, speed=p, t=sol.t, r=sol.y[0], T_blowup=T, _dense=sol.sol
    )


def min_curvature_lower_bound(t, h_min0: float, n: int):
    """Closed-form lower bound (h_min0^-2 - 2t/n)^(-1/2) for H_min(t).

    Valid strictly before its own blowup time n / (2 h_min0^2).
    """
    t = np.asarray(t, dtype=float)
    t_star = n / (2.0 * h_min0**2)
    if np.any(t >= t_star):
        raise ValueError(f"bound blows up at t = {t_star}; got t >= t_star")
    return (1.0 / h_min0**2 - 2.0 * t / n) ** -0.5


def min_curvature_bound_gap(trace, n: int = 2) -> float:
    """Worst slack of the H_min lower bound along a trace, inverse-square form.

    The bound H_min(t) >= (H_min(0)^-2 - 2t/n)^(-1/2) is equivalent to

        q(t) = H_min(0)^-2 - 2t/n - H_min(t)^-2 >= 0,

    which stays finite through the blowup (the direct form diverges at
    its own singular time, making comparison there meaningless at any
    resolution).  Returns min q over the trace; discretization allows
    it to dip to -c * ds^2.
    """
    h = np.asarray(trace.H_min, dtype=float)
    t = np.asarray(trace.t, dtype=float)
    q = 1.0 / h[0] ** 2 - 2.0 * t / n - 1.0 / h**2
    return float(np.min(q))


def max_curvature_growth_check(trace, scale, n_sample: int = 2000, tol: float = 1e-9):
    """Audit the integrated growth inequality of H_max along a trace.

    The differential inequality dv/dt <= v^3 ln(v + h0)^alpha integrates
    to J(v(s)) - J(v(t)) <= s - t for every sampled pair t < s, which is
    equivalent to u = J(v) - t being nonincreasing.  Returns a report
    dict with the worst upward step of u.
    """
    t = np.asarray(trace.t, dtype=float)
    v = np.asarray(trace.H_max, dtype=float)
    if t.size < 2:
        raise ValueError("trace too short")
    if t.size > n_sample:
        idx = np.unique(np.linspace(0, t.size - 1, n_sample).astype(int))
        t, v = t[idx], v[idx]
    u = scale.tail_integral(v) - t
    worst = float(np.max(np.diff(u)))
    return {
        "max_violation": max(worst, 0.0),
        "pass": bool(worst <= tol),
        "n_sampled": int(t.size),
    }
