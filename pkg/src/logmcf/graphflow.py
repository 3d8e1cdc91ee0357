"""Finite-difference solver for the flow in graph form, on a planar patch.

Writing the evolving surface locally as a graph u over a disc turns the
flow into the scalar quasilinear equation

    du/dt = -sqrt(1 + |Du|^2) * f( -g^{ij} D^2_ij u / sqrt(1 + |Du|^2) ),

with g^{ij} = delta_ij - u_i u_j / (1 + |Du|^2) the inverse graph
metric.  The speed argument is the mean curvature of the graph; the
update is parabolic exactly while that argument stays positive (f' > 0
there), and the solver raises NonParabolicError the moment the computed
argument crosses zero anywhere.

This module cross-validates the intrinsic axisymmetric solver: the cap
of a shrinking round sphere is an exact solution in graph form, with
the radius history supplied by the radial ODE oracle, so the patch
solver's error against the exact cap measures pure discretization
error.  Dirichlet data on the boundary ring comes from the same exact
cap, sidestepping any boundary-condition modeling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonParabolicError
from .oracle import SphereSolution, solve_sphere
from .speed import SpeedParams


# ---------------------------------------------------------------------------
# the two displayed forms of the graph mean curvature (for exact ingredients)


def h_divergence_form(ux, uy, uxx, uyy, uxy):
    """-div(Du / sqrt(1 + |Du|^2)) assembled via the quotient rule."""
    w = np.sqrt(1.0 + ux**2 + uy**2)
    wx = (ux * uxx + uy * uxy) / w
    wy = (ux * uxy + uy * uyy) / w
    return -((uxx * w - ux * wx) + (uyy * w - uy * wy)) / w**2


def h_expanded_form(ux, uy, uxx, uyy, uxy):
    """-(lap u - Du (D^2 u) Du / (1 + |Du|^2)) / sqrt(1 + |Du|^2)."""
    w2 = 1.0 + ux**2 + uy**2
    quad = ux * ux * uxx + 2.0 * ux * uy * uxy + uy * uy * uyy
    return -(uxx + uyy - quad / w2) / np.sqrt(w2)


# ---------------------------------------------------------------------------
# patch


@dataclass
class GraphPatch:
    """Square grid over a disc, evolving the cap height u.

    Interior points (all eight stencil neighbours inside the disc) are
    advanced by the PDE; every other grid point is refreshed from the
    boundary source each step (cut cells excluded).
    """

    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    h: float
    time: float
    interior: np.ndarray
    boundary_source: object  # callable (X, Y, t) -> exact u
    meta: dict = field(default_factory=dict)

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    def exact(self, t=None):
        t = self.time if t is None else t
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return self.boundary_source(X, Y, t)

    def interior_error(self) -> float:
        return float(np.max(np.abs((self.u - self.exact())[self.interior])))


def sphere_cap_source(sol: SphereSolution):
    """Exact height of the shrinking-sphere cap, radius from the oracle."""

    def source(X, Y, t):
        r = sol.radius(t)
        return np.sqrt(r * r - X * X - Y * Y)

    return source


def make_cap_patch(sol: SphereSolution, h: float, patch_radius: float | None = None) -> GraphPatch:
    """Disc patch of radius 0.5 r0 (default) sampled on a square grid."""
    r0 = sol.r0
    R = 0.5 * r0 if patch_radius is None else patch_radius
    n_half = int(round(R / h))
    coords = h * np.arange(-n_half, n_half + 1)
    X, Y = np.meshgrid(coords, coords, indexing="ij")
    inside = X * X + Y * Y < R * R * (1.0 - 1e-12)
    interior = inside.copy()
    interior[0, :] = interior[-1, :] = False
    interior[:, 0] = interior[:, -1] = False
    interior[1:-1, 1:-1] &= (
        inside[:-2, 1:-1]
        & inside[2:, 1:-1]
        & inside[1:-1, :-2]
        & inside[1:-1, 2:]
        & inside[:-2, :-2]
        & inside[:-2, 2:]
        & inside[2:, :-2]
        & inside[2:, 2:]
    )
    source = sphere_cap_source(sol)
    u = source(X, Y, 0.0)
    return GraphPatch(
        x=coords, y=coords, u=u, h=h, time=0.0, interior=interior, boundary_source=source
    )


# ---------------------------------------------------------------------------
# stepping


def _derivatives(u, h):
    ux = np.empty_like(u)
    uy = np.empty_like(u)
    uxx = np.empty_like(u)
    uyy = np.empty_like(u)
    uxy = np.empty_like(u)
    ux[1:-1, :] = (u[2:, :] - u[:-2, :]) / (2.0 * h)
    uy[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2.0 * h)
    uxx[1:-1, :] = (u[2:, :] - 2.0 * u[1:-1, :] + u[:-2, :]) / h**2
    uyy[:, 1:-1] = (u[:, 2:] - 2.0 * u[:, 1:-1] + u[:, :-2]) / h**2
    uxy[1:-1, 1:-1] = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4.0 * h**2)
    for arr in (ux, uy, uxx, uyy, uxy):
        arr[0, :] = arr[-1, :] = 0.0
        arr[:, 0] = arr[:, -1] = 0.0
    return ux, uy, uxx, uyy, uxy


def graph_mean_curvature(patch: GraphPatch):
    """Discrete speed argument -g^{ij} D^2_ij u / W on the grid."""
    ux, uy, uxx, uyy, uxy = _derivatives(patch.u, patch.h)
    return h_expanded_form(ux, uy, uxx, uyy, uxy), np.sqrt(1.0 + ux**2 + uy**2)


def graph_step(patch: GraphPatch, p: SpeedParams, dt: float) -> GraphPatch:
    """One explicit update; boundary ring refreshed from the exact source.

    Raises NonParabolicError when the discrete mean curvature is
    nonpositive at any interior point (the regime where f' > 0 no
    longer guarantees parabolicity).
    """
    h_arg, w = graph_mean_curvature(patch)
    interior = patch.interior
    if np.any(h_arg[interior] <= 0.0):
        raise NonParabolicError(
            "graph mean curvature nonpositive at an interior point; explicit update invalid"
        )
    new_u = patch.exact(patch.time + dt)
    new_u[interior] = (
        patch.u[interior] - dt * w[interior] * p.value(h_arg[interior])
    )
    return GraphPatch(
        x=patch.x,
        y=patch.y,
        u=new_u,
        h=patch.h,
        time=patch.time + dt,
        interior=interior,
        boundary_source=patch.boundary_source,
        meta=patch.meta,
    )


def stable_dt(patch: GraphPatch, p: SpeedParams, c: float = 0.2) -> float:
    h_arg, _ = graph_mean_curvature(patch)
    fp_max = float(np.max(p.deriv(np.maximum(h_arg[patch.interior], 0.0))))
    return c * patch.h**2 / fp_max


def run_cap(
    p: SpeedParams,
    r0: float = 1.0,
    h: float = 1.0 / 32.0,
    t_end: float = 0.02,
    cfl_c: float = 0.2,
    oracle_tol: float = 1e-10,
):
    """Evolve the cap to t_end and report the sup error against the oracle.

    Also monitors the maximum-principle observation: the interior never
    exceeds the running parabolic-boundary maximum.
    """
    sol = solve_sphere(r0, 2, p, tol=oracle_tol)
    patch = make_cap_patch(sol, h)
    sup_err = patch.interior_error()
    boundary_max = float(np.max(patch.u[~patch.interior]))
    max_principle_ok = True
    initial_max = float(np.max(patch.u[patch.interior], initial=0.0))
    steps = 0
    while patch.time < t_end:
        dt = min(stable_dt(patch, p, cfl_c), t_end - patch.time)
        patch = graph_step(patch, p, dt)
        steps += 1
        sup_err = max(sup_err, patch.interior_error())
        boundary_max = max(boundary_max, float(np.max(patch.u[~patch.interior])))
        if float(np.max(patch.u[patch.interior])) > max(initial_max, boundary_max) + 1e-12:
            max_principle_ok = False
    return {
        "patch": patch,
        "sup_error": sup_err,
        "steps": steps,
        "max_principle_ok": max_principle_ok,
    }


def convergence_study(p: SpeedParams, hs, t_end: float = 0.02, **kw):
    """Error-vs-exact rows over a refinement ladder in the grid spacing."""
    rows = []
    for h in hs:
        rep = run_cap(p, h=h, t_end=t_end, **kw)
        rows.append(
            {
                "h": float(h),
                "sup_error": rep["sup_error"],
                "steps": rep["steps"],
                "max_principle_ok": rep["max_principle_ok"],
            }
        )
    return rows


def write_error_csv(path, rows):
    """Error-vs-exact CSV, one row per refinement level."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "sup_error", "steps"])
        for row in rows:
            w.writerow(
                [format(row["h"], ".17g"), format(row["sup_error"], ".17g"), row["steps"]]
            )


def write_patch_csv(path, patch: GraphPatch):
    """Grid dump x,y,u, one row per grid point inside the disc."""
    import csv

    X, Y = np.meshgrid(patch.x, patch.y, indexing="ij")
    keep = patch.interior | np.isfinite(patch.u)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "u"])
        for xv, yv, uv in zip(X[keep], Y[keep], patch.u[keep]):
            w.writerow([format(xv, ".17g"), format(yv, ".17g"), format(uv, ".17g")])
