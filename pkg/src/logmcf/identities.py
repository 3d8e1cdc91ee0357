"""Numerical verification of the evolution equations along the flow.

Each monitored scalar (mean curvature H, Gauss curvature K, pinching
ratio gamma = K/H^n, weighted deficit (1/n^n - gamma) * phi(H)) obeys a
parabolic evolution equation under the flow.  This module assembles the
right-hand sides from a curvature field snapshot and forms residuals

    (X(t + dt) - X(t)) / dt  -  RHS(t)

on matched node pairs produced by a single Euler substep with no
redistribution, so node identity is meaningful.  Residuals converge at
first order in dt and second order in arclength spacing.

Derivative convention: H, K and their arclength gradients/Laplacians
are the primitive discrete fields (from geometry.curvatures); gradients
and Laplacians of the derived scalars gamma and the weighted deficit
are assembled from the primitives through the exact differentiation
identities

    grad gamma = grad K / H^n - n K grad H / H^(n+1),
    lap gamma  = lap K / H^n - 2n <grad K, grad H> / H^(n+1)
                 - (n gamma / H) lap H + n(n+1) gamma |grad H|^2 / H^2,

and similarly for the weighted deficit.  With these shared primitives
the algebraic recombinations among the four right-hand sides hold to
roundoff on any snapshot, with no time stepping; that is what the
*_gap functions check.  (Axisymmetry reduces every tensor contraction
to a scalar in lambda1, lambda2 and arclength derivatives: the inverse
shape operator contracts gradients as |grad H|^2 / lambda1, its
trace-free part as (1/lambda1 - n/H) |grad H|^2, and the
gradient-coupling scalar Y2 is carried by the curvature field.)

Note the factor of the deficit g on the (H^n/K)(H phi'/phi) piece of
the weighted-deficit bracket: it comes from expanding the squared
gradient of the weighted deficit, and the recombination check below
fails for the g-less variant, which pins the transcription.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSurfaceError
from .flow import euler_substep
from .geometry import DIM_N, AxiSurface, CurvatureField, curvatures
from .pinching import weight, weight_deriv, weight_deriv2
from .speed import SpeedParams

N = DIM_N
EQUATIONS = ("mean_curvature", "gauss", "pinch_ratio", "weighted_deficit", "area")


# ---------------------------------------------------------------------------
# right-hand sides


def _derived(fld: CurvatureField):
    h, k = fld.H, fld.K
    grad_gamma = fld.gradK / h**N - N * k * fld.gradH / h ** (N + 1)
    lap_gamma = (
        fld.lapK / h**N
        - 2.0 * N * fld.gradK * fld.gradH / h ** (N + 1)
        - (N * fld.gamma / h) * fld.lapH
        + N * (N + 1) * fld.gamma * fld.gradH**2 / h**2
    )
    return grad_gamma, lap_gamma


def rhs_mean_curvature(fld: CurvatureField, p: SpeedParams):
    """f' lap H + f'' |grad H|^2 + f |A|^2."""
    return p.deriv(fld.H) * fld.lapH + p.deriv2(fld.H) * fld.gradH**2 + p.value(fld.H) * fld.normA2


def rhs_gauss(fld: CurvatureField, p: SpeedParams):
    """Divergence-structure form of the Gauss curvature equation.

    f' lap K - f' (n-1)/n |grad K|^2/K - f' H^(2n) |grad gamma|^2 / (nK)
    + f' (K/H^2) Y2 + f'' K |grad H|^2 / lambda1 + HK (f - Hf') + f' n K |A|^2.
    """
    h, k = fld.H, fld.K
    fp = p.deriv(h)
    grad_gamma, _ = _derived(fld)
    return (
        fp * fld.lapK
        - fp * (N - 1.0) / N * fld.gradK**2 / k
        - fp * h ** (2 * N) * grad_gamma**2 / (N * k)
        + fp * (k / h**2) * fld.Y2
        + p.deriv2(h) * k * fld.gradH**2 / fld.lambda1
        - h * k * p.h_deriv_minus_value(h)
        + fp * N * k * fld.normA2
    )


def rhs_gauss_timeform(fld: CurvatureField, p: SpeedParams):
    """Trace form K [H(f - Hf') + f' bLap(h) + f'' b(grad H, grad H) + n|A|^2 f'].

    The contraction of the inverse shape operator with the Laplacian of
    the second fundamental form is eliminated through the Laplacian
    identity for K, so this form and rhs_gauss are algebraically
    identical; assembling both from the same primitives checks the
    transcription of every remaining term.
    """
    h, k = fld.H, fld.K
    fp = p.deriv(h)
    grad_gamma, _ = _derived(fld)
    b_lap_h = (
        fld.lapK
        - (N - 1.0) / N * fld.gradK**2 / k
        + (k / h**2) * fld.Y2
        - h ** (2 * N) * grad_gamma**2 / (N * k)
    ) / k
    return k * (
        -h * p.h_deriv_minus_value(h)
        + fp * b_lap_h
        + p.deriv2(h) * fld.gradH**2 / fld.lambda1
        + N * fld.normA2 * fp
    )


def rhs_pinch_ratio(fld: CurvatureField, p: SpeedParams):
    """Evolution right side of gamma = K/H^n."""
    h, k, gam = fld.H, fld.K, fld.gamma
    fp = p.deriv(h)
    grad_gamma, lap_gamma = _derived(fld)
    dot_gh = grad_gamma * fld.gradH
    dot_gk = grad_gamma * fld.gradK
    return (
        fp * lap_gamma
        + fp * (N + 1.0) / h * dot_gh
        - fp * (N - 1.0) / (N * k) * dot_gk
        - fp * h**N / (N * k) * grad_gamma**2
        + p.h_deriv_minus_value(h) / h * (N * fld.normA2 - h**2) * gam
        + fp * fld.Y2 / h**2 * gam
        + p.deriv2(h) * (1.0 / fld.lambda1 - N / h) * fld.gradH**2 * gam
    )


def rhs_weighted_deficit(fld: CurvatureField, sigma: float, p: SpeedParams):
    """Evolution right side of (1/n^n - gamma) * ln(H + h0)^sigma."""
    h, k, gam = fld.H, fld.K, fld.gamma
    fp = p.deriv(h)
    g = float(N) ** (-N) - gam
    phi = weight(h, sigma, p)
    phip = weight_deriv(h, sigma, p)
    phipp = weight_deriv2(h, sigma, p)
    grad_gamma, lap_gamma = _derived(fld)
    grad_gsig = -phi * grad_gamma + g * phip * fld.gradH
    lap_gsig = (
        -phi * lap_gamma
        + g * (phipp * fld.gradH**2 + phip * fld.lapH)
        - 2.0 * phip * grad_gamma * fld.gradH
    )
    hn_over_k = h**N / k
    hphi = h * phip / phi
    gsig = g * phi
    bracket = (
        p.h_deriv2_over_deriv(h)
        - h * phipp / phip
        - 2.0 * (1.0 - hphi)
        + hn_over_k * hphi * g
    )
    return (
        fp * lap_gsig
        + fp / phi * hn_over_k * grad_gsig**2
        + 2.0 * fp * (1.0 - hphi * (1.0 + hn_over_k * g)) * grad_gsig * fld.gradH / h
        + fp * hphi * bracket * fld.gradH**2 / h**2 * gsig
        - phi * gam * (fp * fld.Y2 / h**2 + p.deriv2(h) * (1.0 / fld.lambda1 - N / h) * fld.gradH**2)
        - phi * gam * p.h_deriv_minus_value(h) / h * (N * fld.normA2 - h**2)
        + p.value(h) * g * phip * fld.normA2
    )


# ---------------------------------------------------------------------------
# snapshot-level algebraic recombination checks (no time stepping)


def _rel_gap(a, b):
    scale = np.max(np.abs(a)) + np.max(np.abs(b)) + 1e-300
    return float(np.max(np.abs(a - b)) / scale)


def gauss_recombination_gap(fld: CurvatureField, p: SpeedParams) -> float:
    """Relative gap between the two forms of the Gauss curvature right side."""
    return _rel_gap(rhs_gauss(fld, p), rhs_gauss_timeform(fld, p))


def quotient_rule_gap(fld: CurvatureField, p: SpeedParams) -> float:
    """gamma right side vs (K right side)/H^n - (n gamma/H)(H right side)."""
    combined = rhs_gauss(fld, p) / fld.H**N - (N * fld.gamma / fld.H) * rhs_mean_curvature(fld, p)
    return _rel_gap(rhs_pinch_ratio(fld, p), combined)


def weighted_recombination_gap(fld: CurvatureField, sigma: float, p: SpeedParams) -> float:
    """Weighted-deficit right side vs -phi * (gamma rhs) + g phi' * (H rhs)."""
    g = float(N) ** (-N) - fld.gamma
    combined = -weight(fld.H, sigma, p) * rhs_pinch_ratio(fld, p) + g * weight_deriv(
        fld.H, sigma, p
    ) * rhs_mean_curvature(fld, p)
    return _rel_gap(rhs_weighted_deficit(fld, sigma, p), combined)


# ---------------------------------------------------------------------------
# residuals on matched snapshot pairs


def _pair_fields(surf0: AxiSurface, surf1: AxiSurface):
    if surf0.n_nodes != surf1.n_nodes:
        raise DegenerateSurfaceError("snapshots have different node counts; nodes must match")
    dt = surf1.time - surf0.time
    if dt <= 0.0:
        raise ValueError("second snapshot must be later in time")
    return curvatures(surf0), curvatures(surf1), dt


def residual_mean_curvature(surf0, surf1, p: SpeedParams):
    f0, f1, dt = _pair_fields(surf0, surf1)
    return (f1.H - f0.H) / dt - rhs_mean_curvature(f0, p)


def residual_gauss(surf0, surf1, p: SpeedParams):
    f0, f1, dt = _pair_fields(surf0, surf1)
    return (f1.K - f0.K) / dt - rhs_gauss(f0, p)


def residual_pinch_ratio(surf0, surf1, p: SpeedParams):
    f0, f1, dt = _pair_fields(surf0, surf1)
    return (f1.gamma - f0.gamma) / dt - rhs_pinch_ratio(f0, p)


def residual_weighted_deficit(surf0, surf1, sigma: float, p: SpeedParams):
    f0, f1, dt = _pair_fields(surf0, surf1)
    g0 = (0.25 - f0.gamma) * weight(f0.H, sigma, p)
    g1 = (0.25 - f1.gamma) * weight(f1.H, sigma, p)
    return (g1 - g0) / dt - rhs_weighted_deficit(f0, sigma, p)


def residual_area(surf0, surf1, p: SpeedParams):
    """Total-area consequence of the metric evolution: d(area)/dt = -int H f dA."""
    f0, f1, dt = _pair_fields(surf0, surf1)
    ds0 = np.gradient(f0.s)
    ds1 = np.gradient(f1.s)
    area0 = 2.0 * np.pi * np.sum(f0.rho * ds0)
    area1 = 2.0 * np.pi * np.sum(f1.rho * ds1)
    shrink = 2.0 * np.pi * np.sum(f0.rho * f0.H * p.value(f0.H) * ds0)
    return (area1 - area0) / dt + shrink


def residual(equation: str, surf0, surf1, p: SpeedParams, sigma: float = 0.0):
    if equation == "mean_curvature":
        return residual_mean_curvature(surf0, surf1, p)
    if equation == "gauss":
        return residual_gauss(surf0, surf1, p)
    if equation == "pinch_ratio":
        return residual_pinch_ratio(surf0, surf1, p)
    if equation == "weighted_deficit":
        return residual_weighted_deficit(surf0, surf1, sigma, p)
    if equation == "area":
        return np.atleast_1d(residual_area(surf0, surf1, p))
    raise ValueError(f"unknown equation {equation!r}; pick one of {EQUATIONS}")


# ---------------------------------------------------------------------------
# refinement ladders


@dataclass
class ResidualReport:
    equation: str
    levels: list  # rows of {"ds": .., "dt": .., "max_residual": ..}
    order: float  # observed convergence order from a log-log fit
    fit_r2: float
    variable: str = "ds"  # which scale the order refers to
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "equation": self.equation,
            "variable": self.variable,
            "levels": self.levels,
            "order": self.order,
            "fit_r2": self.fit_r2,
            **self.meta,
        }


def _fit_order(hs, errs):
    x = np.log(np.asarray(hs, dtype=float))
    y = np.log(np.asarray(errs, dtype=float))
    A = np.stack([x, np.ones_like(x)], axis=-1)
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - (res[0] / ss_tot if res.size and ss_tot > 0 else 0.0)
    return float(coef[0]), float(r2)


def _max_residual(equation, surface, p, dt, sigma):
    moved = euler_substep(surface, p, dt)
    r = residual(equation, surface, moved, p, sigma=sigma)
    return float(np.max(np.abs(r)))


def dt_ladder(
    equation: str,
    surface_builder,
    p: SpeedParams,
    n_nodes: int,
    dts,
    sigma: float = 0.0,
) -> ResidualReport:
    """Residual decay in dt at fixed (fine) spatial resolution.

    The spatial truncation floor is O(ds^2); pick dts large enough that
    the O(dt) term dominates at every level.
    """
    surface = surface_builder(n_nodes)
    levels = []
    ds = float(surface.segment_lengths().mean())
    for dt in dts:
        levels.append(
            {"ds": ds, "dt": float(dt), "max_residual": _max_residual(equation, surface, p, dt, sigma)}
        )
    order, r2 = _fit_order([lv["dt"] for lv in levels], [lv["max_residual"] for lv in levels])
    return ResidualReport(equation, levels, order, r2, variable="dt", meta={"n_nodes": n_nodes})


def ds_ladder(
    equation: str,
    surface_builder,
    p: SpeedParams,
    node_counts,
    dt0: float,
    sigma: float = 0.0,
) -> ResidualReport:
    """Residual decay in arclength spacing, with dt scaled like ds^2.

    Scaling dt with ds^2 keeps the time-truncation term at or below the
    spatial one, so the fitted order reflects the spatial scheme.
    """
    levels = []
    base_ds = None
    for n in node_counts:
        surface = surface_builder(n)
        ds = float(surface.segment_lengths().mean())
        if base_ds is None:
            base_ds = ds
        dt = dt0 * (ds / base_ds) ** 2
        levels.append(
            {"ds": ds, "dt": dt, "max_residual": _max_residual(equation, surface, p, dt, sigma)}
        )
    order, r2 = _fit_order([lv["ds"] for lv in levels], [lv["max_residual"] for lv in levels])
    return ResidualReport(
        equation, levels, order, r2, variable="ds", meta={"node_counts": list(node_counts)}
    )
