"""Convex surfaces of revolution and their curvature fields.

A closed convex axisymmetric surface is represented by its generating
profile (rho(s), z(s)) sampled pole to pole, with rho = 0 exactly at the
two endpoints.  All differential quantities are computed with centered
second order stencils on the node index, using the smooth symmetric
extension through each pole: z and every scalar curvature quantity are
even across a pole, rho is odd.  That makes every stencil second order
up to and including the pole nodes, with no one-sided formulas.

Principal curvatures, with the outward normal convention under which a
round sphere of radius r has lambda1 = lambda2 = 1/r:

    lambda1 = (rho' z'' - z' rho'') / |F'|^3      (meridian)
    lambda2 = z' / (rho |F'|)                     (rotation)

At the poles lambda2 is the 0/0 limit and equals the meridian curvature
(poles of a smooth axisymmetric surface are umbilic), so both principal
curvatures are set to the pole value of lambda1.

The gradient-coupling scalar carried as Y2 is the axisymmetric reduction
of the full contraction

    g^{ij} b^{lp} b^{mq} (H grad_i h_lm - h_lm grad_i H)
                         (H grad_j h_pq - h_pq grad_j H),

which for a surface of revolution collapses, in the orthonormal frame
(meridian, parallel), to

    Y2 = (H l1' - l1 H')^2 / l1^2
       + (H l2' - l2 H')^2 / l2^2
       + 2 H^2 (l2')^2 / (l1 l2),

with ' the arclength derivative along the meridian.  The cross term is
the rotational covariant derivative component grad_theta h_(s theta) =
rho rho_s (l1 - l2), rewritten via the exact axisymmetric identity
l2' = (rho_s / rho)(l1 - l2).  On a sphere all three terms vanish.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import DegenerateSurfaceError

DIM_N = 2  # hypersurface dimension of a surface of revolution in R^3


@dataclass(frozen=True)
class SphereState:
    """Exact round sphere reference: H = n/r, K = r^-n, gamma = n^-n."""

    radius: float
    dim_n: int = DIM_N

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.dim_n < 1:
            raise ValueError("dim_n must be >= 1")

    @property
    def mean_curvature(self) -> float:
        return self.dim_n / self.radius

    @property
    def gauss_curvature(self) -> float:
        return self.radius ** (-self.dim_n)

    @property
    def gamma(self) -> float:
        return float(self.dim_n) ** (-self.dim_n)


@dataclass
class AxiSurface:
    """Pole-to-pole profile samples of a convex surface of revolution."""

    rho: np.ndarray
    z: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if self.rho.shape != self.z.shape or self.rho.ndim != 1:
            raise DegenerateSurfaceError("rho and z must be 1-d arrays of equal length")
        if self.rho.size < 8:
            raise DegenerateSurfaceError("need at least 8 profile nodes")

    @property
    def n_nodes(self) -> int:
        return self.rho.size

    @property
    def closed(self) -> bool:
        """True when both endpoints sit on the axis (poles at rho = 0)."""
        return bool(self.rho[0] == 0.0 and self.rho[-1] == 0.0)

    def copy(self) -> "AxiSurface":
        return AxiSurface(self.rho.copy(), self.z.copy(), self.time)

    def arclength(self) -> np.ndarray:
        """Cumulative chordal arclength, zero at the first pole."""
        seg = np.hypot(np.diff(self.rho), np.diff(self.z))
        return np.concatenate(([0.0], np.cumsum(seg)))

    def segment_lengths(self) -> np.ndarray:
        return np.hypot(np.diff(self.rho), np.diff(self.z))

    def validate(self):
        if self.rho[0] != 0.0 or self.rho[-1] != 0.0:
            raise DegenerateSurfaceError("profile must start and end on the axis (rho = 0)")
        if np.any(self.rho[1:-1] <= 0.0):
            raise DegenerateSurfaceError("interior profile nodes must have rho > 0")
        seg = self.segment_lengths()
        if np.any(seg <= 0.0):
            raise DegenerateSurfaceError("profile nodes must be strictly ordered in arclength")
        mean = seg.mean()
        if seg.min() < 0.5 * mean or seg.max() > 2.0 * mean:
            raise DegenerateSurfaceError(
                f"node spacing outside [0.5, 2.0] x mean spacing "
                f"(min {seg.min():.3e}, max {seg.max():.3e}, mean {mean:.3e}); redistribute first"
            )


@dataclass
class CurvatureField:
    """Per-node curvature data of an AxiSurface snapshot.

    Arrays cover every node, poles included.  gradX is the arclength
    derivative of X along the meridian and lapX its surface Laplacian;
    both vanish (grad) or take the symmetric limit (lap) at the poles.
    """

    s: np.ndarray
    rho: np.ndarray
    z: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    H: np.ndarray
    K: np.ndarray
    normA2: np.ndarray
    gamma: np.ndarray
    gradH: np.ndarray
    lapH: np.ndarray
    gradK: np.ndarray
    lapK: np.ndarray
    Y2: np.ndarray
    rho_s: np.ndarray = field(repr=False, default=None)

    @property
    def n_nodes(self) -> int:
        return self.H.size

    def is_convex(self) -> bool:
        """Checkable predicate monitored by the flow driver."""
        return bool(np.all(self.lambda1 > 0.0) and np.all(self.lambda2 > 0.0))


# ---------------------------------------------------------------------------
# stencils on the node index, with symmetric pole ghosts


def d1_even(w):
    """Centered first index-derivative of a field even across both poles."""
    out = np.empty_like(w)
    out[1:-1] = 0.5 * (w[2:] - w[:-2])
    out[0] = 0.0
    out[-1] = 0.0
    return out


def d2_even(w):
    out = np.empty_like(w)
    out[1:-1] = w[2:] - 2.0 * w[1:-1] + w[:-2]
    out[0] = 2.0 * (w[1] - w[0])
    out[-1] = 2.0 * (w[-2] - w[-1])
    return out


def d1_odd(w):
    """Centered first index-derivative of a field odd across both poles (rho)."""
    out = np.empty_like(w)
    out[1:-1] = 0.5 * (w[2:] - w[:-2])
    out[0] = w[1]
    out[-1] = -w[-2]
    return out


def d2_odd(w):
    out = np.empty_like(w)
    out[1:-1] = w[2:] - 2.0 * w[1:-1] + w[:-2]
    out[0] = 0.0
    out[-1] = 0.0
    return out


def _profile_frame(rho, z):
    """First and second index-derivatives of the profile plus the stretch m = |F_xi|."""
    rho_x = d1_odd(rho)
    rho_xx = d2_odd(rho)
    z_x = d1_even(z)
    z_xx = d2_even(z)
    m = np.hypot(rho_x, z_x)
    return rho_x, rho_xx, z_x, z_xx, m


def _lambda_fields(rho, rho_x, rho_xx, z_x, z_xx, m):
    """Principal curvature arrays with the umbilic pole limit.

    The meridian stencil is uniform through the poles (the mirrored
    extension is exact), so lambda1 carries a smooth truncation
    constant.  The rotational curvature z'/rho is 0/0 at a pole; its
    limit equals the meridian curvature there, and we realize it by the
    even-symmetric parabolic extrapolation (4 w_1 - w_2)/3 of the
    interior values, which keeps the truncation constant smooth across
    the pole (copying lambda1 instead would inject an O(ds^2) jump that
    ruins the order of pole-adjacent Laplacians).
    """
    m3 = m * m * m
    lam1 = (rho_x * z_xx - z_x * rho_xx) / m3
    lam2 = np.empty_like(lam1)
    lam2[1:-1] = z_x[1:-1] / (rho[1:-1] * m[1:-1])
    lam2[0] = (4.0 * lam2[1] - lam2[2]) / 3.0
    lam2[-1] = (4.0 * lam2[-2] - lam2[-3]) / 3.0
    return lam1, lam2


def principal_curvatures(surface: AxiSurface):
    """(lambda1, lambda2, m, nu_rho, nu_z) of a profile.

    nu is the outward unit normal of the generating curve in the profile
    plane; rotating it about the axis gives the surface normal.
    """
    rho, z = surface.rho, surface.z
    rho_x, rho_xx, z_x, z_xx, m = _profile_frame(rho, z)
    if np.any(m <= 0.0):
        raise DegenerateSurfaceError("profile has a stationary point (zero stretch)")
    lam1, lam2 = _lambda_fields(rho, rho_x, rho_xx, z_x, z_xx, m)
    nu_rho = z_x / m
    nu_z = -rho_x / m
    return lam1, lam2, m, nu_rho, nu_z


def _scalar_derivatives(w, m, m_x, rho, rho_x):
    """Arclength gradient and surface Laplacian of an even scalar field."""
    w_x = d1_even(w)
    w_xx = d2_even(w)
    grad = w_x / m
    w_ss = (w_xx - w_x * m_x / m) / (m * m)
    lap = np.empty_like(w)
    lap[1:-1] = w_ss[1:-1] + rho_x[1:-1] * w_x[1:-1] / (rho[1:-1] * m[1:-1] ** 2)
    # symmetric pole limit: (rho_s/rho) w_s -> w_ss, so lap -> 2 w_ss
    lap[0] = 2.0 * w_ss[0]
    lap[-1] = 2.0 * w_ss[-1]
    return grad, lap


def curvatures(surface: AxiSurface) -> CurvatureField:
    """Full curvature field of a profile snapshot.

    Raises DegenerateSurfaceError for invalid profiles.  Convexity is
    not required here; callers check field.is_convex() where the flow
    needs it.
    """
    surface.validate()
    rho, z = surface.rho, surface.z
    rho_x, rho_xx, z_x, z_xx, m = _profile_frame(rho, z)
    if np.any(m <= 0.0):
        raise DegenerateSurfaceError("profile has a stationary point (zero stretch)")
    lam1, lam2 = _lambda_fields(rho, rho_x, rho_xx, z_x, z_xx, m)

    H = lam1 + lam2
    K = lam1 * lam2
    normA2 = lam1 * lam1 + lam2 * lam2
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(H != 0.0, K / H**DIM_N, np.nan)

    m_x = (rho_x * rho_xx + z_x * z_xx) / m
    gradH, lapH = _scalar_derivatives(H, m, m_x, rho, rho_x)
    gradK, lapK = _scalar_derivatives(K, m, m_x, rho, rho_x)
    glam1 = d1_even(lam1) / m
    glam2 = d1_even(lam2) / m

    with np.errstate(divide="ignore", invalid="ignore"):
        y2 = (
            (H * glam1 - lam1 * gradH) ** 2 / lam1**2
            + (H * glam2 - lam2 * gradH) ** 2 / lam2**2
            + 2.0 * H**2 * glam2**2 / K
        )

    return CurvatureField(
        s=surface.arclength(),
        rho=rho.copy(),
        z=z.copy(),
        lambda1=lam1,
        lambda2=lam2,
        H=H,
        K=K,
        normA2=normA2,
        gamma=gamma,
        gradH=gradH,
        lapH=lapH,
        gradK=gradK,
        lapK=lapK,
        Y2=y2,
        rho_s=rho_x / m,
    )


# ---------------------------------------------------------------------------
# scalar reductions


def gamma_extrema(fld: CurvatureField):
    """(min gamma, max gamma, argmin node); ties go to the lowest index."""
    g = fld.gamma
    imin = int(np.argmin(g))
    return float(g[imin]), float(np.max(g)), imin


def roundness(fld: CurvatureField) -> float:
    """max over nodes of lambda_max/lambda_min - 1; zero iff umbilic everywhere."""
    lo = np.minimum(fld.lambda1, fld.lambda2)
    hi = np.maximum(fld.lambda1, fld.lambda2)
    if np.any(lo <= 0.0):
        raise DegenerateSurfaceError("roundness requires strictly positive principal curvatures")
    return float(np.max(hi / lo) - 1.0)


def area(surface: AxiSurface) -> float:
    """Surface area 2 pi * integral of rho ds (trapezoid over segments)."""
    seg = surface.segment_lengths()
    rho = surface.rho
    return float(np.pi * np.sum((rho[:-1] + rho[1:]) * seg))


def enclosed_volume(surface: AxiSurface) -> float:
    """Volume pi * integral of rho^2 dz, exact for the piecewise-linear profile."""
    rho, z = surface.rho, surface.z
    dz = np.diff(z)
    r0, r1 = rho[:-1], rho[1:]
    return float(abs(np.pi / 3.0 * np.sum((r0 * r0 + r0 * r1 + r1 * r1) * dz)))


# ---------------------------------------------------------------------------
# construction and remeshing


def sphere_profile(radius: float, n_nodes: int, center_z: float = 0.0) -> AxiSurface:
    """Uniform-arclength profile of a round sphere."""
    u = np.linspace(0.0, np.pi, n_nodes)
    rho = radius * np.sin(u)
    rho[0] = 0.0
    rho[-1] = 0.0
    z = center_z - radius * np.cos(u)
    return AxiSurface(rho, z)


def spheroid_profile(a: float, c: float, n_nodes: int) -> AxiSurface:
    """Uniform-arclength profile of the spheroid rho = a sin u, z = -c cos u.

    a is the equatorial radius, c the polar semi-axis (c > a: prolate).
    """
    if a <= 0 or c <= 0:
        raise ValueError("semi-axes must be positive")
    fine = np.linspace(0.0, np.pi, max(4096, 32 * n_nodes))
    rho_f = a * np.sin(fine)
    z_f = -c * np.cos(fine)
    s_f = np.concatenate(([0.0], np.cumsum(np.hypot(np.diff(rho_f), np.diff(z_f)))))
    u_of_s = PchipInterpolator(s_f, fine)
    s_new = np.linspace(0.0, s_f[-1], n_nodes)
    u = u_of_s(s_new)
    rho = a * np.sin(u)
    z = -c * np.cos(u)
    rho[0] = 0.0
    rho[-1] = 0.0
    z[0] = -c
    z[-1] = c
    return AxiSurface(rho, z)


def spheroid_curvatures_exact(a: float, c: float, u):
    """Closed-form principal curvatures of the spheroid at parameter u.

    Independent of the discrete machinery; used as an oracle.
    """
    u = np.asarray(u, dtype=float)
    w = np.sqrt((a * np.cos(u)) ** 2 + (c * np.sin(u)) ** 2)
    lam1 = a * c / w**3
    lam2 = c / (a * w)
    return lam1, lam2


def redistribute(surface: AxiSurface) -> AxiSurface:
    """Resample the profile to uniform arclength, preserving node count.

    Cubic spline interpolation of rho(s) and z(s) (fourth order, so the
    curvature of the resampled profile keeps its second order accuracy);
    rho >= 0 is enforced by clipping and the pole values pinned exactly.
    """
    s = surface.arclength()
    target = np.linspace(0.0, s[-1], surface.n_nodes)
    rho = CubicSpline(s, surface.rho)(target)
    z = CubicSpline(s, surface.z)(target)
    rho[0] = 0.0
    rho[-1] = 0.0
    np.maximum(rho, 0.0, out=rho)
    return AxiSurface(rho, z, surface.time)


# ---------------------------------------------------------------------------
# planar convex curves (integrator validation only; gamma is trivial for n = 1)


@dataclass
class PlanarCurve:
    """Closed convex plane curve, nodes counterclockwise, no repeated endpoint."""

    xy: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=float)
        if self.xy.ndim != 2 or self.xy.shape[1] != 2 or self.xy.shape[0] < 8:
            raise DegenerateSurfaceError("need an (N, 2) array with N >= 8")

    def curvature_normal(self):
        """(kappa, outward unit normal) with kappa > 0 for convex CCW curves."""
        p = self.xy
        t1 = 0.5 * (np.roll(p, -1, axis=0) - np.roll(p, 1, axis=0))
        t2 = np.roll(p, -1, axis=0) - 2.0 * p + np.roll(p, 1, axis=0)
        m = np.hypot(t1[:, 0], t1[:, 1])
        kappa = (t1[:, 0] * t2[:, 1] - t1[:, 1] * t2[:, 0]) / m**3
        nu = np.column_stack((t1[:, 1], -t1[:, 0])) / m[:, None]
        return kappa, nu

    def min_spacing(self) -> float:
        d = self.xy - np.roll(self.xy, 1, axis=0)
        return float(np.min(np.hypot(d[:, 0], d[:, 1])))


def circle_profile(radius: float, n_nodes: int) -> PlanarCurve:
    th = np.linspace(0.0, 2.0 * np.pi, n_nodes, endpoint=False)
    return PlanarCurve(np.column_stack((radius * np.cos(th), radius * np.sin(th))))


# ---------------------------------------------------------------------------
# snapshot files

SNAPSHOT_HEADER = ["s", "rho", "z", "lambda1", "lambda2", "H", "K", "gamma"]


def write_snapshot(path, fld: CurvatureField):
    """Profile snapshot CSV, one row per node."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_HEADER)
        cols = [fld.s, fld.rho, fld.z, fld.lambda1, fld.lambda2, fld.H, fld.K, fld.gamma]
        for row in zip(*cols):
            w.writerow([format(v, ".17g") for v in row])


def read_profile_csv(path) -> AxiSurface:
    """Load a profile from a snapshot CSV (only s, rho, z are used)."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    return AxiSurface(np.atleast_1d(data["rho"]), np.atleast_1d(data["z"]))
