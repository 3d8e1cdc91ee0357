import numpy as np
import pytest

from logmcf import geometry as geo
from logmcf.errors import DegenerateSurfaceError


def test_closed_flag():
    surf = geo.sphere_profile(1.0, 65)
    assert surf.closed
    open_prof = surf.copy()
    open_prof.rho[-1] = 0.3
    assert not open_prof.closed


def test_sphere_state_exact_values():
    s = geo.SphereState(radius=0.5)
    assert s.mean_curvature == 4.0
    assert s.gauss_curvature == 4.0
    assert s.gamma == 0.25


def test_unit_sphere_field():
    surf = geo.sphere_profile(1.0, 257)
    fld = geo.curvatures(surf)
    h = np.pi / 256
    assert np.allclose(fld.lambda2, 1.0, atol=1e-12)
    # meridian curvature of the discrete sphere is sec^2(h/2), uniform
    assert np.allclose(fld.lambda1, 1.0 / np.cos(h / 2) ** 2, atol=1e-12)
    assert np.allclose(fld.H, 2.0, atol=1e-4)
    assert np.allclose(fld.K, 1.0, atol=1e-4)
    assert np.allclose(fld.gamma, 0.25, atol=1e-9)
    assert np.allclose(fld.gradH, 0.0, atol=1e-10)
    assert np.allclose(fld.lapH, 0.0, atol=1e-7)
    assert np.allclose(fld.Y2, 0.0, atol=1e-10)
    assert fld.is_convex()


def test_sphere_curvature_second_order_convergence():
    errs = []
    ns = [33, 65, 129, 257]
    for n in ns:
        fld = geo.curvatures(geo.sphere_profile(1.0, n))
        errs.append(np.max(np.abs(fld.H - 2.0)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)


def test_spheroid_against_closed_form():
    a, c = 1.0, 2.0
    surf = geo.spheroid_profile(a, c, 513)
    fld = geo.curvatures(surf)
    # equator is the node of maximal rho
    ieq = int(np.argmax(surf.rho))
    assert fld.lambda1[ieq] == pytest.approx(a / c**2, rel=3e-4)
    assert fld.lambda2[ieq] == pytest.approx(1.0 / a, rel=3e-4)
    assert fld.H[ieq] == pytest.approx(1.25, rel=3e-4)
    assert fld.K[ieq] == pytest.approx(0.25, rel=5e-4)
    # poles
    for ip in (0, -1):
        assert fld.lambda1[ip] == pytest.approx(c / a**2, rel=1e-3)
        assert fld.lambda2[ip] == pytest.approx(c / a**2, rel=1e-3)
        assert fld.K[ip] == pytest.approx(4.0, rel=2e-3)


def test_spheroid_whole_profile_against_closed_form():
    a, c = 1.0, 1.5
    surf = geo.spheroid_profile(a, c, 257)
    fld = geo.curvatures(surf)
    u = np.arctan2(surf.rho / a, -surf.z / c)
    lam1_e, lam2_e = geo.spheroid_curvatures_exact(a, c, u)
    assert np.max(np.abs(fld.lambda1 - lam1_e)) < 5e-4
    assert np.max(np.abs(fld.lambda2 - lam2_e)) < 5e-4


def test_gamma_extrema_sphere_and_spheroid():
    gmin, gmax, imin = geo.gamma_extrema(geo.curvatures(geo.sphere_profile(1.0, 129)))
    assert gmin == pytest.approx(0.25, abs=1e-8)
    assert gmax == pytest.approx(0.25, abs=1e-8)

    fld = geo.curvatures(geo.spheroid_profile(1.0, 2.0, 513))
    gmin, gmax, imin = geo.gamma_extrema(fld)
    # equatorial gamma = K/H^2 = 0.25 / 1.25^2 = 0.16, the global minimum
    assert gmin == pytest.approx(0.16, rel=1e-3)
    assert imin == int(np.argmax(fld.rho))
    assert gmax <= 0.25 + 1e-10


def test_am_gm_bound_and_cauchy_schwarz():
    for surf in (geo.sphere_profile(2.0, 65), geo.spheroid_profile(1.0, 1.3, 129)):
        fld = geo.curvatures(surf)
        assert np.max(fld.gamma) <= 0.25 + 1e-10
        assert np.all(fld.normA2 <= fld.H**2 + 1e-12)
        assert np.all(fld.normA2 >= fld.H**2 / 2.0 - 1e-12)


def test_roundness():
    assert geo.roundness(geo.curvatures(geo.sphere_profile(1.0, 129))) < 1e-3
    fld = geo.curvatures(geo.spheroid_profile(1.0, 2.0, 513))
    assert geo.roundness(fld) == pytest.approx(3.0, rel=2e-3)


def test_roundness_umbilic_equivalence():
    # a synthetic exactly-umbilic field has roundness 0 and gamma = 1/4
    n = 32
    ones = np.ones(n)
    fld = geo.CurvatureField(
        s=np.linspace(0, 1, n), rho=ones, z=ones,
        lambda1=2.0 * ones, lambda2=2.0 * ones, H=4.0 * ones, K=4.0 * ones,
        normA2=8.0 * ones, gamma=0.25 * ones, gradH=0 * ones, lapH=0 * ones,
        gradK=0 * ones, lapK=0 * ones, Y2=0 * ones,
    )
    assert geo.roundness(fld) == 0.0
    gmin, _, _ = geo.gamma_extrema(fld)
    assert abs(gmin - 0.25) < 1e-10


def test_gamma_scale_invariance():
    surf = geo.spheroid_profile(1.0, 1.4, 201)
    fld = geo.curvatures(surf)
    for lam in (0.013, 7.3):
        scaled = geo.AxiSurface(lam * surf.rho, lam * surf.z)
        fld2 = geo.curvatures(scaled)
        assert np.max(np.abs(fld2.gamma - fld.gamma)) < 1e-10


def test_area_and_volume_sphere():
    surf = geo.sphere_profile(1.0, 513)
    assert geo.area(surf) == pytest.approx(4.0 * np.pi, rel=1e-4)
    assert geo.enclosed_volume(surf) == pytest.approx(4.0 * np.pi / 3.0, rel=1e-4)


def test_redistribute_fixed_point_on_uniform_sphere():
    surf = geo.sphere_profile(1.0, 129)
    out = geo.redistribute(surf)
    assert np.max(np.abs(out.rho - surf.rho)) < 1e-12
    assert np.max(np.abs(out.z - surf.z)) < 1e-12


def test_redistribute_recovers_uniformity_and_shape():
    rng = np.random.default_rng(7)
    for n in (65, 129, 257):
        u = np.linspace(0.0, np.pi, n)
        jitter = (np.pi / (n - 1)) * 0.3 * rng.uniform(-1, 1, size=n)
        jitter[0] = jitter[-1] = 0.0
        up = np.sort(u + jitter)
        surf = geo.AxiSurface(np.sin(up), -np.cos(up))
        surf.rho[0] = surf.rho[-1] = 0.0
        out = geo.redistribute(surf)
        seg = out.segment_lengths()
        assert seg.max() / seg.min() < 1.01
        fld = geo.curvatures(out)
        ds = np.pi / (n - 1)
        assert np.max(np.abs(fld.H - 2.0)) < 8.0 * ds**2


def _volume_oracle(surf, factor=16):
    # fine spline resampling separates the true geometric volume change
    # from the piecewise-linear quadrature mismatch of enclosed_volume
    from scipy.interpolate import CubicSpline

    s = surf.arclength()
    t = np.linspace(0, s[-1], factor * (surf.n_nodes - 1) + 1)
    rho = CubicSpline(s, surf.rho)(t)
    z = CubicSpline(s, surf.z)(t)
    dz = np.diff(z)
    r0, r1 = rho[:-1], rho[1:]
    return abs(np.pi / 3 * np.sum((r0 * r0 + r0 * r1 + r1 * r1) * dz))


def test_redistribute_volume_change_third_order():
    rng = np.random.default_rng(3)
    changes = []
    ns = [65, 129, 257]
    for n in ns:
        u = np.linspace(0.0, np.pi, n)
        jitter = (np.pi / (n - 1)) * 0.3 * rng.uniform(-1, 1, size=n)
        jitter[0] = jitter[-1] = 0.0
        up = np.sort(u + jitter)
        surf = geo.AxiSurface(np.sin(up), -np.cos(up))
        surf.rho[0] = surf.rho[-1] = 0.0
        out = geo.redistribute(surf)
        changes.append(abs(_volume_oracle(out) - _volume_oracle(surf)))
    ds = np.pi / (np.array(ns) - 1)
    assert np.all(np.array(changes) <= 5.0 * ds**3)


def test_validate_rejects_bad_profiles():
    surf = geo.sphere_profile(1.0, 65)
    bad = surf.copy()
    bad.rho[3] = -1e-3
    with pytest.raises(DegenerateSurfaceError):
        geo.curvatures(bad)
    bad2 = surf.copy()
    bad2.rho[0] = 0.05
    with pytest.raises(DegenerateSurfaceError):
        geo.curvatures(bad2)
    bad3 = surf.copy()
    bad3.rho[10] = bad3.rho[9]
    bad3.z[10] = bad3.z[9]
    with pytest.raises(DegenerateSurfaceError):
        geo.curvatures(bad3)


def test_snapshot_roundtrip(tmp_path):
    surf = geo.spheroid_profile(1.0, 1.2, 65)
    fld = geo.curvatures(surf)
    path = tmp_path / "snap.csv"
    geo.write_snapshot(path, fld)
    back = geo.read_profile_csv(path)
    assert np.allclose(back.rho, surf.rho, atol=1e-15)
    assert np.allclose(back.z, surf.z, atol=1e-15)
    header = path.read_text().splitlines()[0]
    assert header == "s,rho,z,lambda1,lambda2,H,K,gamma"


def test_planar_circle_curvature():
    curve = geo.circle_profile(2.0, 256)
    kappa, nu = curve.curvature_normal()
    assert np.allclose(kappa, 0.5, rtol=5e-4)
    # outward normal points away from the center
    rads = curve.xy / np.hypot(curve.xy[:, 0], curve.xy[:, 1])[:, None]
    assert np.allclose(nu, rads, atol=1e-4)
