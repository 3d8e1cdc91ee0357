import dataclasses
import math

import numpy as np
import pytest

from logmcf import flow, geometry as geo, singularity as sing
from logmcf.errors import InsufficientBlowupError, SnapshotCoverageError
from logmcf.oracle import max_curvature_growth_check
from logmcf.speed import SpeedParams

# independent 40-digit quadrature, frozen before the build
J1_AT_100 = -9.83810861472877448e-6


def gauss_tail_oracle(x, alpha, h0, n=160):
    """Independent fixed-grid high-order quadrature of the tail integral."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (nodes + 1.0)
    vals = u * np.log(x / u + h0) ** (-alpha)
    return -0.5 * np.sum(weights * vals) / x**2


@pytest.fixture(scope="module")
def scale0():
    return sing.BlowupScale(alpha=0.0, h0=math.e)


@pytest.fixture(scope="module")
def scale1():
    return sing.BlowupScale(alpha=1.0, h0=math.e)


@pytest.fixture(scope="module")
def sphere_run():
    cfg = flow.FlowConfig(speed=SpeedParams(alpha=0.0), h_stop=1000.0, sigma=0.0)
    return flow.run(geo.sphere_profile(1.0, 257), cfg)


def test_alpha0_closed_forms(scale0):
    xs = np.geomspace(0.1, 1e6, 25)
    j = scale0.tail_integral(xs)
    assert np.max(np.abs(j * 2.0 * xs**2 + 1.0)) < 1e-10
    assert scale0.rate_inverse(200.0) == pytest.approx(10.0, rel=1e-10)
    g = scale0.rate(xs)
    assert np.max(np.abs(g / (2.0 * xs**2) - 1.0)) < 1e-10


def test_tail_integral_against_independent_quadrature(scale1):
    assert scale1.tail_integral(100.0) == pytest.approx(J1_AT_100, rel=1e-10)
    for x in (0.5, 3.0, 1e4):
        assert scale1.tail_integral(x) == pytest.approx(
            gauss_tail_oracle(x, 1.0, math.e), rel=1e-9
        )


def test_tail_derivative_consistency(scale1):
    # numeric derivative of J matches the defining ODE right side
    for x in (1.0, 10.0, 1e3):
        step = 1e-5 * x
        fd = (scale1.tail_integral(x + step) - scale1.tail_integral(x - step)) / (2 * step)
        assert fd == pytest.approx(float(scale1.tail_derivative(x)), rel=1e-7)


def test_table_monotone_and_negative(scale1):
    x, j = scale1.table
    assert np.all(j < 0.0)
    assert np.all(np.diff(j) > 0.0)
    g = -1.0 / j
    assert np.all(g > 0.0)
    assert np.all(np.diff(g) > 0.0)


def test_sandwich_bounds_above_threshold(scale1):
    x, j = scale1.table
    # lower bound holds on the whole domain for alpha > 0
    assert np.all(j > -1.0 / (2.0 * x**2))
    x0 = scale1.upper_bound_threshold()
    assert 0.05 < x0 < 10.0
    mask = x >= x0
    assert np.all(j[mask] < -1.0 / (3.0 * x[mask] ** 3))
    # equivalent rate bounds
    g = -1.0 / j[mask]
    assert np.all(g > 2.0 * x[mask] ** 2)
    assert np.all(g < 3.0 * x[mask] ** 3)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_rate_inverse_bound_and_roundtrip(alpha):
    sc = sing.BlowupScale(alpha=alpha, h0=math.e)
    ys = np.geomspace(10.0, 1e8, 20)
    for y in ys:
        x = sc.rate_inverse(float(y))
        assert x <= math.sqrt(y / 2.0) + 1e-12
        assert sc.rate(x) == pytest.approx(y, rel=1e-9)
    xs = sc.rate_inverse_many(ys)
    assert np.max(np.abs(xs / np.array([sc.rate_inverse(float(y)) for y in ys]) - 1.0)) < 1e-6


def test_rate_inverse_left_edge_error(scale1):
    with pytest.raises(ValueError):
        scale1.rate_inverse(1e-12)


def test_estimate_blowup_time_sphere(scale0, sphere_run):
    T, unc, fit = sing.estimate_blowup_time(sphere_run.trace, scale0)
    assert T == pytest.approx(0.25, abs=1e-3)
    assert T >= sphere_run.trace.t[-1]
    assert fit["slope"] == pytest.approx(0.5, abs=1e-3)
    assert unc < 1e-6


def test_estimate_requires_growth(scale0, sphere_run):
    tr = sphere_run.trace
    short = dataclasses.replace(
        tr, **{k: getattr(tr, k)[:50] for k in flow.TRACE_HEADER}
    )
    with pytest.raises(InsufficientBlowupError):
        sing.estimate_blowup_time(short, scale0)


def test_classification_sphere_type1(scale0, sphere_run):
    T, _, _ = sing.estimate_blowup_time(sphere_run.trace, scale0)
    label, c0, details = sing.classify(sphere_run.trace, T, scale0)
    assert label == "type1"
    assert c0 == pytest.approx(math.sqrt(2.0), rel=0.02)
    assert details["running_max_variation"] < 0.01


def test_classification_subsampling_invariance(scale0, sphere_run):
    tr = sphere_run.trace
    sub = dataclasses.replace(tr, **{k: getattr(tr, k)[::2] for k in flow.TRACE_HEADER})
    T, _, _ = sing.estimate_blowup_time(sub, scale0)
    label, c0, _ = sing.classify(sub, T, scale0)
    assert label == "type1"
    assert c0 == pytest.approx(math.sqrt(2.0), rel=0.02)


def test_growth_inequality_integrated(scale0, scale1, sphere_run):
    rep = max_curvature_growth_check(sphere_run.trace, scale0)
    assert rep["pass"]
    cfg = flow.FlowConfig(speed=SpeedParams(alpha=1.0), h_stop=300.0, sigma=0.0)
    res = flow.run(geo.spheroid_profile(1.0, 1.2, 129), cfg)
    rep = max_curvature_growth_check(res.trace, scale1, tol=1e-7)
    assert rep["pass"]


def test_rescale_type1_sphere(scale0, sphere_run):
    T, _, _ = sing.estimate_blowup_time(sphere_run.trace, scale0)
    radii = []
    for k in (50, 400, 3200):
        rs = sing.rescale_type1(sphere_run.snapshots, T, k, scale0)
        assert rs.eps_k > 0
        radii.append(np.mean(np.hypot(rs.surface.rho, rs.surface.z - np.mean(rs.surface.z))))
        # gamma is scale free: rescaled field matches the original snapshot
        orig = [s for s in sphere_run.snapshots if s.time == rs.t_k][0]
        assert np.max(np.abs(geo.curvatures(orig).gamma - geo.curvatures(rs.surface).gamma)) < 1e-12
        assert rs.tau_span[1] == 1.0
    radii = np.array(radii)
    assert np.all(radii > 0.5) and np.all(radii < 5.0)


def test_rescale_type1_coverage_error(scale0, sphere_run):
    T, _, _ = sing.estimate_blowup_time(sphere_run.trace, scale0)
    late = [s for s in sphere_run.snapshots if s.time > 0.2]
    with pytest.raises(SnapshotCoverageError):
        sing.rescale_type1(late, T, 50, scale0)


def test_rescale_type2_normalization(scale0, sphere_run):
    T, _, _ = sing.estimate_blowup_time(sphere_run.trace, scale0)
    for k in (20, 200):
        rs = sing.rescale_type2(sphere_run.snapshots, T, k, scale0)
        fld = geo.curvatures(rs.surface)
        assert float(fld.H[rs.x_k]) == pytest.approx(1.0, rel=1e-9)
        # tau endpoints follow the dilation formulas exactly
        assert rs.tau_span[0] == pytest.approx(-rs.time_dilation * rs.t_k)
        assert rs.tau_span[1] == pytest.approx(rs.time_dilation * (T - rs.t_k - 1.0 / k))
        # the sphere is type-1: the type-2 selection ratio stays bounded
        assert rs.selection_ratio < 2.0


def test_analyze_sphere_end_to_end(scale0, sphere_run):
    report, rescaled = sing.analyze(sphere_run.trace, sphere_run.snapshots, scale0)
    assert report.classification == "type1"
    assert report.C0 == pytest.approx(math.sqrt(2.0), rel=0.02)
    assert len(report.per_k) >= 3
    eps = [r["eps_k"] for r in report.per_k]
    assert np.all(np.diff(eps) < 0)
    assert report.verdict["pass"]
    # rescaled curvature stays bounded across k
    assert max(r["h_tilde_max"] for r in report.per_k) < 3.0
    text = report.to_json()
    for key in ("T_est", "T_uncertainty", "classification", "C0", "per_k"):
        assert f'"{key}"' in text


def test_analyze_spheroid_sphericity(scale1):
    from logmcf import pinching as pin

    ac = pin.auto_constants(2, 1.0)
    cfg = flow.FlowConfig(speed=SpeedParams(alpha=1.0), h_stop=1000.0, sigma=ac.sigma)
    res = flow.run(geo.spheroid_profile(1.0, 1.1, 257), cfg)
    report, _ = sing.analyze(res.trace, res.snapshots, scale1)
    assert report.classification == "type1"
    rnds = [r["roundness"] for r in report.per_k]
    assert rnds[0] > 0.1
    assert report.verdict["pass"]
    assert report.verdict["final_roundness"] <= 0.05
    # the display bound: deficit decays at least like the log weight
    tr = res.trace
    lhs = 0.25 - tr.gamma_min
    rhs = tr.gsigma_max[0] / np.log(tr.H_min + math.e) ** ac.sigma
    assert np.all(lhs <= rhs + 1e-12)


def test_rescale_type2_coverage_error(scale0, sphere_run):
    T, _, _ = sing.estimate_blowup_time(sphere_run.trace, scale0)
    late = [s for s in sphere_run.snapshots if s.time > T - 1e-4]
    with pytest.raises(SnapshotCoverageError):
        sing.rescale_type2(late, T, 1000, scale0)
