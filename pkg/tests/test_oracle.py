import numpy as np
import pytest

from logmcf.oracle import min_curvature_lower_bound, solve_sphere
from logmcf.speed import E, SpeedParams

# independent mpmath quadrature of int_0^1 r / (2 ln(2/r + e)) dr, frozen
T_ALPHA1_UNIT_SPHERE = 0.140406575750313247


def test_mcf_sphere_closed_form():
    sol = solve_sphere(1.0, 2, SpeedParams(alpha=0.0), tol=1e-10)
    assert sol.T_blowup == pytest.approx(0.25, abs=2e-9)
    ts = np.linspace(0.0, 0.24, 50)
    assert np.allclose(sol.radius(ts), np.sqrt(1.0 - 4.0 * ts), rtol=1e-7)
    assert np.all(np.diff(sol.r) < 0)


def test_alpha1_blowup_time_against_quadrature():
    sol = solve_sphere(1.0, 2, SpeedParams(alpha=1.0, h0=E), tol=1e-10)
    assert sol.T_blowup == pytest.approx(T_ALPHA1_UNIT_SPHERE, abs=2e-9)


def test_tolerance_self_consistency():
    p = SpeedParams(alpha=1.0, h0=E)
    tol = 1e-8
    a = solve_sphere(1.0, 2, p, tol=tol)
    b = solve_sphere(1.0, 2, p, tol=tol / 10.0)
    assert abs(a.T_blowup - b.T_blowup) <= 10.0 * (tol / 10.0)


def test_blowup_time_bound():
    # T <= n / (2 H_min(0)^2) = r0^2 / (2n), equality only at alpha = 0
    for alpha, r0, n in [(0.0, 1.0, 2), (1.0, 1.0, 2), (2.0, 0.7, 2), (1.0, 1.3, 1)]:
        sol = solve_sphere(r0, n, SpeedParams(alpha=alpha), tol=1e-9)
        bound = r0**2 / (2.0 * n)
        assert sol.T_blowup <= bound + 1e-7
        if alpha == 0.0:
            assert sol.T_blowup == pytest.approx(bound, abs=1e-7)
        else:
            assert sol.T_blowup < bound


def test_circle_mode():
    sol = solve_sphere(2.0, 1, SpeedParams(alpha=0.0), tol=1e-10)
    # circle under curve shortening: r^2 = r0^2 - 2t
    assert sol.T_blowup == pytest.approx(2.0, abs=1e-8)


def test_psi_bound_values():
    assert min_curvature_lower_bound(0.0, 2.0, 2) == pytest.approx(2.0)
    assert min_curvature_lower_bound(0.1, 2.0, 2) == pytest.approx(0.15**-0.5, rel=1e-14)
    with pytest.raises(ValueError):
        min_curvature_lower_bound(0.25, 2.0, 2)


def test_psi_bound_is_exact_mcf_sphere():
    sol = solve_sphere(1.0, 2, SpeedParams(alpha=0.0), tol=1e-11)
    ts = np.linspace(0.0, 0.2, 30)
    h = sol.mean_curvature(ts)
    bound = min_curvature_lower_bound(ts, 2.0, 2)
    assert np.allclose(h, bound, rtol=1e-7)


def test_radius_domain_guard():
    sol = solve_sphere(1.0, 2, SpeedParams(alpha=0.0))
    with pytest.raises(ValueError):
        sol.radius(1.0)


def test_csv_output(tmp_path):
    sol = solve_sphere(1.0, 2, SpeedParams(alpha=1.0))
    path = tmp_path / "dense.csv"
    sol.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,r"
    assert len(lines) == sol.t.size + 1
