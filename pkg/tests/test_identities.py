import numpy as np
import pytest

from logmcf import flow, geometry as geo, identities as idn
from logmcf.errors import DegenerateSurfaceError
from logmcf.speed import SpeedParams

P1 = SpeedParams(alpha=1.0)
P0 = SpeedParams(alpha=0.0)


def bumpy_profile(n=257, amp=0.02):
    """Smooth convex non-spheroidal profile for identity checks."""
    u = np.linspace(0, np.pi, n)
    pert = 1.0 + amp * np.cos(2 * u) + 0.5 * amp * np.cos(4 * u)
    rho = pert * np.sin(u)
    z = -1.2 * pert * np.cos(u)
    rho[0] = rho[-1] = 0.0
    surf = geo.redistribute(geo.AxiSurface(rho, z))
    assert geo.curvatures(surf).is_convex()
    return surf


FIELDS = [
    geo.curvatures(geo.spheroid_profile(1.0, 1.5, 257)),
    geo.curvatures(bumpy_profile()),
]


@pytest.mark.parametrize("fld", FIELDS, ids=["spheroid", "bumpy"])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_gauss_recombination_to_roundoff(fld, alpha):
    assert idn.gauss_recombination_gap(fld, SpeedParams(alpha=alpha)) < 1e-12


@pytest.mark.parametrize("fld", FIELDS, ids=["spheroid", "bumpy"])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_quotient_rule_recombination_to_roundoff(fld, alpha):
    assert idn.quotient_rule_gap(fld, SpeedParams(alpha=alpha)) < 1e-12


@pytest.mark.parametrize("fld", FIELDS, ids=["spheroid", "bumpy"])
@pytest.mark.parametrize("sigma", [0.01, 0.03, 0.7])
def test_weighted_recombination_to_roundoff(fld, sigma):
    assert idn.weighted_recombination_gap(fld, sigma, P1) < 1e-12


def test_sphere_mean_curvature_residual_scales_with_dt():
    surf = geo.sphere_profile(1.0, 257)
    prev = None
    for dt in (1e-3, 5e-4, 2.5e-4):
        moved = flow.euler_substep(surf, P1, dt)
        res = np.max(np.abs(idn.residual_mean_curvature(surf, moved, P1)))
        assert res <= 25.0 * dt
        if prev is not None:
            assert res < 0.6 * prev
        prev = res


def test_sphere_pinch_residuals_vanish():
    # umbilic case: gamma and the weighted deficit are constant and every
    # right-side term group vanishes
    surf = geo.sphere_profile(1.0, 257)
    moved = flow.euler_substep(surf, P1, 1e-3)
    assert np.max(np.abs(idn.residual_pinch_ratio(surf, moved, P1))) < 1e-8
    assert np.max(np.abs(idn.residual_weighted_deficit(surf, moved, 0.03, P1))) < 1e-8


def test_alpha_zero_reduces_to_mean_curvature_flow_identity():
    surf = geo.spheroid_profile(1.0, 1.5, 257)
    moved = flow.euler_substep(surf, P0, 1e-4)
    fld = geo.curvatures(surf)
    # f = H, f' = 1, f'' = 0: the right side collapses to lap H + H |A|^2
    direct = fld.lapH + fld.H * fld.normA2
    assert np.allclose(idn.rhs_mean_curvature(fld, P0), direct, rtol=0, atol=1e-12)
    res = np.max(np.abs(idn.residual_mean_curvature(surf, moved, P0)))
    assert res < 2e-2


@pytest.mark.parametrize("eq", ["mean_curvature", "gauss", "pinch_ratio", "weighted_deficit"])
def test_dt_refinement_order(eq):
    rep = idn.dt_ladder(
        eq, lambda n: geo.spheroid_profile(1.0, 1.5, n), P1, 513, [8e-3, 4e-3, 2e-3], sigma=0.03
    )
    assert len(rep.levels) >= 3
    assert rep.order >= 1.0
    assert rep.fit_r2 > 0.99


@pytest.mark.parametrize("eq", ["mean_curvature", "gauss", "pinch_ratio", "weighted_deficit"])
def test_ds_refinement_order(eq):
    rep = idn.ds_ladder(
        eq, lambda n: geo.spheroid_profile(1.0, 1.5, n), P1, [129, 257, 513], dt0=1e-3, sigma=0.03
    )
    assert len(rep.levels) >= 3
    assert rep.order >= 1.8
    assert rep.fit_r2 > 0.99


def test_area_residual_orders():
    builder = lambda n: geo.spheroid_profile(1.0, 1.5, n)
    assert idn.dt_ladder("area", builder, P1, 513, [8e-3, 4e-3, 2e-3]).order >= 1.0
    assert idn.ds_ladder("area", builder, P1, [129, 257, 513], dt0=1e-3).order >= 1.8


def test_report_dict_shape():
    rep = idn.ds_ladder(
        "gauss", lambda n: geo.spheroid_profile(1.0, 1.5, n), P1, [65, 129, 257], dt0=1e-3
    )
    d = rep.to_dict()
    assert d["equation"] == "gauss"
    assert d["variable"] == "ds"
    assert len(d["levels"]) == 3
    assert set(d["levels"][0]) == {"ds", "dt", "max_residual"}


def test_pair_validation():
    surf = geo.sphere_profile(1.0, 65)
    other = geo.sphere_profile(1.0, 129)
    other.time = 0.1
    with pytest.raises(DegenerateSurfaceError):
        idn.residual_mean_curvature(surf, other, P1)
    same = surf.copy()
    with pytest.raises(ValueError):
        idn.residual_mean_curvature(surf, same, P1)
    with pytest.raises(ValueError):
        idn.residual("nonsense", surf, same, P1)
