import time

import pytest

from logmcf import flow, geometry, pinching
from logmcf.speed import SpeedParams

# shared expensive runs; node counts give power-of-two segment counts
N_FINE = 513
N_MID = 257


@pytest.fixture(scope="session")
def wall_times():
    return {}


def _timed_run(wall_times, key, surface, cfg):
    start = time.monotonic()
    result = flow.run(surface, cfg)
    wall_times[key] = time.monotonic() - start
    return result


@pytest.fixture(scope="session")
def sphere_run_a0(wall_times):
    cfg = flow.FlowConfig(speed=SpeedParams(alpha=0.0), h_stop=1e3, sigma=0.0)
    return _timed_run(wall_times, "sphere_a0", geometry.sphere_profile(1.0, N_MID), cfg)


@pytest.fixture(scope="session")
def sphere_run_a1(wall_times):
    cfg = flow.FlowConfig(speed=SpeedParams(alpha=1.0), h_stop=1e3, sigma=0.0)
    return _timed_run(wall_times, "sphere_a1", geometry.sphere_profile(1.0, N_MID), cfg)


@pytest.fixture(scope="session")
def auto_consts():
    return pinching.auto_constants(2, 1.0)


@pytest.fixture(scope="session")
def spheroid_run_fine(wall_times, auto_consts):
    cfg = flow.FlowConfig(speed=SpeedParams(alpha=1.0), h_stop=1e3, sigma=auto_consts.sigma)
    return _timed_run(
        wall_times, "spheroid_fine", geometry.spheroid_profile(1.0, 1.1, N_FINE), cfg
    )


@pytest.fixture(scope="session")
def spheroid_run_mid(wall_times, auto_consts):
    cfg = flow.FlowConfig(speed=SpeedParams(alpha=1.0), h_stop=1e3, sigma=auto_consts.sigma)
    return _timed_run(
        wall_times, "spheroid_mid", geometry.spheroid_profile(1.0, 1.1, N_MID), cfg
    )


@pytest.fixture(scope="session")
def tolerance_model(auto_consts):
    traces = []
    for n in (129, 257):
        for cfl in (0.2, 0.1):
            cfg = flow.FlowConfig(
                speed=SpeedParams(alpha=1.0), h_stop=500.0, sigma=auto_consts.sigma, cfl=cfl
            )
            traces.append(flow.run(geometry.sphere_profile(1.0, n), cfg).trace)
    return pinching.fit_tolerance_model(traces)
