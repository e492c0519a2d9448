import numpy as np
import pytest

from greyhull.presets import ship_a
from greyhull.scenarios import ScenarioSpec, equilibrium_speed
from greyhull.dynamics import VesselState
from greyhull.workbench import generate_dataset


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running recovery experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_specs(preset, params, K=40):
    config = preset.config
    schedules = [
        ("turning_circle", dict(rpm=200.0, rudder=15.0, start=5.0)),
        ("zigzag", dict(rpm=180.0, rudder=10.0, heading=10.0)),
        ("speed_run", dict(rpm=150.0, rpm_final=220.0, switch=10.0, rudder=3.0)),
    ]
    specs = []
    for i, (family, p) in enumerate(schedules):
        u0 = equilibrium_speed(p["rpm"], params, config)
        initial = VesselState(psi=0.3 * i, u=u0, n=p["rpm"])
        specs.append(ScenarioSpec(family, p, initial, K=K, dt=1.0, name=f"t{i}-{family}"))
    return specs


@pytest.fixture(scope="session")
def specs_for():
    return make_specs


@pytest.fixture(scope="session")
def preset():
    return ship_a()


@pytest.fixture(scope="session")
def dataset(preset):
    return generate_dataset(preset, make_specs(preset, preset.fitted), preset.fitted, seed=0)
