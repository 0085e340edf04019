import json
import time
from pathlib import Path

import numpy as np
import pytest

from dexretarget.evalsuite import Scenario, generate_synthetic_demo
from dexretarget.kinmodel import parse_robot_model
from dexretarget.retargeter import RetargetConfig, retarget_trajectory
from dexretarget.robots import dex_model, glove_model, planar_arm_urdf

ORACLES = json.loads((Path(__file__).parent / "oracles" / "oracle_values.json").read_text())

# (name, passed, detail) of every acceptance criterion evaluated in this session
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def oracle():
    return ORACLES


@pytest.fixture(scope="session")
def glove():
    return glove_model()


@pytest.fixture(scope="session")
def dex():
    return dex_model()


@pytest.fixture(scope="session")
def planar():
    return parse_robot_model(planar_arm_urdf(0.5))


@pytest.fixture(scope="session")
def synth():
    return generate_synthetic_demo(Scenario(), seed=0)


@pytest.fixture(scope="session")
def short_synth():
    return generate_synthetic_demo(Scenario(frames=60), seed=1)


@pytest.fixture(scope="session")
def cross_run(synth, glove, dex):
    """Default retargeting of the 300-frame grasp onto the 0.9-scaled hand, timed."""
    cfg = RetargetConfig.from_dict({"mount_offset": "auto"}, glove, dex)
    t0 = time.perf_counter()
    result = retarget_trajectory(synth.demo, glove, dex, cfg)
    return cfg, result, time.perf_counter() - t0


def random_unit(rng, n=3):
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)
