import numpy as np
import pytest

from hoppysim.actuation import MotorCommand
from hoppysim.control import SensorReading
from hoppysim.kinematics import make_contact_frame
from hoppysim.model import default_model
from hoppysim.sim import SimConfig, Simulator

# criterion number -> (title, passed); filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture
def model():
    return default_model()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_q(rng, n=None):
    """Configurations away from the straight knee and the gantry axis."""
    size = (4,) if n is None else (n, 4)
    lo = np.array([-np.pi, -0.4, -1.2, 0.2])
    hi = np.array([np.pi, 0.4, 1.2, 2.2])
    return rng.uniform(lo, hi, size=size)


def random_qdot(rng, n=None):
    size = (4,) if n is None else (n, 4)
    return rng.normal(0.0, 2.0, size=size)


def random_frame(model, q):
    return make_contact_frame(model, q)


class ScriptedController:
    """Stand-in for the hopping controller that plays back V(t)."""

    def __init__(self, voltage):
        self.voltage = voltage
        self.command = MotorCommand.zero()

    def sense(self, q, in_contact, t):
        return SensorReading(np.asarray(q)[2:4].copy(), bool(in_contact), float(t))

    def step(self, reading):
        self.command = MotorCommand(np.asarray(self.voltage(reading.t), dtype=float))
        return self.command


def scripted_simulator(model, voltage, **sim_kw):
    sim = Simulator(model, config=SimConfig(**sim_kw))
    sim.controller = ScriptedController(voltage)
    return sim


@pytest.fixture(scope="session")
def default_run():
    """The shipped default scenario, run once per session."""
    model = default_model()
    sim = Simulator(model)
    trace = sim.run()
    return model, trace


def pytest_collection_modifyitems(items):
    for item in items:
        if "default_run" in getattr(item, "fixturenames", ()):
            item.add_marker(pytest.mark.slow)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {title}: {'PASS' if ok else 'FAIL'}")
