import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hoppysim.config import (default_config_path, load_config, override, parse_config, save_config,
                             serialize_config)
from hoppysim.control import ControllerConfig
from hoppysim.errors import ParseError, ValidationError
from hoppysim.model import default_model
from hoppysim.sim import SimConfig


def test_shipped_defaults_load():
    model, controller, sim = load_config()
    assert model == default_model()
    assert controller == ControllerConfig()
    assert sim == SimConfig()
    assert default_config_path().is_file()


def test_minimal_file_keeps_published_controller_defaults():
    model, controller, sim = parse_config("[sim]\nn_hops = 4\n")
    assert sim.n_hops == 4
    assert controller.K_p == (500.0, 500.0) and controller.K_d == (50.0, 50.0)
    assert controller.T_s == 0.15 and controller.F_peak[1] == 80.0


def test_empty_file_is_all_defaults():
    assert parse_config("") == (default_model(), ControllerConfig(), SimConfig())


def test_negative_link_mass_names_key():
    with pytest.raises(ValidationError) as err:
        parse_config("[thigh]\nmass = -0.2\n")
    assert err.value.key == "thigh.mass"


def test_scalar_violation_names_section():
    with pytest.raises(ValidationError) as err:
        parse_config("[model]\nR_w = 0\n")
    assert err.value.key == "model.R_w"
    with pytest.raises(ValidationError) as err:
        parse_config("[controller]\nT_s = -1\n")
    assert err.value.key == "controller.T_s"


def test_bad_number_reports_line_and_key():
    with pytest.raises(ParseError) as err:
        parse_config("[controller]\nK_p = 500, abc\n")
    assert err.value.line == 2
    assert err.value.key == "controller.K_p"


def test_unknown_key_and_section():
    with pytest.raises(ParseError) as err:
        parse_config("[model]\nwheel_radius = 3\n")
    assert err.value.key == "model.wheel_radius"
    with pytest.raises(ParseError, match="unknown section"):
        parse_config("[motor]\nk = 1\n")
    with pytest.raises(ParseError):
        parse_config("k = 1\n")


def test_link_vector_lengths_checked():
    with pytest.raises(ParseError) as err:
        parse_config("[shank]\ncom = 0, 0\n")
    assert err.value.key == "shank.com"


def test_booleans_and_comments():
    _, _, sim = parse_config("[sim]\ncontroller_on = off  # motors disabled\n")
    assert sim.controller_on is False


def test_round_trip_defaults(tmp_path):
    configs = load_config()
    path = tmp_path / "out.ini"
    save_config(path, *configs)
    assert load_config(path) == configs
    assert serialize_config(*load_config(path)) == serialize_config(*configs)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(0.1, 5.0), st.floats(0.0, 1e3), st.floats(0.0, 150.0),
       st.integers(0, 50), st.floats(1e-10, 1e-4))
def test_round_trip_random(mass, R_w, kp, fy, hops, rtol):
    m = default_model()
    m = m.replace(R_w=R_w, thigh=type(m.thigh)(mass, m.thigh.com, m.thigh.inertia))
    c = ControllerConfig(K_p=(kp, kp / 3), F_peak=(fy, 80.0))
    s = SimConfig(n_hops=hops, rtol=rtol)
    assert parse_config(serialize_config(m, c, s)) == (m, c, s)


def test_override_paths():
    configs = load_config()
    m, c, s = override(configs, "controller.F_peak[0]", 3.5)
    assert c.F_peak == (3.5, 80.0)
    m, c, s = override(configs, "model.k_s", 1.5)
    assert m.k_s == 1.5
    m, c, s = override(configs, "thigh.mass", 0.2)
    assert m.thigh.mass == 0.2
    m, c, s = override(configs, "sim.n_hops", 7)
    assert s.n_hops == 7 and isinstance(s.n_hops, int)
    with pytest.raises(ValidationError):
        override(configs, "model.nothing", 1.0)
    with pytest.raises(ValidationError):
        override(configs, "model.R_w", -1.0)


def test_serialized_floats_exact():
    m = default_model().replace(k_T=0.1 + 0.2)
    m2, _, _ = parse_config(serialize_config(m, ControllerConfig(), SimConfig()))
    assert m2.k_T == 0.1 + 0.2
    assert np.array_equal(m2.moving_bodies[2], m.moving_bodies[2])
