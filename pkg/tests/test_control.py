import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from hoppysim.actuation import torque_to_voltage
from hoppysim.control import (Backlash, Controller, ControllerConfig, FilteredDerivative,
                              SensorReading, aerial_torque, angle_quantum, bernstein, blend,
                              bezier_force, control_step, filtered_derivative_step, quantize,
                              stance_torque)
from hoppysim.dynamics import stance_solve
from hoppysim.errors import ValidationError
from hoppysim.kinematics import contact_jacobian, foot_in_hip, frames, make_contact_frame
from hoppysim.model import LinkInertia, default_model


def test_defaults_follow_published_settings():
    cfg = ControllerConfig()
    assert cfg.K_p == (500.0, 500.0)
    assert cfg.K_d == (50.0, 50.0)
    assert cfg.T_s == 0.15
    assert cfg.F_peak[1] == 80.0
    assert cfg.k_v_assumed == 0.0


def test_gain_forms():
    assert ControllerConfig(K_p=300).K_p == (300.0, 300.0)
    assert ControllerConfig(K_p=[[200, 0], [0, 100]]).K_p == (200.0, 100.0)
    with pytest.raises(ValidationError):
        ControllerConfig(K_p=[[200, 1], [0, 100]])


@pytest.mark.parametrize("kw", [dict(T_s=0.0), dict(K_d=-1.0), dict(period=-1e-3),
                                dict(bezier=(0.0, 1.0)), dict(bezier=(0.0, -1.0, 0.0)),
                                dict(cpr=0), dict(debounce_ticks=-1)])
def test_invalid_controller_config(kw):
    with pytest.raises(ValidationError):
        ControllerConfig(**kw)


def test_aerial_torque_zero_at_setpoint(model):
    cfg = ControllerConfig(p_ref=tuple(foot_in_hip(model, -0.4, 0.9)))
    np.testing.assert_allclose(aerial_torque(cfg, model, [-0.4, 0.9], [0.0, 0.0]), 0.0, atol=1e-12)


def test_aerial_torque_finite_at_straight_knee(model):
    tau = aerial_torque(ControllerConfig(), model, [0.2, 0.0], [0.5, -0.3])
    assert np.all(np.isfinite(tau))
    assert np.any(tau != 0.0)


def test_aerial_torque_linear_in_kp(model):
    q = [-0.3, 1.1]
    a = aerial_torque(ControllerConfig(K_d=0.0), model, q, [1.0, 2.0])
    b = aerial_torque(ControllerConfig(K_d=0.0, K_p=1000.0), model, q, [1.0, 2.0])
    np.testing.assert_allclose(b, 2 * a)


def test_aerial_torque_is_virtual_spring(model):
    cfg = ControllerConfig()
    q = np.array([-0.3, 1.1])
    v = np.array([0.2, -0.4])
    F = np.array(cfg.K_p) * (np.array(cfg.p_ref) - foot_in_hip(model, *q)) - np.array(cfg.K_d) * v
    np.testing.assert_allclose(aerial_torque(cfg, model, q, v),
                               contact_jacobian(model, [0, 0, *q]).T @ F)


def test_bezier_endpoints():
    cfg = ControllerConfig(F_peak=(10.0, 80.0))
    np.testing.assert_array_equal(bezier_force(cfg, 0.0), [0.0, 0.0])
    np.testing.assert_allclose(bezier_force(cfg, 1.0), [0.0, 0.0], atol=1e-15)


def test_bezier_peak_mid_stance():
    assert bezier_force(ControllerConfig(), 0.5)[1] == pytest.approx(80.0, abs=1e-12)


def test_bezier_clips_normalised_time():
    cfg = ControllerConfig()
    np.testing.assert_array_equal(bezier_force(cfg, 1.7), bezier_force(cfg, 1.0))


def _scan_max(f):
    s = np.linspace(0.0, 1.0, 20001)
    vals = f(s)
    k = int(np.argmax(vals))
    lo, hi = s[max(k - 1, 0)], s[min(k + 1, len(s) - 1)]
    res = minimize_scalar(lambda x: -f(x), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return max(vals[k], -res.fun)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 200.0), st.floats(1.0, 200.0),
       st.lists(st.floats(0.0, 1.0, allow_subnormal=False), min_size=1, max_size=4))
def test_bezier_maximum_equals_peak(fy, fz, inner):
    inner = list(inner)
    if max(inner) == 0.0:
        inner[0] = 1.0
    cfg = ControllerConfig(F_peak=(fy, fz), bezier=(0.0, *inner, 0.0))
    assert _scan_max(lambda s: np.array([bezier_force(cfg, x)[1] for x in np.atleast_1d(s)])
                     if np.ndim(s) else bezier_force(cfg, s)[1]) == pytest.approx(fz, abs=1e-9)


def test_underflowing_profile_rejected():
    # a subnormal control point gives a curve whose maximum rounds to zero
    with pytest.raises(ValidationError, match="bezier"):
        ControllerConfig(bezier=(0.0, 5e-324, 0.0))


def test_bernstein_partition_of_unity():
    s = np.linspace(0, 1, 11)
    np.testing.assert_allclose(bernstein([1.0] * 5, s), 1.0)


def test_stance_torque_linear(model, rng):
    q = [-0.4, 1.0]
    F1, F2 = rng.normal(size=2), rng.normal(size=2)
    np.testing.assert_allclose(stance_torque(ControllerConfig(), model, q, [0.0, 0.0]), 0.0)
    np.testing.assert_allclose(stance_torque(ControllerConfig(), model, q, 2 * F1 - 3 * F2),
                               2 * stance_torque(ControllerConfig(), model, q, F1)
                               - 3 * stance_torque(ControllerConfig(), model, q, F2), atol=1e-12)


def test_stance_torque_transmits_force_through_massless_leg():
    light = LinkInertia(1e-6, (0.0, 0.0, -0.08), ((1e-12, 0, 0), (0, 1e-12, 0), (0, 0, 1e-12)))
    m = default_model().replace(thigh=light, shank=light, I_r=0.0, k_v=0.0)
    q = np.array([0.3, 0.02, -0.4, 0.9])
    frame = make_contact_frame(m, q)
    F_d = np.array([6.0, 40.0])
    tau = np.zeros(4)
    tau[2:] = stance_torque(ControllerConfig(), m, q[2:], F_d)
    sol = stance_solve(m, q, np.zeros(4), tau, frame)
    # a massless leg passes its torques straight to the foot: the ground
    # force, seen along the hip Y and Z axes, is the opposite of F_dGRF
    R_H = frames(m, q)[1].R
    along_hip = (R_H.T @ frame.constrained_axes.T)[1:]
    expected = np.linalg.solve(along_hip, -F_d)
    np.testing.assert_allclose(sol.F_GRF, expected, rtol=1e-4)
    # the hip frame is nearly aligned with the contact frame, flipped
    assert sol.F_GRF[1] == pytest.approx(F_d[1], rel=0.01)


def test_blend_endpoints_and_midpoint():
    us, ua = np.array([2.0, -4.0]), np.array([0.0, 4.0])
    np.testing.assert_array_equal(blend(us, ua, 0.0, 0.01), ua)
    np.testing.assert_array_equal(blend(us, ua, 0.01, 0.01), us)
    np.testing.assert_array_equal(blend(us, ua, 0.5, 0.01), us)
    np.testing.assert_allclose(blend(us, ua, 0.005, 0.01), 0.5 * (us + ua))


def test_filter_constant_input_decays():
    f = FilteredDerivative(1e-3, 10.0)
    f.step([0.0, 0.0])
    f.step([0.1, -0.1])
    for _ in range(5000):
        y = f.step([0.1, -0.1])
    assert np.all(np.abs(y) < 1e-9)


def test_filter_ramp_tracks_continuous_filter():
    lam, T, v = 10.0, 1e-3, 2.0
    state = (None, np.zeros(1))
    n = int(round(10.0 / lam / T))
    err = 0.0
    for k in range(n + 1):
        state = filtered_derivative_step(state, [v * k * T], T, lam)
        # continuous lam s / (lam + s) driven by v t from rest: v (1 - exp(-lam t))
        err = max(err, abs(state[1][0] - v * (1.0 - np.exp(-lam * k * T))))
    assert err <= 0.01 * v
    assert state[1][0] == pytest.approx(v * (1.0 - np.exp(-10.0)), rel=1e-3)


def test_filter_large_lambda_is_finite_difference():
    T = 1e-3
    state = filtered_derivative_step((None, np.zeros(2)), [0.0, 0.0], T, 1e7)
    state = filtered_derivative_step(state, [0.002, -0.001], T, 1e7)
    np.testing.assert_allclose(state[1], [2.0, -1.0], rtol=0.01)


def test_filter_reset():
    f = FilteredDerivative(1e-3, 10.0)
    f.step([0.0, 0.0])
    f.step([1.0, 1.0])
    f.reset()
    np.testing.assert_array_equal(f.step([5.0, 5.0]), [0.0, 0.0])


def test_quantization():
    dq = angle_quantum(26.9, 28)
    assert dq == pytest.approx(2 * np.pi / (28 * 26.9))
    x = quantize([0.123, -0.456], dq)
    assert np.all(np.abs(x - [0.123, -0.456]) <= dq / 2)


def test_backlash_play_operator():
    b = Backlash(0.1)
    np.testing.assert_array_equal(b([0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(b([0.03, -0.03]), [0.0, 0.0])
    np.testing.assert_allclose(b([0.08, 0.0]), [0.03, 0.0])
    np.testing.assert_allclose(b([0.05, 0.0]), [0.03, 0.0])


def reading(theta, contact, t):
    return SensorReading(np.asarray(theta, dtype=float), contact, t)


def test_flight_is_pure_aerial_pd(model):
    cfg = ControllerConfig()
    ctrl = Controller(cfg, model)
    thetas = [[-0.5, 1.0], [-0.49, 0.99], [-0.47, 0.97]]
    for k, th in enumerate(thetas):
        cmd = ctrl.step(reading(th, False, k * cfg.period))
    assert ctrl.log.alpha == 0.0
    expected = torque_to_voltage(model, aerial_torque(cfg, model, thetas[-1],
                                                      contact_jacobian(model, [0, 0, *thetas[-1]])
                                                      @ ctrl.log.thetadot_est), [0, 0], k_v=0.0)
    np.testing.assert_allclose(cmd.V, expected.V)


def test_overtime_stance_returns_to_aerial(model):
    cfg = ControllerConfig()
    ctrl = Controller(cfg, model)
    th = [-0.4, 1.0]
    t = 0.0
    alphas = []
    while t < cfg.T_s + 0.05:
        ctrl.step(reading(th, True, t))
        alphas.append(ctrl.log.alpha)
        t += cfg.period
    np.testing.assert_array_equal(ctrl.log.tau_stance, [0.0, 0.0])
    assert max(alphas) == 1.0
    assert alphas[-1] < 1.0
    assert np.all(np.abs(np.diff(alphas)) <= cfg.period / cfg.blend_time + 1e-12)


def test_blend_weight_is_rate_limited_through_touchdown(model):
    cfg = ControllerConfig()
    ctrl = Controller(cfg, model)
    contact = [False] * 5 + [True] * 30 + [False] * 20
    alphas = []
    for k, c in enumerate(contact):
        ctrl.step(reading([-0.4, 1.0], c, k * cfg.period))
        alphas.append(ctrl.log.alpha)
    steps = np.abs(np.diff(alphas))
    assert np.all(steps <= cfg.period / cfg.blend_time + 1e-12)
    assert alphas[4] == 0.0 and alphas[-1] == 0.0 and max(alphas) == 1.0


def test_quantization_effect_vanishes_with_resolution(model):
    cfg_coarse, cfg_fine = ControllerConfig(cpr=28), ControllerConfig(cpr=28_000_000)
    q = np.array([0.0, 0.0, -0.4123, 1.0377])
    true_cmd = torque_to_voltage(model, aerial_torque(cfg_coarse, model, q[2:], [0, 0]), [0, 0], k_v=0)
    diffs = []
    for cfg in (cfg_coarse, cfg_fine):
        ctrl = Controller(cfg, model)
        cmd = ctrl.step(ctrl.sense(q, False, 0.0))
        diffs.append(np.max(np.abs(cmd.V - true_cmd.V)))
    assert diffs[1] < 1e-4 * max(diffs[0], 1e-12) or diffs[1] < 1e-9


def test_debounce_delays_contact(model):
    ctrl = Controller(ControllerConfig(debounce_ticks=2), model)
    ctrl.step(reading([-0.4, 1.0], True, 0.0))
    assert ctrl.t_touchdown is None
    ctrl.step(reading([-0.4, 1.0], True, 0.001))
    assert ctrl.t_touchdown == 0.001


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.booleans()), min_size=1, max_size=40))
def test_commands_within_supply(samples):
    m = default_model()
    ctrl = Controller(ControllerConfig(F_peak=(30.0, 200.0)), m)
    for k, (a, b, c) in enumerate(samples):
        cmd = control_step(ctrl.config, m, reading([a, b], c, k * 1e-3), ctrl)
        assert np.all(np.abs(cmd.V) <= m.V_max)


def test_controller_is_deterministic(model):
    seq = [([-0.4 + 0.01 * k, 1.0 - 0.005 * k], k > 10, k * 1e-3) for k in range(60)]
    outs = []
    for _ in range(2):
        ctrl = Controller(ControllerConfig(), model)
        outs.append([ctrl.step(reading(*s)).V for s in seq])
    np.testing.assert_array_equal(outs[0], outs[1])
