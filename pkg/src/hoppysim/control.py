"""Hopping controller: aerial task-space PD, stance force profile, blending.

The controller runs on a fixed period and only ever sees sampled, quantized
encoder angles and a contact switch.  Everything in between is held.

Sign conventions (hip frame H): Y_H points backwards and Z_H points down the
leg.  ``F_dGRF`` is the force the foot should apply to the ground, so a
positive Z component presses down (the ground pushes the robot up) and a
positive Y component pushes back (the robot is driven forwards).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

from hoppysim.actuation import MotorCommand, torque_to_voltage
from hoppysim.errors import ValidationError
from hoppysim.kinematics import contact_jacobian, foot_in_hip


def _pair(value, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.array([arr, arr])
    elif arr.shape == (2, 2):
        if abs(arr[0, 1]) > 0 or abs(arr[1, 0]) > 0:
            raise ValidationError(name, "gain matrix must be diagonal")
        arr = np.diag(arr)
    if arr.shape != (2,):
        raise ValidationError(name, "expected a scalar, a 2-vector or a diagonal 2x2")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class ControllerConfig:
    """Gains, references and timing of the hopping controller.

    ``K_p`` and ``K_d`` hold the diagonals of the task-space gain matrices.
    ``F_peak`` is (horizontal, vertical) in the hip frame.  ``bezier`` are the
    normalised control points of the stance force profile; the profile is
    rescaled so its maximum equals ``F_peak``.
    """

    K_p: tuple = (500.0, 500.0)
    K_d: tuple = (50.0, 50.0)
    p_ref: tuple = (0.0, 0.26)
    T_s: float = 0.15
    F_peak: tuple = (0.0, 80.0)
    blend_time: float = 0.01
    period: float = 0.001
    lam: float = 10.0
    k_v_assumed: float = 0.0
    bezier: tuple = (0.0, 0.0, 1.0, 0.0, 0.0)
    cpr: int = 28
    backlash: float = 0.0
    debounce_ticks: int = 0

    def __post_init__(self):
        object.__setattr__(self, "K_p", _pair(self.K_p, "K_p"))
        object.__setattr__(self, "K_d", _pair(self.K_d, "K_d"))
        object.__setattr__(self, "p_ref", _pair(self.p_ref, "p_ref"))
        object.__setattr__(self, "F_peak", _pair(self.F_peak, "F_peak"))
        object.__setattr__(self, "bezier", tuple(float(v) for v in self.bezier))
        object.__setattr__(self, "cpr", int(self.cpr))
        object.__setattr__(self, "debounce_ticks", int(self.debounce_ticks))
        self.validate()

    def validate(self):
        for name in ("K_p", "K_d"):
            if min(getattr(self, name)) < 0.0:
                raise ValidationError(name, "gains must be >= 0")
        for name in ("T_s", "blend_time", "period", "lam"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0.0):
                raise ValidationError(name, f"must be > 0, got {value}")
        for name in ("k_v_assumed", "backlash"):
            if not getattr(self, name) >= 0.0:
                raise ValidationError(name, "must be >= 0")
        if self.cpr < 1:
            raise ValidationError("cpr", "must be a positive count")
        if self.debounce_ticks < 0:
            raise ValidationError("debounce_ticks", "must be >= 0")
        if len(self.bezier) < 2:
            raise ValidationError("bezier", "needs at least two control points")
        if self.bezier[0] != 0.0 or self.bezier[-1] != 0.0:
            raise ValidationError("bezier", "first and last control points must be 0")
        if bezier_shape_max(self.bezier) <= 0.0:
            raise ValidationError("bezier", "profile must have a positive maximum")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def bernstein(points, s):
    """Evaluate a 1-D Bezier curve with the given control points."""
    n = len(points) - 1
    s = np.asarray(s, dtype=float)
    return sum(p * comb(n, i) * s**i * (1 - s) ** (n - i) for i, p in enumerate(points))


def bezier_shape_max(points):
    """Largest value of the Bezier curve on [0, 1]."""
    return _shape_max(tuple(float(p) for p in points))


@lru_cache(maxsize=64)
def _shape_max(points):
    n = len(points) - 1
    # power-basis coefficients, then the stationary points of the polynomial
    poly = np.polynomial.Polynomial([0.0])
    for i, p in enumerate(points):
        term = np.polynomial.Polynomial([comb(n, i) * p])
        term *= np.polynomial.Polynomial([0.0, 1.0]) ** i
        term *= np.polynomial.Polynomial([1.0, -1.0]) ** (n - i)
        poly += term
    roots = poly.deriv().roots()
    cands = [0.0, 1.0] + [r.real for r in roots if abs(r.imag) < 1e-12 and 0.0 <= r.real <= 1.0]
    return float(max(poly(c) for c in cands))


@dataclass(frozen=True)
class SensorReading:
    theta: np.ndarray  # (hip, knee) as reported by the encoders [rad]
    contact: bool
    t: float


def angle_quantum(gear_ratio, cpr=28):
    return 2.0 * np.pi / (cpr * gear_ratio)


def quantize(theta, quantum):
    return np.round(np.asarray(theta, dtype=float) / quantum) * quantum


def aerial_torque(config, model, q_leg, v_foot_hip):
    """Task-space PD on the foot position in the hip frame, mapped by J_c^T."""
    q_leg = np.asarray(q_leg, dtype=float)
    p = foot_in_hip(model, q_leg[0], q_leg[1])
    Jc = contact_jacobian(model, np.array([0.0, 0.0, q_leg[0], q_leg[1]]))
    F = (np.asarray(config.K_p) * (np.asarray(config.p_ref) - p)
         - np.asarray(config.K_d) * np.asarray(v_foot_hip, dtype=float))
    return Jc.T @ F


def bezier_force(config, s):
    """Desired foot force (Y, Z) at normalised stance time s."""
    s = float(np.clip(s, 0.0, 1.0))
    shape = bernstein(config.bezier, s) / bezier_shape_max(config.bezier)
    return np.asarray(config.F_peak) * shape


def stance_torque(config, model, q_leg, F_dGRF):
    """Leg torques that press the foot against the ground with F_dGRF."""
    q_leg = np.asarray(q_leg, dtype=float)
    Jc = contact_jacobian(model, np.array([0.0, 0.0, q_leg[0], q_leg[1]]))
    return Jc.T @ np.asarray(F_dGRF, dtype=float)


def blend_weight(t_since_touchdown, blend_time):
    return float(np.clip(t_since_touchdown / blend_time, 0.0, 1.0))


def blend(u_stance, u_aerial, t_since_touchdown, blend_time):
    a = blend_weight(t_since_touchdown, blend_time)
    return a * np.asarray(u_stance, dtype=float) + (1.0 - a) * np.asarray(u_aerial, dtype=float)


@dataclass
class FilteredDerivative:
    """Backward-difference realisation of lambda s / (lambda + s)."""

    period: float
    lam: float
    previous: np.ndarray | None = None
    estimate: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def step(self, theta):
        self.previous, self.estimate = filtered_derivative_step(
            (self.previous, self.estimate), theta, self.period, self.lam)
        return self.estimate

    def reset(self):
        self.previous = None
        self.estimate = np.zeros_like(self.estimate)


def filtered_derivative_step(state, theta_sample, T, lam):
    """One update y_k = (lam (theta_k - theta_{k-1}) + y_{k-1}) / (1 + lam T).

    ``state`` is ``(theta_prev, y_prev)``; a ``None`` previous sample starts
    the filter at rest.  Returns the new ``(theta, y)``.
    """
    prev, y = state
    theta = np.asarray(theta_sample, dtype=float)
    if prev is None:
        return theta.copy(), np.zeros_like(theta)
    y = (lam * (theta - prev) + y) / (1.0 + lam * T)
    return theta.copy(), y


class Backlash:
    """Play operator: the output follows the input only once the gap closes."""

    def __init__(self, width):
        self.width = width
        self.output = None

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.output is None or self.width == 0.0:
            self.output = theta.copy()
            return self.output
        half = 0.5 * self.width
        self.output = np.clip(self.output, theta - half, theta + half)
        return self.output


@dataclass
class ControllerLog:
    alpha: float = 0.0
    stance_s: float = 0.0
    tau_aerial: np.ndarray = field(default_factory=lambda: np.zeros(2))
    tau_stance: np.ndarray = field(default_factory=lambda: np.zeros(2))
    tau_command: np.ndarray = field(default_factory=lambda: np.zeros(2))
    thetadot_est: np.ndarray = field(default_factory=lambda: np.zeros(2))


class Controller:
    """Discrete hopping controller with encoder and contact-switch emulation."""

    def __init__(self, config, model):
        self.config = config
        self.model = model
        self.quanta = np.array([angle_quantum(model.N_H, config.cpr),
                                angle_quantum(model.N_K, config.cpr)])
        self.reset()

    def reset(self):
        self.filter = FilteredDerivative(self.config.period, self.config.lam)
        self.backlash = Backlash(self.config.backlash)
        self.alpha = 0.0
        self._ramp = -1.0
        self._contact = False
        self._raw_contact = False
        self._debounce = 0
        self.t_touchdown = None
        self.log = ControllerLog()
        self.command = MotorCommand.zero()

    def sense(self, q, in_contact, t):
        """Encoder counts and contact switch as the microcontroller sees them."""
        theta = self.backlash(np.asarray(q, dtype=float)[2:4])
        return SensorReading(quantize(theta, self.quanta), bool(in_contact), float(t))

    def _debounced(self, raw):
        n = self.config.debounce_ticks
        if n == 0:
            return raw
        if raw != self._raw_contact:
            self._debounce = 0
        self._raw_contact = raw
        self._debounce += 1
        if raw != self._contact and self._debounce >= n:
            return raw
        return self._contact

    def step(self, reading):
        cfg = self.config
        thetadot = self.filter.step(reading.theta)
        contact = self._debounced(reading.contact)
        if contact and not self._contact:
            self.t_touchdown = reading.t
        self._contact = contact

        # alpha is rate limited; the direction decided last tick applies now
        self.alpha = float(np.clip(self.alpha + self._ramp * cfg.period / cfg.blend_time, 0.0, 1.0))

        s = 1.0
        F = np.zeros(2)
        if contact:
            s = (reading.t - self.t_touchdown) / cfg.T_s
            if s <= 1.0:
                F = bezier_force(cfg, s)
        self._ramp = 1.0 if (contact and s <= 1.0) else -1.0

        Jc = contact_jacobian(self.model, np.array([0.0, 0.0, *reading.theta]))
        tau_a = aerial_torque(cfg, self.model, reading.theta, Jc @ thetadot)
        tau_s = Jc.T @ F
        tau = self.alpha * tau_s + (1.0 - self.alpha) * tau_a

        self.command = torque_to_voltage(self.model, tau, thetadot, k_v=cfg.k_v_assumed)
        self.log = ControllerLog(self.alpha, s, tau_a, tau_s, tau, thetadot.copy())
        return self.command


def control_step(config, model, reading, controller=None):
    """Functional entry point; ``controller`` carries the internal state."""
    controller = Controller(config, model) if controller is None else controller
    return controller.step(reading)
