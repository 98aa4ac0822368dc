"""Geared DC motor model: torque/voltage maps, saturation, operating region.

With coil inductance neglected, a motor behind a gearbox of ratio N obeys

    tau = (k_T N / R_w) V - (k_T k_v N^2 / R_w) thetadot

Back-EMF ownership: the plant (``dynamics``) already carries the
speed-dependent part as the damping matrix B_EMF and takes B_e V as input.
:func:`effective_joint_torque` computes the full expression for diagnostics
and saturation checks only.  The one thing the plant does take from here is
:func:`plant_input_torque`, which is B_e V plus a correction that is non-zero
only while the driver current limit is active.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

JOINTS = ("hip", "knee")


def _joint_index(joint):
    key = str(joint).lower()
    if key in ("hip", "h", "0"):
        return 0
    if key in ("knee", "k", "1"):
        return 1
    raise ValueError(f"unknown joint {joint!r}; expected 'hip' or 'knee'")


def torque_gain(model):
    """k_T N / R_w per leg joint [N m / V]."""
    return model.k_T * model.gear_ratios / model.R_w


def torque_limit(model):
    """Current-limited torque k_T N I_max per leg joint [N m]."""
    return model.k_T * model.gear_ratios * model.I_max


def stall_torque(model):
    """Torque at V_max and zero speed."""
    return model.V_max * model.gear_ratios * model.k_T / model.R_w


def no_load_speed(model):
    """Joint speed at V_max where the motor torque vanishes."""
    if model.k_v <= 0.0:
        raise ValueError("no-load speed is unbounded when k_v = 0")
    return model.V_max / (model.k_v * model.gear_ratios)


@dataclass(frozen=True)
class MotorCommand:
    """Saturated terminal voltages plus what went into them."""

    V: np.ndarray
    tau_request: np.ndarray = field(default_factory=lambda: np.zeros(2))
    current: np.ndarray = field(default_factory=lambda: np.zeros(2))
    voltage_saturated: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=bool))
    current_saturated: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=bool))

    @property
    def V_H(self):
        return float(self.V[0])

    @property
    def V_K(self):
        return float(self.V[1])

    @property
    def saturated(self):
        return bool(np.any(self.voltage_saturated) or np.any(self.current_saturated))

    @classmethod
    def zero(cls):
        return cls(np.zeros(2))


def torque_to_voltage(model, tau_leg, thetadot_est, k_v=None):
    """Voltages that would produce ``tau_leg`` at the estimated joint speeds.

    ``k_v`` overrides the speed constant used for the feed-forward term (the
    controller usually assumes 0).  The requested current is clamped to
    I_max first, which reduces the torque, and the resulting voltage is then
    clamped to V_max.
    """
    tau = np.asarray(tau_leg, dtype=float)
    w = np.asarray(thetadot_est, dtype=float)
    k_v = model.k_v if k_v is None else k_v
    N = model.gear_ratios

    current = tau / (model.k_T * N)
    i_sat = np.abs(current) > model.I_max
    current = np.clip(current, -model.I_max, model.I_max)
    tau_ok = current * model.k_T * N

    V = model.R_w * tau_ok / (model.k_T * N) + k_v * N * w
    v_sat = np.abs(V) > model.V_max
    V = np.clip(V, -model.V_max, model.V_max)
    return MotorCommand(V, tau, current, v_sat, i_sat)


def driver_current(model, V, thetadot, k_v=None):
    """Motor current with the driver's current limit active.

    When the open-loop current (V - k_v N thetadot) / R_w exceeds I_max the
    driver lowers its output voltage until the current sits on the limit.
    It cannot leave the +-V_max supply, so at speeds where even V_max cannot
    hold the current back the motor is back-driven past I_max.
    """
    V = np.asarray(V, dtype=float)
    w = np.asarray(thetadot, dtype=float)
    k_v = model.k_v if k_v is None else k_v
    emf = k_v * model.gear_ratios * w
    i = np.clip((V - emf) / model.R_w, -model.I_max, model.I_max)
    V_drv = np.clip(model.R_w * i + emf, -model.V_max, model.V_max)
    return (V_drv - emf) / model.R_w


def effective_joint_torque(model, V, thetadot, k_v=None):
    """Torque the motor delivers at the joint, including the current limit."""
    return model.k_T * model.gear_ratios * driver_current(model, V, thetadot, k_v)


def plant_input_torque(model, V, thetadot, emf=True):
    """Leg torque handed to the plant, B_e V plus the current-limit correction.

    The plant subtracts B_EMF thetadot on its own, so the sum of the two
    equals :func:`effective_joint_torque`.  With ``emf=False`` (stance
    comparison runs) the limit is checked against B_e V alone.
    """
    V = np.asarray(V, dtype=float)
    gain = torque_gain(model)
    tau_in = gain * V
    k_v = model.k_v if emf else 0.0
    raw = tau_in - gain * k_v * model.gear_ratios * np.asarray(thetadot, dtype=float)
    return tau_in + (effective_joint_torque(model, V, thetadot, k_v) - raw)


@dataclass(frozen=True)
class OperatingPolygon:
    """Achievable (torque, speed) region of one leg joint.

    Bounded by the current lines |tau| <= tau_max and the voltage lines
    |R_w tau / (k_T N) + k_v N thetadot| <= V_max.  Vertices run
    counter-clockwise in the (tau, thetadot) plane.
    """

    joint: str
    vertices: np.ndarray
    tau_max: float
    a: float  # R_w / (k_T N)  [V / N m]
    b: float  # k_v N          [V s / rad]
    V_max: float

    def margins(self, tau, thetadot):
        """Slack of each constraint (>= 0 inside), stacked on the last axis."""
        tau = np.asarray(tau, dtype=float)
        w = np.asarray(thetadot, dtype=float)
        v = self.a * tau + self.b * w
        return np.stack([self.tau_max - tau, self.tau_max + tau,
                         self.V_max - v, self.V_max + v], axis=-1)

    def _scaled_margins(self, tau, thetadot):
        # normalise so the tolerance is a relative distance to each line
        m = self.margins(tau, thetadot)
        return m / np.array([self.tau_max, self.tau_max, self.V_max, self.V_max])

    def contains(self, tau, thetadot, tol=1e-9):
        return np.all(self._scaled_margins(tau, thetadot) >= -tol, axis=-1)

    def on_boundary(self, tau, thetadot, tol=1e-9):
        m = self._scaled_margins(tau, thetadot)
        return np.all(m >= -tol, axis=-1) & np.any(np.abs(m) <= tol, axis=-1)


def operating_polygon(model, joint):
    i = _joint_index(joint)
    N = model.gear_ratios[i]
    if model.k_v <= 0.0:
        raise ValueError("operating polygon is unbounded in speed when k_v = 0")
    tau_max = model.k_T * N * model.I_max
    a = model.R_w / (model.k_T * N)
    b = model.k_v * N
    Vm = model.V_max
    vertices = np.array([
        [tau_max, (-Vm - a * tau_max) / b],
        [tau_max, (Vm - a * tau_max) / b],
        [-tau_max, (Vm + a * tau_max) / b],
        [-tau_max, (-Vm + a * tau_max) / b],
    ])
    return OperatingPolygon(JOINTS[i], vertices, tau_max, a, b, Vm)
