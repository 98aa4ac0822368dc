"""Physical parameters, state containers and the knee spring.

The robot is a five-body chain: a fixed base, the rotating gantry post
(joint 1, vertical axis), the gantry boom carrying the hip hardware and both
motors (joint 2, pitch), the thigh (joint 3, hip) and the shank (joint 4,
knee).  A counterweight point mass sits on the boom on the far side of the
pitch joint.

The numbers returned by :func:`default_model` are repository defaults chosen
to give a plausible, hoppable robot.  They are not measurements of any
physical kit.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from hoppysim.errors import ValidationError

LINK_NAMES = ("base", "post", "boom", "thigh", "shank")


class Phase(enum.Enum):
    FLIGHT = "flight"
    STANCE = "stance"


@dataclass(frozen=True)
class LinkInertia:
    """Mass properties of one body, expressed in that body's link frame."""

    mass: float
    com: tuple = (0.0, 0.0, 0.0)
    inertia: tuple = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "com", tuple(float(c) for c in self.com))
        object.__setattr__(
            self, "inertia", tuple(tuple(float(v) for v in row) for row in self.inertia)
        )

    def validate(self, name):
        if not self.mass > 0.0:
            raise ValidationError(f"{name}.mass", f"must be > 0, got {self.mass}")
        if len(self.com) != 3 or not np.all(np.isfinite(self.com)):
            raise ValidationError(f"{name}.com", "must be a finite 3-vector")
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3) or not np.all(np.isfinite(inertia)):
            raise ValidationError(f"{name}.inertia", "must be a finite 3x3 matrix")
        if not np.allclose(inertia, inertia.T, rtol=0.0, atol=1e-12):
            raise ValidationError(f"{name}.inertia", "must be symmetric")
        if np.linalg.eigvalsh(inertia).min() < -1e-12:
            raise ValidationError(f"{name}.inertia", "must be positive semi-definite")


def _diag(ixx, iyy, izz):
    return ((ixx, 0.0, 0.0), (0.0, iyy, 0.0), (0.0, 0.0, izz))


@dataclass(frozen=True)
class RobotModel:
    """All geometric, inertial, actuator and spring parameters.

    Link frames (see :mod:`hoppysim.kinematics` for the transforms):

    * base  -> frame 0 (world, origin on the floor at the gantry axis)
    * post  -> frame B (top of the post, rotates with theta1)
    * boom  -> frame H (at the hip, x along the boom, z pointing down the leg)
    * thigh -> frame K (at the knee)
    * shank -> frame F (at the foot)
    """

    gantry_height: float = 0.30  # H_B [m]
    gantry_length: float = 0.75  # L_B [m]
    thigh_length: float = 0.16  # hip to knee [m]
    shank_length: float = 0.16  # knee to foot [m]

    base: LinkInertia = LinkInertia(0.30, (0.0, 0.0, 0.02), _diag(1e-3, 1e-3, 1e-3))
    post: LinkInertia = LinkInertia(0.15, (0.0, 0.0, -0.15), _diag(1.2e-3, 1.2e-3, 5e-5))
    boom: LinkInertia = LinkInertia(0.60, (-0.15, 0.0, 0.0), _diag(1e-3, 2e-2, 2e-2))
    thigh: LinkInertia = LinkInertia(0.12, (0.0, 0.0, -0.08), _diag(2.6e-4, 2.6e-4, 1e-5))
    shank: LinkInertia = LinkInertia(0.08, (0.0, 0.0, -0.08), _diag(1.8e-4, 1.8e-4, 5e-6))

    counterweight_mass: float = 2.3  # [kg]
    counterweight_arm: float = 0.15  # distance from the pitch joint [m]

    R_w: float = 1.3  # coil resistance [ohm]
    k_T: float = 0.0187  # torque constant [N m / A]
    k_v: float = 0.0187  # speed constant [V s / rad]
    I_r: float = 3e-6  # rotor inertia [kg m^2]
    N_H: float = 26.9
    N_K: float = 28.8

    k_s: float = 2.0  # knee spring stiffness [N m / rad]
    theta4_rest: float = 0.3  # [rad]

    V_max: float = 12.0
    I_max: float = 30.0
    g: float = 9.81

    # back-EMF damping during stance; off only for comparison studies
    emf_in_stance: bool = True
    # "analytic" or "fd" for dM/dq and the Jacobian rate
    derivatives: str = "analytic"

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("gantry_height", "gantry_length", "thigh_length", "shank_length",
                     "counterweight_mass", "counterweight_arm", "R_w", "k_T", "g"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0.0):
                raise ValidationError(name, f"must be > 0, got {value}")
        for name in ("k_v", "I_r", "k_s"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0.0):
                raise ValidationError(name, f"must be >= 0, got {value}")
        for name in ("N_H", "N_K"):
            if not getattr(self, name) >= 1.0:
                raise ValidationError(name, f"gear ratio must be >= 1, got {getattr(self, name)}")
        for name in ("V_max", "I_max"):
            if not getattr(self, name) > 0.0:
                raise ValidationError(name, f"must be > 0, got {getattr(self, name)}")
        if not np.isfinite(self.theta4_rest):
            raise ValidationError("theta4_rest", "must be finite")
        if self.derivatives not in ("analytic", "fd"):
            raise ValidationError("derivatives", "must be 'analytic' or 'fd'")
        for name in LINK_NAMES:
            link = getattr(self, name)
            if not isinstance(link, LinkInertia):
                raise ValidationError(name, "must be a LinkInertia")
            link.validate(name)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @property
    def gear_ratios(self):
        return np.array([self.N_H, self.N_K])

    @property
    def total_mass(self):
        return sum(getattr(self, n).mass for n in LINK_NAMES) + self.counterweight_mass

    @cached_property
    def moving_bodies(self):
        """Mass, CoM and inertia of the four moving bodies as stacked arrays.

        The counterweight is lumped into the boom.  Returns
        ``(masses (4,), coms (4, 3), inertias (4, 3, 3))`` in link-frame
        coordinates of frames B, H, K, F respectively.
        """
        links = [self.post, self.boom, self.thigh, self.shank]
        masses = np.array([lk.mass for lk in links])
        coms = np.array([lk.com for lk in links])
        inertias = np.array([lk.inertia for lk in links])

        # counterweight on the boom, opposite side of the pitch joint from the hip
        m_b, c_b = masses[1], coms[1]
        m_cw = self.counterweight_mass
        c_cw = np.array([-(self.gantry_length + self.counterweight_arm), 0.0, 0.0])
        m = m_b + m_cw
        c = (m_b * c_b + m_cw * c_cw) / m
        d_b, d_cw = c_b - c, c_cw - c
        eye = np.eye(3)
        inertia = (inertias[1]
                   + m_b * (d_b @ d_b * eye - np.outer(d_b, d_b))
                   + m_cw * (d_cw @ d_cw * eye - np.outer(d_cw, d_cw)))
        masses[1], coms[1], inertias[1] = m, c, inertia
        return masses, coms, inertias

    @cached_property
    def geometry(self):
        return np.array([self.gantry_height, self.gantry_length,
                         self.thigh_length, self.shank_length])

    @cached_property
    def rotor_inertia(self):
        """Reflected rotor inertia M_r (4x4)."""
        return np.diag([0.0, 0.0, self.I_r * self.N_H**2, self.I_r * self.N_K**2])

    @cached_property
    def emf_damping(self):
        """Back-EMF damping B_EMF (4x4)."""
        gain = self.k_v * self.k_T / self.R_w
        return np.diag([0.0, 0.0, gain * self.N_H**2, gain * self.N_K**2])

    @cached_property
    def input_map(self):
        """Voltage-to-torque selection matrix B_e (4x2)."""
        b = np.zeros((4, 2))
        b[2, 0] = self.k_T * self.N_H / self.R_w
        b[3, 1] = self.k_T * self.N_K / self.R_w
        return b


def spring_torque(model, theta4):
    """Knee spring torque, a linear torsional law about the rest angle."""
    return -model.k_s * (theta4 - model.theta4_rest)


def default_model():
    return RobotModel()


@dataclass(frozen=True)
class ContactFrame:
    """Foothold frame: Z vertical, X along the horizontal base-to-foot line."""

    origin: np.ndarray
    rotation: np.ndarray

    @property
    def x_axis(self):
        return self.rotation[:, 0]

    @property
    def y_axis(self):
        return self.rotation[:, 1]

    @property
    def z_axis(self):
        return self.rotation[:, 2]

    @property
    def constrained_axes(self):
        """Rows (Y_hc, Z_hc) used to project world velocities (2x3)."""
        return self.rotation[:, 1:].T


@dataclass
class SystemState:
    q: np.ndarray
    qdot: np.ndarray
    phase: Phase = Phase.FLIGHT
    t: float = 0.0
    contact_frame: ContactFrame | None = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(4)
        self.qdot = np.asarray(self.qdot, dtype=float).reshape(4)
        if (self.phase is Phase.STANCE) != (self.contact_frame is not None):
            raise ValueError("contact_frame must be present exactly in stance")

    def copy(self):
        return SystemState(self.q.copy(), self.qdot.copy(), self.phase, self.t, self.contact_frame)


def initial_state(model, theta2=-0.06, leg=(-0.5, 1.0)):
    """A flight state at rest with the boom raised and the knee bent."""
    return SystemState(np.array([0.0, theta2, leg[0], leg[1]]), np.zeros(4))

