"""Homogeneous transforms, forward kinematics and Jacobians.

Frame conventions (all joints revolute):

* ``T0_B``: rotation theta1 about Z0, translation (0, 0, H_B).  Frame 0 sits
  on the floor at the gantry axis, so the ground is the plane z = 0.
* ``TB_H``: boom pitch theta2 about Y_B (positive pitches the hip down),
  hip at distance L_B along the boom.  The hip frame is flipped about its x
  axis so that Z_H points down the leg and Y_H points backwards, against the
  direction of increasing theta1.
* ``TH_K``: hip rotation theta3 about X_H, knee at ``thigh_length`` along Z_K.
* ``TK_F``: knee rotation theta4 about X_K, foot at ``shank_length`` along Z_F.

With theta3 = theta4 = 0 the leg hangs straight down from the hip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hoppysim import _kernel
from hoppysim.errors import DegenerateFrame
from hoppysim.model import ContactFrame


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


_FLIP_X = np.diag([1.0, -1.0, -1.0])


@dataclass(frozen=True)
class HTM:
    """Rigid transform p_parent = R p_child + d."""

    R: np.ndarray
    d: np.ndarray

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @property
    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.d
        return T

    def __matmul__(self, other):
        return HTM(self.R @ other.R, self.R @ other.d + self.d)

    def inverse(self):
        return HTM(self.R.T, -self.R.T @ self.d)

    def apply(self, p):
        return self.R @ np.asarray(p, dtype=float) + self.d


def htm_0_B(model, theta1):
    return HTM(rot_z(theta1), np.array([0.0, 0.0, model.gantry_height]))


def htm_B_H(model, theta2):
    R = rot_y(theta2)
    return HTM(R @ _FLIP_X, R @ np.array([model.gantry_length, 0.0, 0.0]))


def htm_H_K(model, theta3):
    R = rot_x(theta3)
    return HTM(R, R @ np.array([0.0, 0.0, model.thigh_length]))


def htm_K_F(model, theta4):
    R = rot_x(theta4)
    return HTM(R, R @ np.array([0.0, 0.0, model.shank_length]))


def frames(model, q):
    """World transforms of frames B, H, K, F."""
    T_B = htm_0_B(model, q[0])
    T_H = T_B @ htm_B_H(model, q[1])
    T_K = T_H @ htm_H_K(model, q[2])
    T_F = T_K @ htm_K_F(model, q[3])
    return T_B, T_H, T_K, T_F


@dataclass(frozen=True)
class LegPoints:
    hip: np.ndarray
    knee: np.ndarray
    foot: np.ndarray


def forward_kinematics(model, q):
    """Hip, knee and foot positions in frame 0."""
    _, T_H, T_K, T_F = frames(model, q)
    return LegPoints(T_H.d, T_K.d, T_F.d)


def foot_height(model, q):
    return frames(model, q)[3].d[2]


def foot_in_hip(model, theta3, theta4):
    """Foot (y, z) in the hip frame; depends on the leg joints only."""
    l1, l2 = model.thigh_length, model.shank_length
    s3, c3 = np.sin(theta3), np.cos(theta3)
    s34, c34 = np.sin(theta3 + theta4), np.cos(theta3 + theta4)
    return np.array([-(l1 * s3 + l2 * s34), l1 * c3 + l2 * c34])


def contact_jacobian(model, q):
    """J_c: leg joint rates (hip, knee) -> foot velocity (y, z) in the hip frame."""
    l1, l2 = model.thigh_length, model.shank_length
    s3, c3 = np.sin(q[2]), np.cos(q[2])
    s34, c34 = np.sin(q[2] + q[3]), np.cos(q[2] + q[3])
    return np.array([
        [-(l1 * c3 + l2 * c34), -l2 * c34],
        [-(l1 * s3 + l2 * s34), -l2 * s34],
    ])


def foot_jacobian(model, q):
    """World-frame foot Jacobian (3x4)."""
    return _kernel.foot_terms(model.geometry, np.asarray(q, dtype=float), np.zeros(4))[1]


def foot_jacobian_rate(model, q, qdot):
    """Time derivative of the foot Jacobian along qdot."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    if model.derivatives == "fd":
        h = 1e-6
        return (foot_jacobian(model, q + h * qdot) - foot_jacobian(model, q - h * qdot)) / (2 * h)
    return _kernel.foot_terms(model.geometry, q, qdot)[2]


def contact_frame_from_foot(foot):
    foot = np.asarray(foot, dtype=float)
    horizontal = np.array([foot[0], foot[1], 0.0])
    n = np.linalg.norm(horizontal)
    if n < 1e-9:
        raise DegenerateFrame("foot lies on the gantry axis; X_hc is undefined")
    x = horizontal / n
    z = np.array([0.0, 0.0, 1.0])
    y = np.cross(z, x)
    return ContactFrame(origin=foot.copy(), rotation=np.column_stack([x, y, z]))


def make_contact_frame(model, q):
    return contact_frame_from_foot(forward_kinematics(model, q).foot)


def holonomic_jacobian(model, q, frame, qdot=None):
    """Constraint Jacobian J_hc (2x4) and, given qdot, its rate Jdot_hc.

    Rows are the foot velocity along Y_hc and Z_hc.  The foothold frame is
    fixed for the whole stance, so only the foot Jacobian varies in time.
    """
    P = frame.constrained_axes
    q = np.asarray(q, dtype=float)
    if qdot is None:
        return P @ foot_jacobian(model, q), None
    if model.derivatives == "fd":
        return P @ foot_jacobian(model, q), P @ foot_jacobian_rate(model, q, qdot)
    _, J, Jdot = _kernel.foot_terms(model.geometry, q, np.asarray(qdot, dtype=float))
    return P @ J, P @ Jdot
