"""Manipulator-equation terms, flight and stance accelerations, impact map.

M(q) is assembled from the CoM and angular-velocity Jacobians of the four
moving bodies.  Its partial derivatives come from closed-form cross products
(or central differences when ``model.derivatives == "fd"``), and C(q, qdot)
is built from the Christoffel symbols of M so that Mdot - 2C is skew.

Actuator augmentation: every solve uses M + M_r and C + B_EMF.  The plant
input is B_e u (plus the knee spring), so the back-EMF term lives only here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hoppysim import _kernel
from hoppysim.errors import SingularKKT, SingularMass
from hoppysim.kinematics import holonomic_jacobian

COND_LIMIT = 1e12


@dataclass(frozen=True)
class DynamicsTerms:
    M: np.ndarray
    C: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class ContactSolution:
    qddot: np.ndarray
    F_GRF: np.ndarray  # (F_Yhc, F_Zhc), force of the ground on the foot


@dataclass(frozen=True)
class ImpactResult:
    qdot_plus: np.ndarray
    F_imp: np.ndarray


def _mass_terms(model, q, partials):
    masses, coms, inertias = model.moving_bodies
    return _kernel.mass_terms(model.geometry, masses, coms, inertias, float(model.g),
                              np.asarray(q, dtype=float), partials)


def mass_matrix(model, q):
    """Rigid-body inertia matrix M(q), without rotor inertia."""
    return _mass_terms(model, q, False)[0]


def mass_matrix_partials(model, q):
    """dM/dq_k stacked as (4, 4, 4) indexed [k, i, j]."""
    q = np.asarray(q, dtype=float)
    if model.derivatives == "fd":
        h = 1e-6
        dM = np.empty((4, 4, 4))
        for k in range(4):
            e = np.zeros(4)
            e[k] = h
            dM[k] = (mass_matrix(model, q + e) - mass_matrix(model, q - e)) / (2 * h)
        return dM
    return _mass_terms(model, q, True)[1]


def coriolis_matrix(dM, qdot):
    """C(q, qdot) from Christoffel symbols of the first kind."""
    a = np.einsum("kij,k->ij", dM, qdot)
    b = np.einsum("jik,k->ij", dM, qdot)
    c = np.einsum("ijk,k->ij", dM, qdot)
    return 0.5 * (a + b - c)


def mass_matrix_rate(dM, qdot):
    return np.einsum("kij,k->ij", dM, qdot)


def dynamics_terms(model, q, qdot):
    qdot = np.asarray(qdot, dtype=float)
    analytic = model.derivatives == "analytic"
    M, dM, G = _mass_terms(model, q, analytic)
    if not analytic:
        dM = mass_matrix_partials(model, q)
    return DynamicsTerms(M, coriolis_matrix(dM, qdot), G)


def potential_energy(model, q, spring=False):
    """Gravitational potential, plus the knee spring if asked."""
    masses, coms, _ = model.moving_bodies
    R, o, _, _ = _kernel.chain(model.geometry, np.asarray(q, dtype=float))
    z = o[:, 2] + np.einsum("ib,ib->i", R[:, 2, :], coms)
    V = model.g * float(masses @ z)
    if spring:
        V += 0.5 * model.k_s * (q[3] - model.theta4_rest) ** 2
    return V


def kinetic_energy(model, q, qdot, rotor=True):
    M = mass_matrix(model, q)
    if rotor:
        M = M + model.rotor_inertia
    return 0.5 * float(qdot @ M @ qdot)


def augmented_terms(model, q, qdot, rotor=True, emf=True):
    """(M + M_r, (C + B_EMF) qdot + G) for the actuated plant."""
    terms = dynamics_terms(model, q, qdot)
    M = terms.M + model.rotor_inertia if rotor else terms.M
    C = terms.C + model.emf_damping if emf else terms.C
    return M, C @ qdot + terms.G


def _check_mass(M):
    if not np.all(np.isfinite(M)) or np.linalg.cond(M) > COND_LIMIT:
        raise SingularMass("augmented mass matrix condition number exceeds 1e12")


def _kkt(M, J):
    K = np.zeros((6, 6))
    K[:4, :4] = M
    K[:4, 4:] = -J.T
    K[4:, :4] = J
    if not np.all(np.isfinite(K)) or np.linalg.cond(K) > COND_LIMIT:
        raise SingularKKT("constrained block system is rank deficient")
    return K


def flight_accel(model, q, qdot, tau, rotor=True, emf=True):
    """Unconstrained accelerations of the augmented manipulator equation."""
    M, h = augmented_terms(model, q, qdot, rotor, emf)
    _check_mass(M)
    return np.linalg.solve(M, np.asarray(tau, dtype=float) - h)


def stance_solve(model, q, qdot, tau, frame, rotor=True, emf=None):
    """Joint accelerations and ground reaction force with the foot pinned."""
    emf = model.emf_in_stance if emf is None else emf
    qdot = np.asarray(qdot, dtype=float)
    M, h = augmented_terms(model, q, qdot, rotor, emf)
    J, Jdot = holonomic_jacobian(model, q, frame, qdot)
    K = _kkt(M, J)
    rhs = np.concatenate([np.asarray(tau, dtype=float) - h, -Jdot @ qdot])
    x = np.linalg.solve(K, rhs)
    return ContactSolution(x[:4], x[4:])


def impact_map(model, q, qdot_minus, frame, rotor=True):
    """Post-impact velocities and impulse for a perfectly inelastic touchdown."""
    M = mass_matrix(model, q)
    if rotor:
        M = M + model.rotor_inertia
    J, _ = holonomic_jacobian(model, q, frame)
    K = _kkt(M, J)
    rhs = np.concatenate([M @ np.asarray(qdot_minus, dtype=float), np.zeros(2)])
    x = np.linalg.solve(K, rhs)
    return ImpactResult(x[:4], x[4:])
