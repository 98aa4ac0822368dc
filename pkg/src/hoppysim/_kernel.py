"""Compiled inner loops for the chain kinematics and the manipulator terms.

Everything here works on plain float arrays so numba can compile it.  The
public, documented entry points live in :mod:`hoppysim.kinematics` and
:mod:`hoppysim.dynamics`; these functions are their hot path.

Geometry vector ``geom`` = (H_B, L_B, thigh_length, shank_length).
Column partials follow the revolute-chain identities
    d(a_j x r)/dq_k = a_k x (a_j x r)         for k < j
                    = a_j x (a_k x (p - c_k))  for k >= j
where a_j is a joint axis, c_j a point on it and r = p - c_j.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def chain(geom, q):
    """World rotations/origins of frames B, H, K, F plus joint axes and pivots."""
    H, L, l1, l2 = geom[0], geom[1], geom[2], geom[3]
    c0, s0 = np.cos(q[0]), np.sin(q[0])
    c1, s1 = np.cos(q[1]), np.sin(q[1])
    c2, s2 = np.cos(q[2]), np.sin(q[2])
    c3, s3 = np.cos(q[3]), np.sin(q[3])

    R = np.zeros((4, 3, 3))
    o = np.zeros((4, 3))

    R0 = R[0]
    R0[0, 0], R0[0, 1] = c0, -s0
    R0[1, 0], R0[1, 1] = s0, c0
    R0[2, 2] = 1.0
    o[0, 2] = H

    # Ry(q1) followed by the x-flip diag(1, -1, -1)
    Ry = np.array([[c1, 0.0, s1], [0.0, 1.0, 0.0], [-s1, 0.0, c1]])
    RyF = Ry.copy()
    for r in range(3):
        RyF[r, 1] = -Ry[r, 1]
        RyF[r, 2] = -Ry[r, 2]
    R[1] = R0 @ RyF
    o[1] = o[0] + L * np.array([c0 * c1, s0 * c1, -s1])

    Rx2 = np.array([[1.0, 0.0, 0.0], [0.0, c2, -s2], [0.0, s2, c2]])
    R[2] = R[1] @ Rx2
    o[2] = o[1] + l1 * R[2][:, 2]

    Rx3 = np.array([[1.0, 0.0, 0.0], [0.0, c3, -s3], [0.0, s3, c3]])
    R[3] = R[2] @ Rx3
    o[3] = o[2] + l2 * R[3][:, 2]

    A = np.zeros((4, 3))
    A[0, 2] = 1.0
    A[1] = R[0][:, 1]
    A[2] = R[1][:, 0]
    A[3] = R[2][:, 0]
    C = np.empty((4, 3))
    C[0] = o[0]
    C[1] = o[0]
    C[2] = o[1]
    C[3] = o[2]
    return R, o, A, C


@njit(cache=True)
def _point_columns(A, C, p, body):
    cols = np.zeros((4, 3))
    for j in range(body + 1):
        cols[j] = _cross(A[j], p - C[j])
    return cols


@njit(cache=True)
def _column_partials(A, cols):
    """d cols[j] / dq_k as [k, j, xyz]."""
    d = np.zeros((4, 4, 3))
    for k in range(4):
        for j in range(4):
            if k < j:
                d[k, j] = _cross(A[k], cols[j])
            else:
                d[k, j] = _cross(A[j], cols[k])
    return d


@njit(cache=True)
def foot_terms(geom, q, qdot):
    """Foot position, world Jacobian (3x4) and its time derivative."""
    R, o, A, C = chain(geom, q)
    foot = o[3].copy()
    cols = _point_columns(A, C, foot, 3)
    d = _column_partials(A, cols)
    J = np.empty((3, 4))
    Jdot = np.zeros((3, 4))
    for j in range(4):
        J[:, j] = cols[j]
        for k in range(4):
            Jdot[:, j] += d[k, j] * qdot[k]
    return foot, J, Jdot


@njit(cache=True)
def _dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@njit(cache=True)
def mass_terms(geom, masses, coms, inertias, g, q, partials):
    """M(q), dM/dq (k, i, j) and the gravity vector G(q)."""
    R, o, A, C = chain(geom, q)
    M = np.zeros((4, 4))
    dM = np.zeros((4, 4, 4))
    G = np.zeros(4)
    # A_k x A_j for k < j: rate of angular-velocity column j along q_k
    AxA = np.zeros((4, 4, 3))
    for k in range(4):
        for j in range(k + 1, 4):
            AxA[k, j] = _cross(A[k], A[j])
    Jw = np.zeros((4, 3))
    IJw = np.zeros((4, 3))
    dIw = np.zeros((3, 3))
    for b in range(4):
        m = masses[b]
        p = o[b] + R[b] @ coms[b]
        Iw = R[b] @ inertias[b] @ R[b].T
        Jv = _point_columns(A, C, p, b)
        Jw[:] = 0.0
        IJw[:] = 0.0
        for j in range(b + 1):
            Jw[j] = A[j]
            IJw[j] = Iw @ A[j]
        for j in range(b + 1):
            G[j] += g * m * Jv[j, 2]
            for l in range(j, b + 1):
                v = m * _dot3(Jv[j], Jv[l]) + _dot3(Jw[j], IJw[l])
                M[j, l] += v
                if l != j:
                    M[l, j] += v
        if not partials:
            continue
        dJv = _column_partials(A, Jv)
        for k in range(b + 1):
            # rate of the world inertia tensor: [a_k]x Iw - Iw [a_k]x
            a = A[k]
            for col in range(3):
                x, y, z = Iw[0, col], Iw[1, col], Iw[2, col]
                dIw[0, col] = a[1] * z - a[2] * y
                dIw[1, col] = a[2] * x - a[0] * z
                dIw[2, col] = a[0] * y - a[1] * x
            for r in range(3):
                for col in range(r, 3):
                    v = dIw[r, col] + dIw[col, r]
                    dIw[r, col] = v
                    dIw[col, r] = v
            for j in range(b + 1):
                for l in range(j, b + 1):
                    v = m * (_dot3(dJv[k, j], Jv[l]) + _dot3(Jv[j], dJv[k, l]))
                    v += _dot3(AxA[k, j], IJw[l]) + _dot3(IJw[j], AxA[k, l])
                    acc = 0.0
                    for r in range(3):
                        acc += Jw[j, r] * _dot3(dIw[r], Jw[l])
                    v += acc
                    dM[k, j, l] += v
                    if l != j:
                        dM[k, l, j] += v
    return M, dM, G


@njit(cache=True)
def coriolis(dM, qdot):
    """C from Christoffel symbols: C_ij = 1/2 sum_k (dM_kij + dM_jik - dM_ijk) qdot_k."""
    C = np.zeros((4, 4))
    for i in range(4):
        for j in range(4):
            acc = 0.0
            for k in range(4):
                acc += (dM[k, i, j] + dM[j, i, k] - dM[i, j, k]) * qdot[k]
            C[i, j] = 0.5 * acc
    return C


@njit(cache=True)
def _augmented(geom, masses, coms, inertias, g, rotor, damping, q, qdot):
    M, dM, G = mass_terms(geom, masses, coms, inertias, g, q, True)
    C = coriolis(dM, qdot)
    for i in range(4):
        M[i, i] += rotor[i]
        C[i, i] += damping[i]
    return M, C @ qdot + G


@njit(cache=True)
def flight_rhs(geom, masses, coms, inertias, g, rotor, damping, q, qdot, tau, cond_limit):
    """Flight accelerations; NaNs signal an ill-conditioned mass matrix."""
    M, h = _augmented(geom, masses, coms, inertias, g, rotor, damping, q, qdot)
    if np.linalg.cond(M) > cond_limit:
        return np.full(4, np.nan)
    return np.linalg.solve(M, tau - h)


@njit(cache=True)
def stance_rhs(geom, masses, coms, inertias, g, rotor, damping, q, qdot, tau, P, cond_limit):
    """Stance accelerations and constraint force (6-vector); NaNs when singular."""
    M, h = _augmented(geom, masses, coms, inertias, g, rotor, damping, q, qdot)
    _, Jw, Jdotw = foot_terms(geom, q, qdot)
    J = P @ Jw
    K = np.zeros((6, 6))
    K[:4, :4] = M
    K[:4, 4:] = -J.T
    K[4:, :4] = J
    rhs = np.empty(6)
    rhs[:4] = tau - h
    rhs[4:] = -(P @ Jdotw) @ qdot
    if np.linalg.cond(K) > cond_limit:
        return np.full(6, np.nan)
    return np.linalg.solve(K, rhs)
