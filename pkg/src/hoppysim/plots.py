"""Static SVG panels of a simulated run.

One file per panel:

* ``sagittal_path.svg``   hip and foot paths in the Sagittal plane
* ``hip_speed.svg``       hip tangential speed, stance shaded
* ``joint_torques.svg``   delivered hip/knee torques, stance shaded
* ``joint_velocities.svg``
* ``torque_speed_hip.svg`` / ``torque_speed_knee.svg``
                          (tau, thetadot) samples over the operating polygon
* ``joint_angles.svg``
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from hoppysim.actuation import operating_polygon  # noqa: E402
from hoppysim.kinematics import forward_kinematics  # noqa: E402
from hoppysim.sim import hip_tangential_speed  # noqa: E402
from hoppysim.traceio import sagittal_coordinates  # noqa: E402

STANCE_COLOR = "tab:red"
_RC = {"svg.hashsalt": "hoppysim", "svg.fonttype": "none"}


def _shade(ax, trace):
    bands = []
    for t0, t1 in trace.stance_intervals():
        bands.append(ax.axvspan(t0, t1, color=STANCE_COLOR, alpha=0.15, lw=0, gid="stance"))
    return bands


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def sagittal_points(trace, model):
    q = np.asarray(trace.q)
    hips = np.array([forward_kinematics(model, qi).hip for qi in q])
    hip = np.array([sagittal_coordinates(model, qi[0], h)[0] for qi, h in zip(q, hips)])
    foot = np.array([sagittal_coordinates(model, qi[0], f)[0] for qi, f in zip(q, trace.foot)])
    return hip, foot


def plot_sagittal(trace, model):
    hip, foot = sagittal_points(trace, model)
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(hip[:, 0], hip[:, 1], color="tab:blue", lw=1, label="hip")
    ax.plot(foot[:, 0], foot[:, 1], color="tab:cyan", lw=1, label="foot")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("distance along the gantry circle [m]")
    ax.set_ylabel("height [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="upper right")
    return fig


def plot_hip_speed(trace, model):
    data = trace.arrays()
    fig, ax = plt.subplots(figsize=(8, 3))
    _shade(ax, trace)
    ax.plot(data["t"], hip_tangential_speed(model, data["q"], data["qdot"]), color="tab:blue", lw=1)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("hip tangential speed [m/s]")
    return fig


def _plot_pair(trace, values, label):
    t = np.asarray(trace.t)
    fig, ax = plt.subplots(figsize=(8, 3))
    _shade(ax, trace)
    ax.plot(t, values[:, 0], lw=1, label="hip")
    ax.plot(t, values[:, 1], lw=1, label="knee")
    ax.set_xlabel("t [s]")
    ax.set_ylabel(label)
    ax.legend(loc="upper right")
    return fig


def plot_joint_torques(trace, model):
    return _plot_pair(trace, trace.arrays()["tau"], "torque [N m]")


def plot_joint_velocities(trace, model):
    return _plot_pair(trace, trace.arrays()["qdot"][:, 2:4], "joint speed [rad/s]")


def plot_torque_speed(trace, model, joint):
    """Delivered torque against joint speed over the operating polygon."""
    j = ("hip", "knee").index(joint)
    data = trace.arrays()
    fig, ax = plt.subplots(figsize=(4.5, 4))
    if model.k_v > 0.0:
        poly = operating_polygon(model, joint)
        v = np.vstack([poly.vertices, poly.vertices[:1]])
        ax.fill(v[:, 0], v[:, 1], color="0.9", zorder=0)
        ax.plot(v[:, 0], v[:, 1], color="0.4", lw=1, gid="polygon")
    ax.plot(data["tau"][:, j], data["qdot"][:, 2 + j], ".", ms=1.5, color="tab:blue", gid="samples")
    ax.set_xlabel(f"{joint} torque [N m]")
    ax.set_ylabel(f"{joint} speed [rad/s]")
    return fig


def plot_joint_angles(trace, model):
    data = trace.arrays()
    fig, ax = plt.subplots(figsize=(8, 3))
    _shade(ax, trace)
    for i in range(4):
        ax.plot(data["t"], data["q"][:, i], lw=1, label=f"q{i + 1}")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("angle [rad]")
    ax.legend(loc="upper right", ncol=4)
    return fig


PANELS = (
    ("sagittal_path", plot_sagittal),
    ("hip_speed", plot_hip_speed),
    ("joint_torques", plot_joint_torques),
    ("joint_velocities", plot_joint_velocities),
    ("torque_speed_hip", lambda trace, model: plot_torque_speed(trace, model, "hip")),
    ("torque_speed_knee", lambda trace, model: plot_torque_speed(trace, model, "knee")),
    ("joint_angles", plot_joint_angles),
)


def render_plots(trace, model, out_dir):
    """Write every panel into ``out_dir``; returns the list of paths."""
    if len(trace) == 0:
        raise ValueError("cannot plot an empty trace")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    with plt.rc_context(_RC):
        for name, panel in PANELS:
            paths.append(_save(panel(trace, model), out / f"{name}.svg"))
    return paths
