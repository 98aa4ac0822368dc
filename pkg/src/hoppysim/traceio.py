"""CSV export and import of simulation traces, plus a Sagittal frame dump."""

from __future__ import annotations

import csv

import numpy as np

from hoppysim.kinematics import forward_kinematics
from hoppysim.sim import LIFTOFF, TOUCHDOWN, SimEvent, SimTrace

COLUMNS = ("t", "q1", "q2", "q3", "q4", "qd1", "qd2", "qd3", "qd4", "phase", "V_H", "V_K",
           "tau_H", "tau_K", "F_Yhc", "F_Zhc", "foot_x", "foot_y", "foot_z", "event")
UNITS = ("# units: t [s]; q1..q4 [rad]; qd1..qd4 [rad/s]; V_H, V_K [V]; tau_H, tau_K [N m]; "
         "F_Yhc, F_Zhc [N] ground force on the foot, nan in flight; foot_x..foot_z [m] in frame 0; "
         "event rows hold the state just before the transition")


def _num(x):
    return "%.17g" % x


def export_csv(trace, path):
    """Write the trace; one row per controller tick plus one per event."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(UNITS + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COLUMNS)
            for i in range(len(trace)):
                writer.writerow(
                    [_num(trace.t[i])]
                    + [_num(v) for v in trace.q[i]]
                    + [_num(v) for v in trace.qdot[i]]
                    + [trace.phase[i]]
                    + [_num(v) for v in trace.V[i]]
                    + [_num(v) for v in trace.tau[i]]
                    + [_num(v) for v in trace.F[i]]
                    + [_num(v) for v in trace.foot[i]]
                    + [trace.event[i]]
                )
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def import_csv(path):
    """Read a trace written by :func:`export_csv`.

    Events are rebuilt from the event rows; only what the file holds is
    filled in (kind, time, q and the pre-transition qdot).
    """
    trace = SimTrace()
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader)
    if tuple(header) != COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    for row in reader:
        f = [float(v) for v in row[:9]]
        g = [float(v) for v in row[10:19]]
        trace.append(f[0], f[1:5], f[5:9], row[9], g[0:2], g[2:4], g[4:6], g[6:9], row[19])
        if row[19] in (TOUCHDOWN, LIFTOFF):
            q, qd = np.array(f[1:5]), np.array(f[5:9])
            trace.events.append(SimEvent(row[19], f[0], q, qd, qd.copy() if row[19] == LIFTOFF else None))
    trace.hops = sum(ev.kind == LIFTOFF for ev in trace.events)
    trace.outcome = "loaded"
    return trace


def sagittal_coordinates(model, theta1, points):
    """Map frame-0 points to (arc length along the boom circle, height).

    The angle is measured from the boom, which rotates with ``theta1``, so
    the arc length stays continuous over any number of laps.
    """
    p = np.atleast_2d(points)
    c, s = np.cos(theta1), np.sin(theta1)
    local = np.arctan2(-s * p[:, 0] + c * p[:, 1], c * p[:, 0] + s * p[:, 1])
    return np.column_stack([model.gantry_length * (theta1 + local), p[:, 2]])


def export_frames(trace, model, path, every=20):
    """Hip, knee and foot in the Sagittal plane for every ``every``-th row.

    Meant for external animation tools; one line per snapshot.
    """
    q = np.asarray(trace.q)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame", "t", "phase", "hip_s", "hip_z", "knee_s", "knee_z",
                         "foot_s", "foot_z"])
        for frame, i in enumerate(range(0, len(trace), every)):
            pts = forward_kinematics(model, q[i])
            sag = sagittal_coordinates(model, q[i, 0], [pts.hip, pts.knee, pts.foot])
            writer.writerow([frame, _num(trace.t[i]), trace.phase[i]]
                            + [_num(v) for v in sag.ravel()])
