"""Event-driven hybrid simulation: flight, touchdown, stance, lift-off.

The continuous phases are integrated with scipy's embedded RK45 (Dormand-
Prince 5(4)) one control period at a time, so a step never crosses a
controller tick and the motor voltages are a true zero-order hold.  Guards
are checked after every accepted step and located on the step's dense output
with Brent's method.

Guards:

* touchdown: foot height crosses zero going down, armed ``min_flight``
  seconds after lift-off;
* lift-off: the solved vertical ground force F_Zhc crosses zero going down.
  If a new controller command makes F_Zhc negative at a tick, the foot leaves
  the ground at that tick.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45, trapezoid
from scipy.optimize import brentq

from hoppysim import _kernel
from hoppysim.actuation import effective_joint_torque, torque_gain
from hoppysim.control import Controller, ControllerConfig
from hoppysim.dynamics import COND_LIMIT, flight_accel, impact_map, stance_solve
from hoppysim.errors import (ConstraintDrift, NumericalFailure, SimulationError, SingularKKT,
                             SingularMass, ValidationError)
from hoppysim.kinematics import holonomic_jacobian, make_contact_frame
from hoppysim.model import Phase, SystemState, spring_torque

TOUCHDOWN = "touchdown"
LIFTOFF = "liftoff"


@dataclass(frozen=True)
class SimConfig:
    """Run length, tolerances and the initial state of a simulation."""

    n_hops: int = 15
    t_max: float = 10.0
    rtol: float = 1e-8
    atol: float = 1e-10
    event_tol: float = 1e-9
    controller_on: bool = True
    q0: tuple = (0.0, -0.06, -0.5, 1.0)
    qdot0: tuple = (0.0, 0.0, 0.0, 0.0)
    min_flight: float = 1e-3
    max_pitch: float = 0.6
    drift_limit: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "n_hops", int(self.n_hops))
        object.__setattr__(self, "q0", tuple(float(v) for v in self.q0))
        object.__setattr__(self, "qdot0", tuple(float(v) for v in self.qdot0))
        self.validate()

    def validate(self):
        if self.n_hops < 0:
            raise ValidationError("n_hops", "must be >= 0")
        for name in ("t_max", "rtol", "atol", "event_tol", "max_pitch", "drift_limit"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0.0):
                raise ValidationError(name, f"must be > 0, got {value}")
        if not self.min_flight >= 0.0:
            raise ValidationError("min_flight", "must be >= 0")
        if len(self.q0) != 4 or len(self.qdot0) != 4:
            raise ValidationError("q0", "initial state needs four joints")

    @property
    def initial_state(self):
        return SystemState(np.array(self.q0), np.array(self.qdot0))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class SimEvent:
    kind: str
    t: float
    q: np.ndarray
    qdot_minus: np.ndarray
    qdot_plus: np.ndarray
    F_imp: np.ndarray | None = None
    residual: float = 0.0  # guard value at the located event
    at_tick: bool = False  # lift-off found inside a command switch at a tick
    V: np.ndarray | None = None  # motor voltages in effect at the event


@dataclass
class SimTrace:
    """Rows sampled at every controller tick and at every event.

    Event rows carry the state just before the transition.  Flight rows have
    NaN ground forces.
    """

    t: list = field(default_factory=list)
    q: list = field(default_factory=list)
    qdot: list = field(default_factory=list)
    phase: list = field(default_factory=list)
    V: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    F: list = field(default_factory=list)
    foot: list = field(default_factory=list)
    event: list = field(default_factory=list)
    events: list = field(default_factory=list)
    constraint_residual: list = field(default_factory=list)
    saturated: list = field(default_factory=list)
    outcome: str = "running"
    hops: int = 0

    def __len__(self):
        return len(self.t)

    def append(self, t, q, qdot, phase, V, tau, F, foot, event="", residual=np.nan, saturated=False):
        self.t.append(float(t))
        self.q.append(np.array(q, dtype=float))
        self.qdot.append(np.array(qdot, dtype=float))
        self.phase.append(phase.value if isinstance(phase, Phase) else str(phase))
        self.V.append(np.array(V, dtype=float))
        self.tau.append(np.array(tau, dtype=float))
        self.F.append(np.array(F, dtype=float))
        self.foot.append(np.array(foot, dtype=float))
        self.event.append(event)
        self.constraint_residual.append(float(residual))
        self.saturated.append(bool(saturated))

    def arrays(self):
        """Column arrays keyed by field name."""
        def stack(rows, width):
            return np.array(rows, dtype=float).reshape(len(rows), width)
        return {
            "t": np.array(self.t, dtype=float),
            "q": stack(self.q, 4),
            "qdot": stack(self.qdot, 4),
            "phase": np.array(self.phase, dtype=object),
            "V": stack(self.V, 2),
            "tau": stack(self.tau, 2),
            "F": stack(self.F, 2),
            "foot": stack(self.foot, 3),
            "event": np.array(self.event, dtype=object),
        }

    def stance_intervals(self):
        """(t_touchdown, t_liftoff) pairs; an open stance ends at the last row."""
        out, start = [], None
        for ev in self.events:
            if ev.kind == TOUCHDOWN:
                start = ev.t
            elif ev.kind == LIFTOFF and start is not None:
                out.append((start, ev.t))
                start = None
        if start is not None and self.outcome != "completed" and self.t:
            out.append((start, self.t[-1]))
        return out


def hip_tangential_speed(model, q, qdot):
    """Horizontal hip speed along the circle traced by the boom [m/s]."""
    q = np.atleast_2d(q)
    qdot = np.atleast_2d(qdot)
    return model.gantry_length * np.cos(q[:, 1]) * qdot[:, 0]


def steady_state_speed(model, trace, last=5):
    """Mean hip tangential speed over the last ``last`` complete hops.

    The window runs from the lift-off ``last`` hops before the end to the
    final lift-off, so it spans whole flight plus stance cycles.
    """
    lift = [ev.t for ev in trace.events if ev.kind == LIFTOFF]
    if len(lift) < last + 1:
        raise ValueError(f"need at least {last + 1} lift-offs, got {len(lift)}")
    data = trace.arrays()
    t0, t1 = lift[-last - 1], lift[-1]
    # one row per time: event rows duplicate the tick rows they sit next to
    t = data["t"]
    keep = (t >= t0) & (t <= t1)
    _, idx = np.unique(t[keep], return_index=True)
    tt = t[keep][idx]
    v = hip_tangential_speed(model, data["q"][keep][idx], data["qdot"][keep][idx])
    return float(trapezoid(v, tt) / (t1 - t0))


class _NonFinite(ArithmeticError):
    def __init__(self, t):
        super().__init__(t)
        self.t = t


class _Plant:
    """Right-hand sides of the two phases with a held voltage command."""

    def __init__(self, model):
        self.model = model
        self.fast = model.derivatives == "analytic"
        masses, coms, inertias = model.moving_bodies
        self.args = (model.geometry, masses, coms, inertias, float(model.g),
                     np.diag(model.rotor_inertia).copy())
        self.damping = np.diag(model.emf_damping).copy()
        self.no_damping = np.zeros(4)
        self.gain = torque_gain(model)
        self.V = np.zeros(2)
        self.frame = None
        self.P = None
        self.enabled = True

    def set_command(self, V):
        self.V = np.array(V, dtype=float)

    def set_frame(self, frame):
        self.frame = frame
        self.P = None if frame is None else np.ascontiguousarray(frame.constrained_axes)

    def torque(self, q, qdot, emf):
        """Generalised input: motor torques with the current clamp, plus the spring."""
        tau = np.zeros(4)
        if self.enabled:
            # B_e V, plus a correction while the driver current limit is active
            m = self.model
            k_v = m.k_v if emf else 0.0
            back = k_v * m.gear_ratios * qdot[2:4]
            i_raw = (self.V - back) / m.R_w
            if np.any(np.abs(i_raw) > m.I_max):
                i = np.clip(i_raw, -m.I_max, m.I_max)
                V_drv = np.clip(m.R_w * i + back, -m.V_max, m.V_max)
                i = (V_drv - back) / m.R_w
            else:
                i = i_raw
            tau[2:4] = self.gain * self.V + self.gain * m.R_w * (i - i_raw)
        tau[3] += spring_torque(self.model, q[3])
        return tau

    def flight(self, t, y):
        q, qdot = y[:4], y[4:]
        tau = self.torque(q, qdot, True)
        if self.fast:
            qdd = _kernel.flight_rhs(*self.args, self.damping, q, qdot, tau, COND_LIMIT)
        else:
            try:
                qdd = flight_accel(self.model, q, qdot, tau)
            except SingularMass:
                qdd = np.full(4, np.nan)
        return np.concatenate([qdot, qdd])

    def stance_full(self, y):
        """Accelerations and (F_Yhc, F_Zhc) for the current foothold."""
        q, qdot = y[:4], y[4:]
        emf = self.model.emf_in_stance
        tau = self.torque(q, qdot, emf)
        if self.fast:
            damping = self.damping if emf else self.no_damping
            x = _kernel.stance_rhs(*self.args, damping, q, qdot, tau, self.P, COND_LIMIT)
            return x[:4], x[4:]
        try:
            sol = stance_solve(self.model, q, qdot, tau, self.frame)
        except SingularKKT:
            return np.full(4, np.nan), np.full(2, np.nan)
        return sol.qddot, sol.F_GRF

    def stance(self, t, y):
        return np.concatenate([y[4:], self.stance_full(y)[0]])

    def force(self, y):
        return self.stance_full(y)[1]

    def foot(self, y):
        return _kernel.foot_terms(self.model.geometry, y[:4], y[4:])

    def foot_height(self, y):
        return self.foot(y)[0][2]

    def foot_descending(self, y):
        _, J, _ = self.foot(y)
        return J[2] @ y[4:] < 0.0

    def delivered_torque(self, y, emf=True):
        k_v = self.model.k_v if emf else 0.0
        if not self.enabled:
            return np.zeros(2)
        return effective_joint_torque(self.model, self.V, y[6:8], k_v=k_v)


class Simulator:
    """Runs the hybrid loop for one model, controller and configuration."""

    def __init__(self, model, controller_config=None, config=None):
        self.model = model
        self.config = config or SimConfig()
        self.controller_config = controller_config or ControllerConfig()
        self.controller = Controller(self.controller_config, model)
        self.plant = _Plant(model)
        self.plant.enabled = self.config.controller_on
        self.trace = SimTrace()
        self.period = self.controller_config.period
        self._tick = 0
        self._h = None
        self._t_liftoff = -np.inf

    # -- bookkeeping ---------------------------------------------------

    def _tick_time(self, k):
        return k * self.period

    def _record(self, state, event="", F=None):
        y = np.concatenate([state.q, state.qdot])
        foot = self.plant.foot(y)[0]
        stance = state.phase is Phase.STANCE
        residual = np.nan
        if stance:
            if F is None:
                F = self.plant.force(y)
            J, _ = holonomic_jacobian(self.model, state.q, state.contact_frame)
            residual = float(np.linalg.norm(J @ state.qdot))
        else:
            F = np.full(2, np.nan)
        emf = self.model.emf_in_stance or not stance
        self.trace.append(state.t, state.q, state.qdot, state.phase, self.plant.V,
                          self.plant.delivered_torque(y, emf), F, foot, event, residual,
                          self.controller.command.saturated if self.config.controller_on else False)

    def _control(self, state):
        """Sample sensors, update the held command and log a tick row."""
        if self.config.controller_on:
            reading = self.controller.sense(state.q, state.phase is Phase.STANCE, state.t)
            cmd = self.controller.step(reading)
            self.plant.set_command(cmd.V)
        else:
            self.plant.set_command(np.zeros(2))

    def _fail(self, cls, message):
        self.trace.outcome = "failed"
        return cls(message, trace=self.trace)

    # -- continuous phases ------------------------------------------------

    def _integrate(self, state, rhs, guard, armed_from, t_stop, descending=None):
        """Integrate from ``state`` to ``t_stop`` or the first guard event.

        ``guard(y)`` goes from positive to non-positive at the event.  When
        the guard arms (at ``armed_from`` or at the start) with a value that
        is already non-positive, the event fires there if ``descending(y)``
        agrees; otherwise the guard has to rise and cross again.
        Returns (t, y, crossed).
        """
        y0 = np.concatenate([state.q, state.qdot])
        t0 = state.t
        if t_stop - t0 <= 0.0:
            return t0, y0, False

        def arm(y):
            g = guard(y)
            return g, g <= 0.0 and (descending is None or descending(y))

        g_old = None
        if guard is not None and t0 >= armed_from:
            g_old, hit = arm(y0)
            if hit:
                return t0, y0, True

        def checked(t, y):
            # RK45 keeps shrinking the step on NaN derivatives instead of failing
            dy = rhs(t, y)
            if not np.isfinite(dy).all():
                raise _NonFinite(t)
            return dy

        try:
            solver = RK45(checked, t0, y0, t_stop, rtol=self.config.rtol, atol=self.config.atol,
                          first_step=min(self._h, t_stop - t0) if self._h else None)
            return self._advance(solver, state, guard, armed_from, t_stop, arm, g_old)
        except _NonFinite as exc:
            raise self._fail(NumericalFailure, f"non-finite derivative at t={exc.t:.9g} "
                             "(singular mass or contact system)") from None

    def _advance(self, solver, state, guard, armed_from, t_stop, arm, g_old):
        """Step ``solver`` to ``t_stop`` or the first guard crossing."""
        while solver.status == "running":
            msg = solver.step()
            if solver.status == "failed" or not np.all(np.isfinite(solver.y)):
                raise self._fail(NumericalFailure, f"integrator failed at t={solver.t:.9g}: {msg}")
            if solver.t < t_stop:
                # carry the step size across ticks; the last step of a tick is truncated
                self._h = solver.h_abs
            self._after_step(state.phase, solver.t, solver.y)
            if guard is None or solver.t < armed_from:
                continue
            dense = None
            t_lo = solver.t_old
            if g_old is None:
                # the guard arms inside this step
                t_lo = armed_from
                dense = solver.dense_output()
                y_lo = dense(t_lo)
                g_old, hit = arm(y_lo)
                if hit:
                    return t_lo, y_lo, True
            g_new = guard(solver.y)
            if g_old > 0.0 and g_new <= 0.0:
                dense = dense or solver.dense_output()
                tc = brentq(lambda s: guard(dense(s)), t_lo, solver.t, xtol=1e-15, rtol=1e-15)
                return tc, dense(tc), True
            g_old = g_new
        return solver.t, solver.y.copy(), False

    def _after_step(self, phase, t, y):
        if phase is Phase.STANCE:
            J, _ = holonomic_jacobian(self.model, y[:4], self.plant.frame)
            r = float(np.linalg.norm(J @ y[4:]))
            if r > self.config.drift_limit:
                raise self._fail(ConstraintDrift,
                                 f"stance constraint residual {r:.3g} at t={t:.9g}")

    def _switch_liftoff(self, y, V_old):
        """Lift-off caused by the command change at a tick.

        F_Zhc is continuous in the motor voltages, so as the held command
        switches from ``V_old`` to the new value it passes through zero.  The
        voltage at that point is located with Brent's method and left in the
        plant for the event record.  Returns the guard value there.
        """
        V_new = self.plant.V.copy()

        def fz(sigma):
            self.plant.set_command(V_old + sigma * (V_new - V_old))
            return self.plant.force(y)[1]

        if fz(0.0) > 0.0:
            sigma = brentq(fz, 0.0, 1.0, xtol=1e-15, rtol=1e-15)
        else:
            sigma = 1.0
        return fz(sigma), V_new

    def _segment(self, state, use_guard=True):
        """Tick-by-tick integration of one phase; returns (state, outcome).

        ``outcome`` is "timeout", "fall" or ``("event", guard value, V_after)``
        where ``V_after`` is the command to hold once the transition is done.
        """
        stance = state.phase is Phase.STANCE
        rhs = self.plant.stance if stance else self.plant.flight
        descending = None
        if stance:
            guard = lambda y: self.plant.force(y)[1]  # noqa: E731
            armed_from = -np.inf
        else:
            guard = self.plant.foot_height if use_guard else None
            descending = self.plant.foot_descending
            armed_from = self._t_liftoff + self.config.min_flight
        cfg = self.config
        while True:
            if state.t >= self._tick_time(self._tick) - 1e-12:
                V_old = self.plant.V.copy()
                self._control(state)
                self._tick += 1
                if stance:
                    y = np.concatenate([state.q, state.qdot])
                    F = self.plant.force(y)
                    if not np.all(np.isfinite(F)):
                        raise self._fail(NumericalFailure, f"singular stance solve at t={state.t:.9g}")
                    if F[1] <= 0.0:
                        residual, V_new = self._switch_liftoff(y, V_old)
                        return state, ("event", residual, V_new)
                self._record(state)
                if abs(state.q[1]) > cfg.max_pitch:
                    return state, "fall"
            if state.t >= cfg.t_max:
                return state, "timeout"
            t_stop = min(self._tick_time(self._tick), cfg.t_max)
            t, y, crossed = self._integrate(state, rhs, guard, armed_from, t_stop, descending)
            state = SystemState(y[:4], y[4:], state.phase, t, state.contact_frame)
            if crossed:
                return state, ("event", guard(y), None)

    def integrate_flight(self, state, guard=True):
        """Integrate flight until touchdown; ``guard=False`` ignores the ground."""
        if state.phase is not Phase.FLIGHT:
            raise ValueError("integrate_flight needs a flight state")
        self.plant.set_frame(None)
        return self._segment(state, use_guard=guard)

    def integrate_stance(self, state):
        """Integrate stance on ``state.contact_frame`` until lift-off."""
        if state.phase is not Phase.STANCE:
            raise ValueError("integrate_stance needs a stance state")
        self.plant.set_frame(state.contact_frame)
        return self._segment(state)

    # -- transitions -------------------------------------------------------

    def touchdown(self, state, residual):
        frame = make_contact_frame(self.model, state.q)
        try:
            imp = impact_map(self.model, state.q, state.qdot, frame)
        except SingularKKT as exc:
            raise self._fail(NumericalFailure, f"singular impact at t={state.t:.9g}: {exc}") from exc
        self._record(state, TOUCHDOWN)
        self.trace.events.append(SimEvent(TOUCHDOWN, state.t, state.q.copy(), state.qdot.copy(),
                                          imp.qdot_plus.copy(), imp.F_imp.copy(), float(residual),
                                          False, self.plant.V.copy()))
        return SystemState(state.q.copy(), imp.qdot_plus, Phase.STANCE, state.t, frame)

    def liftoff(self, state, residual, V_after=None):
        self._record(state, LIFTOFF)
        self.trace.events.append(SimEvent(LIFTOFF, state.t, state.q.copy(), state.qdot.copy(),
                                          state.qdot.copy(), None, float(residual),
                                          V_after is not None, self.plant.V.copy()))
        self._t_liftoff = state.t
        self.trace.hops += 1
        flight = SystemState(state.q.copy(), state.qdot.copy(), Phase.FLIGHT, state.t, None)
        if V_after is not None:
            # the tick that released the foot still gets its own row
            self.plant.set_command(V_after)
            self.plant.set_frame(None)
            self._record(flight)
        return flight

    def start_state(self):
        state = self.config.initial_state
        y = np.concatenate([state.q, state.qdot])
        foot, J, _ = self.plant.foot(y)
        if foot[2] <= 0.0 and (J @ state.qdot)[2] >= 0.0:
            raise ValidationError("q0", "initial foot is on or below the ground")
        return state

    def run(self):
        """Alternate flight and stance until ``n_hops`` lift-offs, t_max or a fall."""
        cfg = self.config
        state = self.start_state()
        try:
            while True:
                state, outcome = self.integrate_flight(state)
                if outcome in ("timeout", "fall"):
                    break
                stance = self.touchdown(state, outcome[1])
                if cfg.n_hops == 0:
                    outcome = "completed"
                    break
                state, outcome = self.integrate_stance(stance)
                if outcome in ("timeout", "fall"):
                    break
                state = self.liftoff(state, outcome[1], outcome[2])
                if self.trace.hops >= cfg.n_hops:
                    outcome = "completed"
                    break
        except (SingularMass, SingularKKT) as exc:
            raise self._fail(NumericalFailure, str(exc)) from exc
        self.trace.outcome = outcome
        return self.trace


def simulate(model, controller_config=None, config=None):
    return Simulator(model, controller_config, config).run()
