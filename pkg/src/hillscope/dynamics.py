"""Newton flow q'' = -grad V with optional tangent (variational) flow.

The default integrator is the fourth-order Yoshida composition of
velocity-Verlet.  It is symplectic, time-symmetric, and exact whenever the
force is constant, so the falling-ball model is reproduced to rounding error.
All steppers work on batches: positions have shape (B, n) and variation
columns have shape (B, n, k).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import CubicSpline

from hillscope.core import (
    TOL_BOUNDARY,
    ConfigError,
    DomainError,
    MechanicalSystem,
    State,
)

_CBRT2 = 2.0 ** (1.0 / 3.0)
YOSHIDA4 = (1.0 / (2.0 - _CBRT2), -_CBRT2 / (2.0 - _CBRT2), 1.0 / (2.0 - _CBRT2))


class IntegrationError(RuntimeError):
    """Adaptive integration failed; ``last_state`` is the last good state."""

    def __init__(self, message: str, t: float, last_state: State):
        super().__init__(message)
        self.t = t
        self.last_state = last_state


@dataclass
class IntegratorOptions:
    step: float = 1e-3
    method: str = "yoshida4"  # or "rk" (DOP853 cross-check)
    energy_tol: float = 1e-9
    tol_boundary: float = TOL_BOUNDARY
    rtol: float = 1e-12
    atol: float = 1e-13
    save_every: int = 1

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigError("step must be positive", "step")
        if self.method not in ("yoshida4", "rk"):
            raise ConfigError(f"unknown method {self.method!r}", "method")
        if self.save_every < 1:
            raise ConfigError("save_every must be >= 1", "save_every")


class BatchStepper:
    """Fixed-step Yoshida integrator for a batch of independent members.

    ``var`` holds variation columns (dq, dv), each of shape (B, n, k); they
    obey dq' = dv, dv' = -Hess V(q) dq and are stepped with the derivative of
    the same scheme, so they are the exact tangent map of the discrete flow.
    """

    def __init__(self, system: MechanicalSystem, q, v, var=None):
        self.system = system
        self.q = np.array(q, dtype=float, ndmin=2)
        self.v = np.array(v, dtype=float, ndmin=2)
        self.var = None if var is None else (np.array(var[0], dtype=float), np.array(var[1], dtype=float))
        self._refresh()

    def _refresh(self):
        _, g, hess = self.system.potential.evaluate(self.q)
        self.acc = -g
        self.hess = hess

    def copy(self) -> "BatchStepper":
        other = object.__new__(BatchStepper)
        other.system = self.system
        other.q, other.v = self.q.copy(), self.v.copy()
        other.acc, other.hess = self.acc.copy(), self.hess.copy()
        other.var = None if self.var is None else (self.var[0].copy(), self.var[1].copy())
        return other

    def take(self, idx) -> "BatchStepper":
        other = object.__new__(BatchStepper)
        other.system = self.system
        other.q, other.v = self.q[idx].copy(), self.v[idx].copy()
        other.acc, other.hess = self.acc[idx].copy(), self.hess[idx].copy()
        other.var = None if self.var is None else (self.var[0][idx].copy(), self.var[1][idx].copy())
        return other

    def step(self, h):
        """Advance every member by ``h`` (scalar or per-member array)."""
        h = np.asarray(h, dtype=float)
        hb = h.reshape(-1, 1) if h.ndim else h
        hm = h.reshape(-1, 1, 1) if h.ndim else h
        pot = self.system.potential
        for w in YOSHIDA4:
            tau, taum = w * hb, w * hm
            self.v = self.v + 0.5 * tau * self.acc
            self.q = self.q + tau * self.v
            if self.var is not None:
                dq, dv = self.var
                dv = dv - 0.5 * taum * (self.hess @ dq)
                dq = dq + taum * dv
            _, g, hess = pot.evaluate(self.q)
            self.acc, self.hess = -g, hess
            self.v = self.v + 0.5 * tau * self.acc
            if self.var is not None:
                dv = dv - 0.5 * taum * (self.hess @ dq)
                self.var = (dq, dv)
        return self

    def advance(self, tau, h: float):
        """Advance member i by tau[i] using ceil(|tau|/h) equal sub-steps."""
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (self.q.shape[0],))
        m = np.maximum(np.ceil(np.abs(tau) / h - 1e-12).astype(int), 1)
        sub = tau / m
        for k in range(int(m.max())):
            self.step(np.where(k < m, sub, 0.0))
        return self


def _tangent_identity(n: int) -> tuple[np.ndarray, np.ndarray]:
    eye = np.eye(2 * n)
    return eye[:n][None], eye[n:][None]


@dataclass
class Trajectory:
    """Time-ordered samples of a Newton solution.

    ``tangent[k]`` is the 2n x 2n matrix d(q(t_k), v(t_k)) / d(q(t_0), v(t_0))
    where t_0 is the initial time of the integration.
    """

    system: MechanicalSystem
    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    tangent: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)
    parameter: str = "time"
    param: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.param is None:
            self.param = self.t

    def __len__(self):
        return len(self.t)

    def state(self, k: int) -> State:
        return State(self.q[k].copy(), self.v[k].copy())

    @property
    def f(self) -> np.ndarray:
        return self.system.f(self.q)

    @property
    def energy(self) -> np.ndarray:
        return self.system.hamiltonian(self.q, self.v)

    @property
    def energy_drift(self) -> float:
        e = self.energy
        return float(np.max(np.abs(e - e[0]))) if len(e) else 0.0


def _check_span(t_span):
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 != t0:
        raise ConfigError("t_span is degenerate", "t_span")
    return t0, t1


def integrate(
    s: MechanicalSystem,
    init: State,
    t_span,
    opts: IntegratorOptions | None = None,
    *,
    variations: bool = False,
) -> Trajectory:
    """Integrate Newton's equations from ``init`` over ``t_span``.

    Integration stops early (flag ``meta['exited']``) if the orbit leaves the
    closed Hill region by more than ``opts.tol_boundary``.  Backward spans are
    allowed; samples are always returned with increasing time.
    """
    opts = opts or IntegratorOptions()
    t0, t1 = _check_span(t_span)
    q0 = np.asarray(init.q, dtype=float)
    v0 = np.asarray(init.v, dtype=float)
    if q0.shape != (s.dimension,) or v0.shape != (s.dimension,):
        raise ConfigError(f"initial state must be two {s.dimension}-vectors")
    if opts.method == "rk":
        traj = _integrate_rk(s, q0, v0, t0, t1, opts, variations)
    else:
        traj = _integrate_yoshida(s, q0, v0, t0, t1, opts, variations)
    drift = traj.energy_drift
    traj.meta["energy_drift"] = drift
    if drift > opts.energy_tol:
        warnings.warn(f"energy drift {drift:.2e} exceeds energy_tol {opts.energy_tol:.1e}")
    if t1 < t0:
        traj.t = traj.t[::-1].copy()
        traj.param = traj.t
        traj.q = traj.q[::-1].copy()
        traj.v = traj.v[::-1].copy()
        if traj.tangent is not None:
            traj.tangent = traj.tangent[::-1].copy()
    return traj


def integrate_with_variations(s, init, t_span, opts=None) -> Trajectory:
    return integrate(s, init, t_span, opts, variations=True)


def _integrate_yoshida(s, q0, v0, t0, t1, opts, variations):
    n = s.dimension
    nsteps = max(1, math.ceil(abs(t1 - t0) / opts.step - 1e-9))
    h = (t1 - t0) / nsteps
    stepper = BatchStepper(s, q0[None], v0[None], _tangent_identity(n) if variations else None)
    ts, qs, vs, ms = [t0], [q0.copy()], [v0.copy()], []
    if variations:
        ms.append(np.eye(2 * n))
    exited = False
    exit_time = None
    for k in range(1, nsteps + 1):
        stepper.step(h)
        if s.f(stepper.q[0]) < -opts.tol_boundary:
            exited, exit_time = True, t0 + k * h
            break
        if k % opts.save_every == 0 or k == nsteps:
            ts.append(t0 + k * h if k < nsteps else t1)
            qs.append(stepper.q[0].copy())
            vs.append(stepper.v[0].copy())
            if variations:
                dq, dv = stepper.var
                ms.append(np.vstack([dq[0], dv[0]]))
    meta = {"method": "yoshida4", "step": abs(h), "exited": exited, "exit_time": exit_time}
    return Trajectory(
        s, np.array(ts), np.array(qs), np.array(vs),
        np.array(ms) if variations else None, meta,
    )


def _integrate_rk(s, q0, v0, t0, t1, opts, variations):
    n = s.dimension
    pot = s.potential

    def rhs(_t, y):
        q, v = y[:n], y[n : 2 * n]
        _, g, hess = pot.evaluate(q)
        out = [v, -g]
        if variations:
            m = y[2 * n :].reshape(2 * n, 2 * n)
            out.append(np.vstack([m[n:], -hess @ m[:n]]).ravel())
        return np.concatenate(out)

    def leave(_t, y):
        return s.f(y[:n]) + opts.tol_boundary

    leave.terminal = True
    leave.direction = -1
    y0 = np.concatenate([q0, v0] + ([np.eye(2 * n).ravel()] if variations else []))
    nsteps = max(1, math.ceil(abs(t1 - t0) / opts.step - 1e-9))
    t_eval = np.linspace(t0, t1, nsteps + 1)[:: opts.save_every]
    if t_eval[-1] != t1:
        t_eval = np.append(t_eval, t1)
    sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", t_eval=t_eval,
                    rtol=opts.rtol, atol=opts.atol, events=leave)
    if sol.status == -1:
        last = sol.y[:, -1] if sol.y.size else y0
        tl = float(sol.t[-1]) if sol.t.size else t0
        raise IntegrationError(sol.message, tl, State(last[:n].copy(), last[n : 2 * n].copy()))
    y = sol.y.T
    exited = sol.status == 1
    tangent = y[:, 2 * n :].reshape(-1, 2 * n, 2 * n) if variations else None
    meta = {"method": "rk", "step": opts.step, "exited": exited,
            "exit_time": float(sol.t_events[0][0]) if exited else None}
    return Trajectory(s, sol.t.copy(), y[:, :n].copy(), y[:, n : 2 * n].copy(), tangent, meta)


def state_at(traj: Trajectory, t: float, h: float | None = None) -> State:
    """Re-integrate from the nearest earlier sample to time ``t``."""
    h = h or traj.meta.get("step", 1e-3)
    k = int(np.clip(np.searchsorted(traj.t, t, side="right") - 1, 0, len(traj.t) - 1))
    st = BatchStepper(traj.system, traj.q[k][None], traj.v[k][None])
    st.advance(t - traj.t[k], h)
    return State(st.q[0], st.v[0])


@dataclass(frozen=True)
class BrakeEvent:
    t_brake: float
    q_brake: np.ndarray
    residual_speed: float
    v_brake: np.ndarray


def detect_brake(traj: Trajectory, brake_tol: float = 1e-10, max_iter: int = 60) -> list[BrakeEvent]:
    """Brake instants of a sampled trajectory.

    Each sampled local minimum of |v| below a coarse threshold is refined by
    bisection on d|v|^2/dt = -2 v . grad V; only refinements whose residual
    speed is at most ``brake_tol`` are reported.
    """
    if len(traj.t) < 2:
        raise ConfigError("need at least two samples")
    s = traj.system
    speed = np.linalg.norm(traj.v, axis=1)
    h = traj.meta.get("step", float(np.min(np.diff(traj.t))))
    gmax = float(np.max(np.linalg.norm(s.potential.evaluate(traj.q)[1], axis=1)))
    dt_max = float(np.max(np.diff(traj.t)))
    coarse = 2.0 * dt_max * gmax + brake_tol
    events = []
    last = len(speed) - 1
    for k in range(len(speed)):
        if speed[k] > coarse:
            continue
        if k > 0 and speed[k] > speed[k - 1]:
            continue
        if k < last and speed[k] > speed[k + 1]:
            continue
        ev = _refine_brake(traj, k, h, brake_tol, max_iter)
        if ev is not None and not any(abs(ev.t_brake - e.t_brake) < 2 * dt_max for e in events):
            events.append(ev)
    return events


def _rate(s, q, v):
    return -2.0 * float(np.dot(v, s.potential.evaluate(q)[1]))


def _refine_brake(traj, k, h, brake_tol, max_iter):
    s = traj.system
    if float(np.linalg.norm(traj.v[k])) <= brake_tol * 1e-3:
        # sample already at rest; refine only if the rate does not bracket
        return BrakeEvent(float(traj.t[k]), traj.q[k].copy(), float(np.linalg.norm(traj.v[k])), traj.v[k].copy())
    a = max(k - 1, 0)
    b = min(k + 1, len(traj.t) - 1)
    ta, tb = float(traj.t[a]), float(traj.t[b])
    base = (traj.q[a], traj.v[a])

    def at(t):
        st = BatchStepper(s, base[0][None], base[1][None]).advance(t - ta, h)
        return st.q[0], st.v[0]

    ga = _rate(s, traj.q[a], traj.v[a])
    gb = _rate(s, traj.q[b], traj.v[b])
    if not (ga < 0.0 < gb):
        return None
    lo, hi = ta, tb
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        q, v = at(mid)
        if _rate(s, q, v) < 0.0:
            lo = mid
        else:
            hi = mid
    tm = 0.5 * (lo + hi)
    q, v = at(tm)
    res = float(np.linalg.norm(v))
    if res > brake_tol:
        return None
    return BrakeEvent(tm, q, res, v)


@dataclass(frozen=True)
class ReflectionCheck:
    mismatch: float
    taylor_residual: float
    h_max: float


def brake_reflection_check(s: MechanicalSystem, event: BrakeEvent, h_max: float,
                           step: float = 1e-3, n_samples: int = 50) -> ReflectionCheck:
    """Compare the orbit on either side of a brake instant.

    Returns max_h |q(t0+h) - q(t0-h)| and the residual of the second-order
    Taylor law q(t0+h) = q0 - h^2/2 grad V(q0) over h in (0, h_max].
    """
    hs = np.linspace(0.0, h_max, n_samples + 1)[1:]
    q0 = np.asarray(event.q_brake, dtype=float)
    v0 = np.asarray(event.v_brake, dtype=float)
    fwd = BatchStepper(s, np.repeat(q0[None], len(hs), 0), np.repeat(v0[None], len(hs), 0)).advance(hs, step)
    bwd = BatchStepper(s, np.repeat(q0[None], len(hs), 0), np.repeat(v0[None], len(hs), 0)).advance(-hs, step)
    mismatch = float(np.max(np.linalg.norm(fwd.q - bwd.q, axis=1)))
    grad = s.potential.evaluate(q0)[1]
    taylor = q0[None] - 0.5 * hs[:, None] ** 2 * grad[None]
    resid = float(np.max(np.linalg.norm(fwd.q - taylor, axis=1)))
    return ReflectionCheck(mismatch, resid, float(h_max))


class Parameterization(str, Enum):
    NEWTONIAN_TIME = "time"
    JM_ARCLENGTH = "jm_arclength"


def jm_arclength(traj: Trajectory, tol: float = TOL_BOUNDARY) -> np.ndarray:
    """Cumulative JM arclength at every sample (Simpson, Newtonian time)."""
    fv = traj.system.f(traj.q)
    if np.any(fv < -tol):
        raise DomainError("trajectory leaves the Hill region")
    integrand = np.sqrt(np.maximum(fv, 0.0)) * np.linalg.norm(traj.v, axis=1)
    if len(traj.t) < 3:
        return np.concatenate([[0.0], np.cumsum(0.5 * np.diff(traj.t) * (integrand[1:] + integrand[:-1]))])
    return cumulative_simpson(integrand, x=traj.t, initial=0.0)


def reparameterize(traj: Trajectory, parameter) -> Trajectory:
    """Resample ``traj`` uniformly in Newtonian time or in JM arclength.

    The curve image is unchanged; ``t``, ``q`` and ``v`` are interpolated as
    functions of the new parameter with cubic splines.  Velocities keep their
    Newtonian meaning.  ``param`` holds the new parameter values.
    """
    parameter = Parameterization(parameter)
    n = len(traj.t)
    if parameter is Parameterization.NEWTONIAN_TIME:
        if traj.parameter == Parameterization.NEWTONIAN_TIME.value:
            return traj
        new = np.linspace(traj.t[0], traj.t[-1], n)
        old = traj.t
    else:
        if np.any(traj.system.f(traj.q) <= 0.0):
            raise DomainError("JM arclength undefined where f <= 0")
        if len(traj.t) > 2 and detect_brake(traj):
            raise DomainError("JM arclength undefined through a brake instant")
        old = jm_arclength(traj)
        new = np.linspace(old[0], old[-1], n)
    fields = {}
    for name in ("t", "q", "v"):
        fields[name] = CubicSpline(old, getattr(traj, name), axis=0)(new)
    fields["t"][[0, -1]] = traj.t[[0, -1]]
    fields["q"][[0, -1]] = traj.q[[0, -1]]
    fields["v"][[0, -1]] = traj.v[[0, -1]]
    return replace(traj, t=fields["t"], q=fields["q"], v=fields["v"], tangent=None,
                   parameter=parameter.value, param=new, meta=dict(traj.meta))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = traj.q.shape[1]
    header = ",".join(["t"] + [f"q{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)] + ["f", "H"])
    data = np.column_stack([traj.t, traj.q, traj.v, traj.f, traj.energy])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
