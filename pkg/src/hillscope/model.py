"""Closed forms for the constant-force model: V = -g y, E = 0, Hill region y >= 0.

Throws from P0 = (x0, y0) have speed sqrt(2 g y0); the throw angle theta is
measured from straight down, so theta = 0 is the brake orbit.  With g = 1/2
the conformal factor is f = y and the JM metric is y (dx^2 + dy^2).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hillscope.core import ConfigError, MechanicalSystem, PolynomialPotential, State


@dataclass(frozen=True)
class ModelPoint:
    x0: np.ndarray
    y0: float

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        if not self.y0 > 0:
            raise ConfigError("y0 must be positive (interior point)", "y0")

    @classmethod
    def planar(cls, x0: float, y0: float) -> "ModelPoint":
        return cls(np.array([x0], dtype=float), y0)

    @property
    def dimension(self) -> int:
        return self.x0.size + 1

    @property
    def position(self) -> np.ndarray:
        return np.append(self.x0, self.y0)


@dataclass(frozen=True)
class ThrowParams:
    """Throw direction.  For n > 2, ``theta`` is an (n-1)-vector whose norm is
    the angle from straight down and whose direction is the horizontal heading."""

    theta: float | np.ndarray
    g: float = 0.5

    def angle_and_heading(self, n: int) -> tuple[float, np.ndarray]:
        th = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if n == 2:
            if th.size != 1:
                raise ConfigError("planar model takes a scalar theta")
            return float(th[0]), np.array([1.0])
        if th.size != n - 1:
            raise ConfigError(f"theta must be an {n - 1}-vector")
        a = float(np.linalg.norm(th))
        heading = th / a if a > 0 else np.eye(n - 1)[0]
        return a, heading

    def velocity(self, p: ModelPoint) -> tuple[np.ndarray, float]:
        """Horizontal velocity v1 (vector) and downward speed v2."""
        c = np.sqrt(2.0 * self.g * p.y0)
        a, w = self.angle_and_heading(p.dimension)
        if p.dimension == 2:
            return np.array([c * np.sin(a)]), c * np.cos(a)
        return c * np.sin(a) * w, c * np.cos(a)


def model_system(n: int = 2, g: float = 0.5) -> MechanicalSystem:
    e = [0] * n
    e[-1] = 1
    return MechanicalSystem(PolynomialPotential(n, ((-g, tuple(e)),)), 0.0)


def ballistic_state(p: ModelPoint, tp: ThrowParams, t) -> State:
    """Exact flow: x = x0 + v1 t, y = y0 - v2 t + g t^2 / 2."""
    v1, v2 = tp.velocity(p)
    t = float(t)
    x = p.x0 + v1 * t
    y = p.y0 - v2 * t + 0.5 * tp.g * t * t
    return State(np.append(x, y), np.append(v1, -v2 + tp.g * t))


def model_energy(p: ModelPoint, tp: ThrowParams, t) -> float:
    st = ballistic_state(p, tp, t)
    return 0.5 * float(np.dot(st.v, st.v)) - tp.g * float(st.q[-1])


def critical_time(p: ModelPoint, tp: ThrowParams) -> float:
    """Newtonian time of the first conjugate point, t* = 2 y0 / v2."""
    _, v2 = tp.velocity(p)
    if not v2 > 0:
        raise ValueError("throw has no downward component; no finite critical time")
    return 2.0 * p.y0 / v2


def envelope_point(p: ModelPoint, tp: ThrowParams) -> np.ndarray:
    """Conjugate point (x0 + 2 y0 tan(theta), y0 tan^2(theta))."""
    return ballistic_state(p, tp, critical_time(p, tp)).q


def envelope_height(p: ModelPoint, x):
    """Height of the conjugate locus above horizontal position x."""
    x = np.asarray(x, dtype=float)
    if p.x0.size == 1:
        return (x - p.x0[0]) ** 2 / (4.0 * p.y0)
    return np.sum((x - p.x0) ** 2, axis=-1) / (4.0 * p.y0)


def brake_time(p: ModelPoint, g: float = 0.5) -> float:
    return np.sqrt(2.0 * p.y0 / g)


def minimum_height(p: ModelPoint, tp: ThrowParams) -> float:
    """Vertex height of the throw, |v1|^2 / (2g)."""
    v1, _ = tp.velocity(p)
    return float(np.dot(v1, v1)) / (2.0 * tp.g)


def gamma_jacobian(p: ModelPoint, tp: ThrowParams, t) -> tuple[np.ndarray, float]:
    """Planar family differential with columns (d/dt, d/dtheta), and its determinant."""
    if p.dimension != 2:
        raise ConfigError("gamma_jacobian is planar (n = 2)")
    v1, v2 = tp.velocity(p)
    v1 = float(v1[0])
    g = tp.g
    t = float(t)
    jac = np.array([[v1, v2 * t], [-v2 + g * t, v1 * t]])
    det = t * g * (2.0 * p.y0 - v2 * t)
    return jac, det


def gamma_det_gradient(p: ModelPoint, tp: ThrowParams, t) -> np.ndarray:
    """Gradient of det = t g (2 y0 - v2(theta) t) in (t, theta)."""
    v1, v2 = tp.velocity(p)
    g = tp.g
    t = float(t)
    return np.array([g * (2.0 * p.y0 - 2.0 * v2 * t), g * t * t * float(v1[0])])


@dataclass(frozen=True)
class FoldReport:
    singular_values: np.ndarray
    kernel: np.ndarray
    critical_tangent: np.ndarray
    transversality_angle: float  # degrees
    det_derivative_along_kernel: float
    certified: bool
    degenerate: bool = False
    thresholds: dict | None = None

    def to_dict(self) -> dict:
        return {
            "singular_values": [float(x) for x in self.singular_values],
            "kernel": [float(x) for x in self.kernel],
            "critical_tangent": [float(x) for x in self.critical_tangent],
            "transversality_angle_deg": float(self.transversality_angle),
            "det_derivative_along_kernel": float(self.det_derivative_along_kernel),
            "certified": bool(self.certified),
            "degenerate": bool(self.degenerate),
            "thresholds": dict(self.thresholds or {}),
        }


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def line_angle_deg(a, b) -> float:
    """Angle between the lines spanned by a and b, in [0, 90]."""
    c = abs(float(np.dot(_unit(a), _unit(b))))
    return float(np.degrees(np.arccos(min(c, 1.0))))


def fold_certificate_model(p: ModelPoint, tp: ThrowParams, rank_tol=1e-6, fold_tol=1e-8,
                           angle_tol_deg=5.0) -> FoldReport:
    """Fold data at (theta, t*) from the closed-form Jacobian.

    Away from the brake point the kernel is spanned by (v2 t*, -v1) = (2 y0, -v1);
    at theta = 0 it is d/dt while the critical curve is tangent to d/dtheta.
    """
    ts = critical_time(p, tp)
    jac, _ = gamma_jacobian(p, tp, ts)
    sv = np.linalg.svd(jac, compute_uv=False)
    v1, v2 = tp.velocity(p)
    kern = np.array([v2 * ts, -float(v1[0])])
    if np.linalg.norm(kern) == 0:  # pragma: no cover - v2 > 0 guaranteed
        kern = np.array([1.0, 0.0])
    kern = _unit(kern)
    grad = gamma_det_gradient(p, tp, ts)
    tangent = _unit(np.array([-grad[1], grad[0]]))
    transverse = line_angle_deg(kern, tangent)
    ddet = float(np.dot(grad, kern))
    certified = sv[-1] / sv[0] < rank_tol and abs(ddet) > fold_tol and transverse > angle_tol_deg
    return FoldReport(sv, kern, tangent, transverse, ddet, bool(certified),
                      thresholds={"rank_tol": rank_tol, "fold_tol": fold_tol, "angle_tol_deg": angle_tol_deg})


def brake_point_taylor(p: ModelPoint, theta: float, h: float) -> np.ndarray:
    """Leading terms near the brake point at g = 1/2: x - x0 = 2 y0 theta, y = h^2/4 + y0 theta^2."""
    return np.array([p.x0[0] + 2.0 * p.y0 * theta, 0.25 * h * h + p.y0 * theta * theta])


def envelope_hypersurface(p: ModelPoint, n: int | None = None, grid=None) -> np.ndarray:
    """Samples of y = |x - x0|^2 / (4 y0) over a horizontal grid.

    ``grid`` is an array of horizontal offsets of shape (m,) for n = 2 or
    (m, n-1); the default is a polar grid of radius 4 y0.
    """
    n = n or p.dimension
    if n < 2:
        raise ConfigError("n must be >= 2")
    if p.x0.size != n - 1:
        raise ConfigError(f"x0 must be an {n - 1}-vector")
    if grid is None:
        r = np.linspace(0.0, 4.0 * p.y0, 41)
        if n == 2:
            grid = np.concatenate([-r[:0:-1], r])[:, None]
        else:
            ang = np.linspace(0.0, 2.0 * np.pi, 24, endpoint=False)
            dirs = np.zeros((ang.size, n - 1))
            dirs[:, 0], dirs[:, 1] = np.cos(ang), np.sin(ang)
            grid = (r[:, None, None] * dirs[None]).reshape(-1, n - 1)
    grid = np.asarray(grid, dtype=float).reshape(-1, n - 1)
    x = p.x0[None] + grid
    y = np.sum(grid**2, axis=1) / (4.0 * p.y0)
    return np.column_stack([x, y])


def throw_family(p: ModelPoint, thetas_deg, g: float = 0.5, n_t: int = 200, t_factor: float = 1.6):
    """Rows (theta_deg, t, x, y) of planar throws, each sampled to t_factor * t*."""
    rows = []
    for th in thetas_deg:
        tp = ThrowParams(np.radians(th), g)
        t_end = t_factor * critical_time(p, tp)
        for t in np.linspace(0.0, t_end, n_t):
            q = ballistic_state(p, tp, t).q
            rows.append((th, t, q[0], q[1]))
    return np.array(rows)


def envelope_samples(p: ModelPoint, thetas_deg, g: float = 0.5) -> np.ndarray:
    """Rows (theta_deg, t*, x, y) of the envelope."""
    rows = []
    for th in thetas_deg:
        tp = ThrowParams(np.radians(th), g)
        q = envelope_point(p, tp)
        rows.append((th, critical_time(p, tp), q[0], q[1]))
    return np.array(rows)
