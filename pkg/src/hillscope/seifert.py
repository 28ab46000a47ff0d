"""Seifert cylinder coordinates near a regular point of the Hill boundary (n = 2).

Chart construction: boundary points b(x) are found by 1-D root solves along
the normal from the tangent line at q0; the brake orbit leaving b(x) from
rest is integrated, and the point at JM distance d from the boundary gets
height y = (3 d / 2)^(2/3).  The horizontal coordinate is x = c * sigma with
sigma the tangent-line offset and c = (2 |grad V(q0)|)^(1/3), which makes the
pulled-back metric y dy^2 + y f(x, y) dx^2 with f(0, 0) = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline, RectBivariateSpline
from scipy.optimize import brentq

from hillscope.conjugate import FamilyMap, detect_conjugate
from hillscope.core import TOL_BOUNDARY, HillKind, MechanicalSystem, State, hill_classify, jm_length
from hillscope.dynamics import BatchStepper, IntegratorOptions, Trajectory, detect_brake, integrate


class ChartError(ValueError):
    """Seifert chart cannot be built (non-regular centre, failed boundary solve)."""


@dataclass
class SeifertChart:
    system: MechanicalSystem
    center: np.ndarray
    normal: np.ndarray  # unit grad f(q0), pointing into the Hill region
    tangent: np.ndarray
    scale: float  # c = (2 |grad V(q0)|)^(1/3)
    extent: float
    height: float
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    grid: np.ndarray  # (nx, ny, 2) ambient positions
    _splines: tuple = field(repr=False, default=())

    @property
    def grad_v_norm(self) -> float:
        return float(np.linalg.norm(self.system.potential.gradient(self.center)))

    def boundary_point(self, x) -> np.ndarray:
        return self.forward(x, np.zeros_like(np.asarray(x, dtype=float)))

    def forward(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return np.stack([sp.ev(x, y) for sp in self._splines], axis=-1)

    def jacobian(self, x, y) -> np.ndarray:
        """d(forward)/d(x, y); last two axes are (ambient, chart)."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        cols = [np.stack([sp.ev(x, y, dx=1) for sp in self._splines], axis=-1),
                np.stack([sp.ev(x, y, dy=1) for sp in self._splines], axis=-1)]
        return np.stack(cols, axis=-1)

    def linear_guess(self, q) -> np.ndarray:
        d = np.asarray(q, dtype=float) - self.center
        return np.stack([self.scale * d @ self.tangent, self.scale * d @ self.normal], axis=-1)

    def inverse(self, q, guess=None, tol: float = 1e-14, max_iter: int = 30) -> np.ndarray:
        """Chart coordinates (..., 2) of ambient points, by Newton on the forward spline."""
        q = np.asarray(q, dtype=float)
        xy = self.linear_guess(q) if guess is None else np.array(guess, dtype=float)
        for _ in range(max_iter):
            r = self.forward(xy[..., 0], xy[..., 1]) - q
            if np.max(np.abs(r), initial=0.0) < tol:
                break
            jac = self.jacobian(xy[..., 0], xy[..., 1])
            xy = xy - np.linalg.solve(jac, r[..., None])[..., 0]
        return xy

    def rows(self) -> np.ndarray:
        """Chart dump rows (x, y, q1, q2) over the construction grid."""
        xx, yy = np.meshgrid(self.x_nodes, self.y_nodes, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel(), self.grid.reshape(-1, 2)])


def _boundary_offset(s: MechanicalSystem, q0, t, nrm, sigma, reach: float) -> float:
    """Signed offset r along the normal with f(q0 + sigma t + r nrm) = 0, nearest to r = 0."""
    base = q0 + sigma * t
    phi = lambda r: float(s.f(base + r * nrm))
    f0 = phi(0.0)
    if f0 == 0.0:
        return 0.0
    direction = 1.0 if f0 < 0 else -1.0  # f grows along +nrm near the sheet
    r = 1e-3
    while phi(direction * r) * f0 > 0:
        r *= 2.0
        if r > reach:
            raise ChartError(f"boundary root not bracketed at x offset {sigma:.6g}")
    a, b = sorted((0.0, direction * r))
    return brentq(phi, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def build_chart(s: MechanicalSystem, q0, extent: float = 0.3, height: float = 0.2, step: float = 1e-3,
                nx: int = 41, ny: int = 41, margin: float = 1.25,
                tol_boundary: float = TOL_BOUNDARY) -> SeifertChart:
    """Seifert chart on [-extent, extent] x [0, height] (grid covers ``margin`` times that)."""
    q0 = np.asarray(q0, dtype=float)
    if s.dimension != 2:
        raise ChartError("Seifert charts are implemented for planar systems")
    cls = hill_classify(s, q0, tol_boundary)
    if cls.kind is not HillKind.BOUNDARY or not cls.regular:
        raise ChartError(f"q0 is not a regular boundary point ({cls.kind.value}, |grad f| = {cls.grad_norm:.3e})")
    gf = s.grad_f(q0)
    nrm = gf / np.linalg.norm(gf)
    tan = np.array([nrm[1], -nrm[0]])
    gv = float(np.linalg.norm(s.potential.gradient(q0)))
    c = (2.0 * gv) ** (1.0 / 3.0)
    x_nodes = np.linspace(-margin * extent, margin * extent, nx)
    y_nodes = np.linspace(0.0, margin * height, ny)
    reach = 2.0 * margin * extent + 1.0
    starts = np.array([
        q0 + (x / c) * tan + _boundary_offset(s, q0, tan, nrm, x / c, reach) * nrm for x in x_nodes
    ])
    targets = (2.0 / 3.0) * y_nodes**1.5  # JM distance for each height node
    st = BatchStepper(s, starts, np.zeros_like(starts))
    qs, vs = [st.q.copy()], [st.v.copy()]
    s_approx = np.zeros(nx)
    prev = np.zeros(nx)
    max_steps = 200000
    while np.min(s_approx) < targets[-1] * 1.01:
        st.step(step)
        qs.append(st.q.copy())
        vs.append(st.v.copy())
        cur = np.sqrt(np.maximum(s.f(st.q), 0.0)) * np.linalg.norm(st.v, axis=1)
        s_approx += 0.5 * step * (cur + prev)
        prev = cur
        if len(qs) > max_steps:
            raise ChartError("brake orbits do not reach the chart height")
    qs, vs = np.array(qs), np.array(vs)
    t = np.arange(qs.shape[0]) * step
    grid = np.empty((nx, ny, 2))
    for i in range(nx):
        dsdt = np.sqrt(np.maximum(s.f(qs[:, i]), 0.0)) * np.linalg.norm(vs[:, i], axis=1)
        sv = cumulative_simpson(dsdt, x=t, initial=0.0)
        curve = CubicHermiteSpline(t, sv, dsdt)
        tt = np.interp(targets, sv, t)
        for _ in range(50):
            r = curve(tt) - targets
            d = curve(tt, 1)
            upd = np.where(d > 0, r / np.where(d > 0, d, 1.0), 0.0)
            tt = np.clip(tt - upd, 0.0, t[-1])
            if np.max(np.abs(upd)) < 1e-15:
                break
        k = np.minimum((tt / step).astype(int), len(t) - 2)
        sub = BatchStepper(s, qs[k, i], vs[k, i])
        sub.step(tt - k * step)
        grid[i] = sub.q
        grid[i, 0] = starts[i]
    splines = tuple(RectBivariateSpline(x_nodes, y_nodes, grid[:, :, j], kx=5, ky=5) for j in range(2))
    return SeifertChart(s, q0, nrm, tan, c, float(extent), float(height), x_nodes, y_nodes, grid, splines)


@dataclass
class PropertyReport:
    property: int
    passed: bool
    measured: dict
    thresholds: dict
    witness: Optional[dict] = None

    def to_dict(self) -> dict:
        out = {"property": self.property, "pass": bool(self.passed),
               "measured": _jsonable(self.measured), "thresholds": _jsonable(self.thresholds)}
        if self.witness is not None:
            out["witness"] = _jsonable(self.witness)
        return out


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def chart_metric_check(chart: SeifertChart, radius: float | None = None, n: int = 15,
                       yy_tol: float = 1e-2, cross_tol: float = 1e-3, f00_tol: float = 1e-2) -> PropertyReport:
    """Pull back the JM metric and fit y dy^2 + y (1 + a x + b y + ...) dx^2 near q0."""
    radius = radius or 0.5 * min(chart.extent, chart.height)
    xs = np.linspace(-radius, radius, n)
    ys = np.linspace(radius / n, radius, n)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    jac = chart.jacobian(xx, yy)
    fq = chart.system.f(chart.forward(xx, yy).reshape(-1, 2)).reshape(xx.shape)
    g = fq[..., None, None] * np.swapaxes(jac, -1, -2) @ jac
    gxx, gxy, gyy = g[..., 0, 0] / yy, g[..., 0, 1] / yy, g[..., 1, 1] / yy
    design = np.column_stack([np.ones(xx.size), xx.ravel(), yy.ravel(), xx.ravel() ** 2,
                              (xx * yy).ravel(), yy.ravel() ** 2])
    coef, *_ = np.linalg.lstsq(design, gxx.ravel(), rcond=None)
    # dy^2 coefficient ~ C y^p as y -> 0 along x = 0
    ycol = chart.jacobian(np.zeros_like(ys), ys)[..., :, 1]
    dyy = chart.system.f(chart.forward(np.zeros_like(ys), ys)) * np.sum(ycol**2, axis=-1)
    slope, logc = np.polyfit(np.log(ys), np.log(dyy), 1)
    measured = {
        "f00": coef[0], "f1_a": coef[1], "f1_b": coef[2],
        "max_dy2_dev": float(np.max(np.abs(gyy - 1.0))),
        "max_cross_over_y": float(np.max(np.abs(gxy))),
        "h_residual": float(np.max(np.abs(gxx - coef[0] - coef[1] * xx - coef[2] * yy))),
        "dy2_fit_slope": slope, "dy2_fit_c": math.exp(logc),
    }
    passed = (measured["max_dy2_dev"] < yy_tol and measured["max_cross_over_y"] < cross_tol
              and abs(coef[0] - 1.0) < f00_tol and math.exp(logc) > 0 and abs(slope - 1.0) < 0.05)
    return PropertyReport(2, passed, measured, {"dy2_tol": yy_tol, "cross_tol": cross_tol, "f00_tol": f00_tol,
                                                "radius": radius})


@dataclass
class ChartPath:
    """A geodesic through a chart vertex, sampled both ways until it leaves a box."""

    vertex: tuple
    t: np.ndarray  # vertex at t = 0
    q: np.ndarray
    v: np.ndarray
    xy: np.ndarray


def sample_vertices(chart: SeifertChart, x_max: float, y_max: float, nx: int = 5, ny: int = 4,
                    brake: bool = True) -> np.ndarray:
    """Grid of vertices (x_m, y_m); y_m = 0 rows are brake orbits."""
    xs = np.linspace(-x_max, x_max, nx)
    ys = np.linspace(0.0 if brake else y_max / ny, y_max, ny)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def chart_paths(chart: SeifertChart, vertices, roof: float, width: float | None = None,
                step: float = 1e-3, check_every: int = 10, max_time: float = 20.0) -> list[ChartPath]:
    """Integrate geodesics with chart-horizontal velocity at the given vertices.

    Each member runs forward and backward in time until its chart position
    leaves [-width, width] x (-inf, roof]; the first outside sample is kept.
    """
    s = chart.system
    width = chart.extent if width is None else width
    vx = np.asarray(vertices, dtype=float).reshape(-1, 2)
    q = chart.forward(vx[:, 0], vx[:, 1])
    dx = chart.jacobian(vx[:, 0], vx[:, 1])[:, :, 0]
    speed = np.sqrt(np.maximum(s.f(q), 0.0))
    v = speed[:, None] * dx / np.linalg.norm(dx, axis=1)[:, None]
    halves = []
    for sign in (1.0, -1.0):
        st = BatchStepper(s, q, sign * v)
        qs, vsv = [st.q.copy()], [st.v.copy()]
        guess = vx.copy()
        k = 0
        while True:
            st.step(step)
            qs.append(st.q.copy())
            vsv.append(sign * st.v)
            k += 1
            if k % check_every == 0:
                guess = chart.inverse(st.q, guess, tol=1e-9, max_iter=8)
                out = (guess[:, 1] > roof) | (np.abs(guess[:, 0]) > width)
                if out.all() or k * step > max_time:
                    break
        halves.append((np.array(qs), np.array(vsv)))
    paths = []
    for i in range(vx.shape[0]):
        parts = []
        for sign, (qs, vsv) in zip((1.0, -1.0), halves):
            qi = qs[:, i]
            xy = _track_inverse(chart, qi, vx[i])
            out = np.flatnonzero((xy[:, 1] > roof) | (np.abs(xy[:, 0]) > width))
            end = out[0] + 1 if out.size else len(qi)
            tt = sign * step * np.arange(end)
            parts.append((tt, qi[:end], vsv[:end, i], xy[:end]))
        (tf, qf, vf, xf), (tb, qb, vb, xb) = parts
        paths.append(ChartPath(
            tuple(vx[i]),
            np.concatenate([tb[:0:-1], tf]),
            np.concatenate([qb[:0:-1], qf]),
            np.concatenate([vb[:0:-1], vf]),
            np.concatenate([xb[:0:-1], xf]),
        ))
    return paths


def _track_inverse(chart: SeifertChart, qi: np.ndarray, start) -> np.ndarray:
    # neighbouring samples are close, so a coarse pass then a batched polish suffices
    coarse = np.empty((len(qi), 2))
    g = np.asarray(start, dtype=float)
    for j in range(0, len(qi), 25):
        g = chart.inverse(qi[j], g, tol=1e-10, max_iter=10)
        coarse[j : j + 25] = g
    return chart.inverse(qi, coarse)


def _fit_slope(x, y) -> tuple[float, float]:
    slope, icpt = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(math.exp(icpt))


def property1_check(chart: SeifertChart, heights: Sequence[float], tol: float = 0.01,
                    step: float = 1e-3) -> PropertyReport:
    """JM distance to the boundary scales like y^(3/2).

    The distance is recomputed independently of the chart tables: from
    forward(0, y) the orbit is launched straight down the chart line with
    the energy speed, integrated with an adaptive Runge-Kutta scheme to its
    brake instant, and its JM length is integrated by quadrature.
    """
    heights = np.asarray(heights, dtype=float)
    if heights.size < 3:
        raise ValueError("need >= 3 heights for fit")
    s = chart.system
    gv = chart.grad_v_norm
    dists = []
    for y in heights:
        p = chart.forward(0.0, y)
        down = -chart.jacobian(0.0, y)[:, 1]
        v = math.sqrt(max(float(s.f(p)), 0.0)) * down / np.linalg.norm(down)
        t_end = 2.0 * math.sqrt(2.0 * y / (chart.scale * gv)) + 0.05
        traj = integrate(s, State(p, v), (0.0, t_end), IntegratorOptions(step=step, method="rk"))
        ev = detect_brake(traj)
        if not ev:
            raise ValueError(f"no brake instant found below height {y}")
        b = ev[0]
        keep = traj.t < b.t_brake
        seg = Trajectory(s, np.append(traj.t[keep], b.t_brake), np.vstack([traj.q[keep], b.q_brake]),
                         np.vstack([traj.v[keep], b.v_brake]))
        dists.append(jm_length(s, seg))
    dists = np.array(dists)
    slope, pref = _fit_slope(heights, dists)
    measured = {"slope": slope, "prefactor": pref, "heights": heights, "jm_distance": dists}
    return PropertyReport(1, abs(slope - 1.5) <= tol, measured, {"slope_target": 1.5, "tol": tol})


def property3_check(chart: SeifertChart, eps_A: float, eps_B: float, delta_deg: float = 44.0,
                    vertices=None, step: float = 1e-3) -> PropertyReport:
    """Geodesics through the small cylinder B leave A through its roof, steeply."""
    if not eps_B < eps_A <= chart.height:
        raise ValueError("need eps_B < eps_A <= chart height")
    if not delta_deg < 45.0:
        raise ValueError("delta must be below 45 degrees")
    if vertices is None:
        vertices = sample_vertices(chart, 0.5 * chart.extent, eps_B, nx=5, ny=5)
    paths = chart_paths(chart, vertices, eps_A, chart.extent, step)
    angles, ok, witness = [], True, None
    for p in paths:
        for end in (0, -1):
            xy = p.xy[end], p.xy[end + 1 if end == 0 else end - 1]
            a, b = xy
            through_roof = a[1] > eps_A and abs(a[0]) <= chart.extent
            ang = math.degrees(math.atan2(abs(a[0] - b[0]), abs(a[1] - b[1])))
            angles.append(ang)
            if not through_roof or ang >= delta_deg:
                ok = False
                witness = witness or {"vertex": p.vertex, "exit_xy": a, "angle_deg": ang, "xy": p.xy}
    ymax = float(np.max(np.asarray(vertices)[:, 1]))
    measured = {"max_angle_deg": max(angles), "lambda_empirical": eps_A / ymax if ymax > 0 else float("inf"),
                "samples": len(paths)}
    return PropertyReport(3, ok, measured, {"eps_A": eps_A, "eps_B": eps_B, "delta_deg": delta_deg}, witness)


def property4_check(chart: SeifertChart, roof: float = 0.05, vertices=None,
                    step: float = 1e-3) -> PropertyReport:
    """Chart height is strictly convex in Newtonian time with one minimum."""
    roof = min(roof, chart.height)
    if vertices is None:
        vertices = sample_vertices(chart, 0.5 * chart.extent, 0.5 * roof, nx=5, ny=5)
    paths = chart_paths(chart, vertices, roof, chart.extent, step)
    margins, ok = [], True
    for p in paths:
        y = p.xy[1:-1, 1]
        d2 = y[2:] - 2 * y[1:-1] + y[:-2]
        interior_min = np.flatnonzero((y[1:-1] < y[:-2]) & (y[1:-1] <= y[2:]))
        margins.append(float(d2.min()) / step**2)
        if d2.min() <= 0 or interior_min.size != 1:
            ok = False
    return PropertyReport(4, ok, {"min_second_difference_over_h2": min(margins), "samples": len(paths)},
                          {"roof": roof, "step": step})


def _residence(p: ChartPath, level: float) -> float:
    y = p.xy[:, 1] - level
    t = p.t
    below = y < 0
    if not below.any():
        return 0.0
    idx = np.flatnonzero(below)
    i0, i1 = idx[0], idx[-1]
    t0 = t[i0] if i0 == 0 else t[i0 - 1] + (t[i0] - t[i0 - 1]) * y[i0 - 1] / (y[i0 - 1] - y[i0])
    t1 = t[i1] if i1 == len(t) - 1 else t[i1] + (t[i1 + 1] - t[i1]) * y[i1] / (y[i1] - y[i1 + 1])
    return float(t1 - t0)


def property5_check(chart: SeifertChart, h_values: Sequence[float], vertices=None, step: float = 1e-3,
                    safety: float = 1.05, slope_tol: float = 0.02) -> PropertyReport:
    """Residence time below height h is at most C sqrt(h), C = safety * 2 sqrt(2) / |grad V(q0)|."""
    h_values = np.sort(np.asarray(h_values, dtype=float))
    const = safety * 2.0 * math.sqrt(2.0) / chart.grad_v_norm
    if vertices is None:
        vertices = sample_vertices(chart, 0.5 * chart.extent, 0.5 * h_values[0], nx=5, ny=4)
    paths = chart_paths(chart, vertices, 1.2 * h_values[-1], chart.extent, step)
    worst = np.array([max(_residence(p, h) for p in paths) for h in h_values])
    slope, _ = _fit_slope(h_values, worst)
    ratio = worst / np.sqrt(h_values)
    ok = bool(np.all(worst <= const * np.sqrt(h_values)) and abs(slope - 0.5) <= slope_tol)
    return PropertyReport(5, ok, {"max_residence": worst, "residence_over_sqrt_h": ratio, "sqrt_h_slope": slope},
                          {"C": const, "safety": safety, "slope_target": 0.5, "slope_tol": slope_tol})


@dataclass
class RescaleReport:
    eps: np.ndarray
    deviation: np.ndarray
    ratio: np.ndarray
    passed: bool
    factor: float


def rescale_compare(chart: SeifertChart, eps_list: Sequence[float], vertex_heights=(0.5, 1.0),
                    top: float = 3.0, factor: float = 3.0, step: float = 1e-3) -> RescaleReport:
    """Rescale chart geodesics by 1/eps and compare with the model parabolas.

    A geodesic with vertex (0, eps Y_m) becomes, after (x, y) -> (x, y) / eps,
    a curve that should approach Y - Y_m = X^2 / (4 Y_m).  The brake orbit should
    approach the vertical line X = 0.  Deviation is the largest vertical
    (resp. horizontal) gap over the part of the curve with Y <= top.
    """
    eps = np.asarray(eps_list, dtype=float)
    devs = []
    for e in eps:
        verts = [(0.0, e * ym) for ym in (0.0, *vertex_heights)]
        paths = chart_paths(chart, verts, top * e * 1.05, chart.extent, step * min(1.0, e / 0.1))
        worst = 0.0
        for p, ym in zip(paths, (0.0, *vertex_heights)):
            X, Y = p.xy[:, 0] / e, p.xy[:, 1] / e
            keep = Y <= top
            if ym == 0.0:
                gap = np.abs(X[keep])
            else:
                gap = np.abs(Y[keep] - ym - X[keep] ** 2 / (4.0 * ym))
            worst = max(worst, float(gap.max()))
        devs.append(worst)
    devs = np.array(devs)
    ratio = devs / eps
    nz = ratio[ratio > 0]
    spread = float(nz.max() / nz.min()) if nz.size else 1.0
    passed = bool(np.all(devs < 1e-9)) or spread <= factor
    return RescaleReport(eps, devs, ratio, passed, factor)


@dataclass
class ConjugatePair:
    vertex: tuple
    entry_point: np.ndarray
    entry_height: float
    theta_deg: float
    conjugate_point: np.ndarray
    conjugate_height: float
    t_star: float


@dataclass
class Theorem1Report:
    pairs: list
    missing: list  # vertices whose entry geodesic produced no conjugate point
    skipped: int  # samples that never reach the entry height
    passed: bool
    samples: int
    max_height: float
    height_bound: float


def theorem1_scan(chart: SeifertChart, approach_dist: float = 0.02, lam: float = 2.2,
                  height_bound: float | None = None, n_side: int = 15, step: float = 1e-3,
                  vertices=None) -> Theorem1Report:
    """Short conjugate pairs on geodesics that pass close to the chart centre.

    Each sampled geodesic (vertex within ``approach_dist`` of the centre in
    chart coordinates) is followed back to its entry at height
    lam * approach_dist; a family is restarted at the entry point and the
    first conjugate point along the entry direction is located.
    """
    height_bound = 2.5 * approach_dist if height_bound is None else height_bound
    entry_h = lam * approach_dist
    if vertices is None:
        g = np.linspace(-approach_dist, approach_dist, n_side)
        xx, yy = np.meshgrid(g, np.linspace(0.0, approach_dist, (n_side + 1) // 2), indexing="ij")
        vx = np.column_stack([xx.ravel(), yy.ravel()])
        vertices = vx[np.hypot(vx[:, 0], vx[:, 1]) < approach_dist]
    paths = chart_paths(chart, vertices, entry_h * 1.5, chart.extent, step)
    pairs, missing, skipped = [], [], 0
    s = chart.system
    for p in paths:
        back = p.t <= 0
        y = p.xy[back, 1]
        above = np.flatnonzero(y >= entry_h)
        if not above.size:
            skipped += 1
            continue
        k = above[-1]  # last sample above the entry height before the vertex
        tb, qb, vb = p.t[back], p.q[back], p.v[back]
        st = BatchStepper(s, qb[k][None], vb[k][None])
        lo, hi = 0.0, float(tb[k + 1] - tb[k])
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            yq = chart.inverse(st.copy().step(mid).q[0], p.xy[back][k])[1]
            lo, hi = (mid, hi) if yq >= entry_h else (lo, mid)
        ent = st.copy().step(0.5 * (lo + hi))
        qe, ve = ent.q[0], ent.v[0]
        if not s.f(qe) > 0:
            skipped += 1
            continue
        t_max = 4.0 * float(-tb[k]) + 0.2
        fam = FamilyMap.build(s, qe, t_max=t_max, step=step)
        theta = fam.theta_of(ve)
        ev = detect_conjugate(fam, theta)
        if ev is None:
            missing.append(p.vertex)
            continue
        hc = float(chart.inverse(ev.point)[1])
        pairs.append(ConjugatePair(p.vertex, qe, float(chart.inverse(qe)[1]), math.degrees(theta),
                                   ev.point, hc, ev.t_star))
    heights = [max(pr.entry_height, pr.conjugate_height) for pr in pairs]
    below = all(pr.conjugate_height < pr.entry_height for pr in pairs)
    max_h = max(heights) if heights else float("nan")
    passed = bool(pairs) and not missing and below and max_h < height_bound
    return Theorem1Report(pairs, missing, skipped, passed, len(paths), max_h, height_bound)
