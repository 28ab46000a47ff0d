"""Conjugate points of a base point as critical values of the geodesic family.

The family map sends (theta, t) to the position at Newtonian time t of the
energy-E solution leaving the base point in direction u(theta).  Directions
use normal coordinates on the unit sphere centred on the straight-down axis,
so |theta| is the angle from straight down (for n = 2 theta is a signed
angle).  The differential dGamma has columns [dGamma/dt, dGamma/dtheta_j];
the second group comes from the variational flow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import brentq
from scipy.spatial.distance import directed_hausdorff

from hillscope.core import TOL_BOUNDARY, ConfigError, DomainError, MechanicalSystem
from hillscope.dynamics import BatchStepper
from hillscope.model import FoldReport, line_angle_deg


def nearest_boundary_point(s: MechanicalSystem, q, max_iter: int = 60, s_max: float = 1e3):
    """Euclidean projection of an interior point onto {f = 0}.

    Alternates a 1-D root solve along the current ray with re-aiming the ray
    along -grad f at the landing point; the fixed point satisfies the
    nearest-point condition p - q parallel to grad f(p).  Returns None if no
    boundary is found along the ray.
    """
    q = np.asarray(q, dtype=float)
    g = s.grad_f(q)
    if np.linalg.norm(g) == 0:
        return None
    u = -g / np.linalg.norm(g)
    p = None
    for _ in range(max_iter):
        phi = lambda r: float(s.f(q + r * u))
        hi = 1e-3
        while phi(hi) > 0:
            hi *= 2.0
            if hi > s_max:
                return p
        r = brentq(phi, 0.0, hi, xtol=1e-15, rtol=1e-15)
        p = q + r * u
        g = s.grad_f(p)
        u_new = -g / np.linalg.norm(g)
        if np.linalg.norm(u_new - u) < 1e-13:
            break
        u = u_new
    return p


def _orthonormal_frame(down: np.ndarray) -> np.ndarray:
    n = down.size
    if n == 2:
        return np.array([[-down[1]], [down[0]]])
    _, _, vt = np.linalg.svd(down[None])
    return vt[1:].T.copy()


@dataclass
class FamilyMap:
    system: MechanicalSystem
    base: np.ndarray
    down: np.ndarray
    frame: np.ndarray  # (n, n-1) orthonormal complement of ``down``
    t_max: float = 10.0
    step: float = 1e-3
    tol_boundary: float = TOL_BOUNDARY

    @classmethod
    def build(cls, system: MechanicalSystem, base, *, down=None, t_max: float = 10.0,
              step: float = 1e-3, tol_boundary: float = TOL_BOUNDARY) -> "FamilyMap":
        base = np.asarray(base, dtype=float)
        if base.shape != (system.dimension,):
            raise ConfigError(f"base must be a {system.dimension}-vector")
        if not system.f(base) > 0:
            raise DomainError("family base must lie in the open Hill region (f > 0)")
        if down is None:
            p = nearest_boundary_point(system, base)
            g = system.grad_f(p) if p is not None else system.grad_f(base)
            down = -g
        down = np.asarray(down, dtype=float)
        down = down / np.linalg.norm(down)
        return cls(system, base, down, _orthonormal_frame(down), float(t_max), float(step), tol_boundary)

    @property
    def n(self) -> int:
        return self.base.size

    @property
    def speed(self) -> float:
        return math.sqrt(float(self.system.f(self.base)))

    def as_theta_array(self, thetas) -> np.ndarray:
        th = np.asarray(thetas, dtype=float)
        if self.n == 2:
            return th.reshape(-1, 1)
        return th.reshape(-1, self.n - 1)

    def directions(self, thetas) -> tuple[np.ndarray, np.ndarray]:
        """Unit directions u(theta) (B, n) and du/dtheta (B, n, n-1)."""
        th = self.as_theta_array(thetas)
        a = np.linalg.norm(th, axis=1)
        safe = np.where(a > 0, a, 1.0)
        w = np.where(a[:, None] > 0, th / safe[:, None], 0.0)
        ca, sa = np.cos(a), np.sin(a)
        sinc = np.where(a > 0, sa / safe, 1.0)
        ew = w @ self.frame.T  # (B, n)
        u = ca[:, None] * self.down[None] + sa[:, None] * ew
        if self.n == 2:
            du = (-sa[:, None] * self.down[None] * np.sign(th) + ca[:, None] * ew * np.sign(th))
            du = np.where(a[:, None] > 0, du, self.frame[:, 0][None])[:, :, None]
            return u, du
        k = self.n - 1
        eye = np.eye(k)
        # d/dtheta_j of cos(a) d + sin(a) E w with a = |theta|, w = theta / a
        du = (
            (-sa * 1.0)[:, None, None] * self.down[None, :, None] * w[:, None, :]
            + ca[:, None, None] * ew[:, :, None] * w[:, None, :]
            + sinc[:, None, None] * (self.frame[None] @ (eye[None] - w[:, :, None] * w[:, None, :]))
        )
        return u, du

    def initial(self, thetas) -> tuple[np.ndarray, np.ndarray]:
        u, du = self.directions(thetas)
        return self.speed * u, self.speed * du

    def theta_of(self, direction) -> np.ndarray | float:
        """Chart coordinate of a direction vector (inverse of ``directions``)."""
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        c = float(np.dot(d, self.down))
        tcomp = self.frame.T @ d
        if self.n == 2:
            return float(math.atan2(tcomp[0], c))
        a = math.atan2(float(np.linalg.norm(tcomp)), c)
        nt = np.linalg.norm(tcomp)
        return a * tcomp / nt if nt > 0 else np.zeros(self.n - 1)

    def stepper(self, thetas, variations: bool = True) -> BatchStepper:
        v0, dv0 = self.initial(thetas)
        q0 = np.repeat(self.base[None], v0.shape[0], axis=0)
        var = (np.zeros_like(dv0), dv0) if variations else None
        return BatchStepper(self.system, q0, v0, var)


def _dgamma(st: BatchStepper) -> np.ndarray:
    return np.concatenate([st.v[:, :, None], st.var[0]], axis=2)


def _det(st: BatchStepper) -> np.ndarray:
    if st.q.shape[1] == 2:
        dq = st.var[0][:, :, 0]
        return st.v[:, 0] * dq[:, 1] - st.v[:, 1] * dq[:, 0]
    return np.linalg.det(_dgamma(st))


def family_eval(fam: FamilyMap, thetas, times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched family map: points (B, n), dGamma (B, n, n) and velocities (B, n)."""
    th = fam.as_theta_array(thetas)
    times = np.broadcast_to(np.asarray(times, dtype=float), (th.shape[0],)).copy()
    if np.any(times <= 0) or np.any(times > fam.t_max * (1 + 1e-12)):
        raise ConfigError("t must lie in (0, t_max]")
    h = fam.step
    full = np.floor(times / h + 1e-12).astype(int)
    st = fam.stepper(th)
    snap = st.copy()
    done = np.zeros(th.shape[0], dtype=bool)
    for k in range(int(full.max()) + 1):
        hit = (full == k) & ~done
        if hit.any():
            snap.q[hit], snap.v[hit] = st.q[hit], st.v[hit]
            snap.acc[hit], snap.hess[hit] = st.acc[hit], st.hess[hit]
            snap.var[0][hit], snap.var[1][hit] = st.var[0][hit], st.var[1][hit]
            done |= hit
        if done.all():
            break
        st.step(h)
    snap.step(times - full * h)
    return snap.q.copy(), _dgamma(snap), snap.v.copy()


def family_map_eval(fam: FamilyMap, theta, t) -> tuple[np.ndarray, np.ndarray]:
    """Point Gamma(theta, t) and dGamma with columns (d/dt, d/dtheta_1, ...)."""
    pts, dg, _ = family_eval(fam, [theta] if np.ndim(theta) == 0 else [theta], [t])
    return pts[0], dg[0]


@dataclass
class ConjugateEvent:
    theta: float | np.ndarray
    t_star: float
    point: np.ndarray
    det_before: float
    det_after: float
    kernel: np.ndarray
    dgamma: np.ndarray
    velocity: np.ndarray
    det_at: float
    t_floor: float


@dataclass
class DetectOptions:
    det_tol: float = 1e-10
    t_resolution: float = 1e-10
    floor_steps: int = 10


def _scan(fam: FamilyMap, thetas, opts: DetectOptions | None = None) -> list[Optional[ConjugateEvent]]:
    """Find the first sign change of det dGamma after the origin floor, per direction."""
    opts = opts or DetectOptions()
    th = fam.as_theta_array(thetas)
    nb = th.shape[0]
    n = fam.n
    h = fam.step
    st = fam.stepper(th)
    plateau = np.abs(_plateau(st))
    idx = np.arange(nb)  # batch row -> member index
    floor_t = np.full(nb, np.nan)
    prev_det = np.full(nb, np.nan)
    bracket: dict[int, tuple] = {}
    exited = np.zeros(nb, dtype=bool)
    nsteps = int(math.ceil(fam.t_max / h - 1e-9))
    min_floor = opts.floor_steps * h
    for k in range(1, nsteps + 1):
        saved = (st.q, st.v, st.acc, st.hess, st.var)
        st.step(h)
        t = k * h
        d = _det(st)
        out = fam.system.f(st.q) < -fam.tol_boundary
        rows = idx
        ratio = np.abs(d) / t ** (n - 1)
        newly = np.isnan(floor_t[rows]) & (ratio >= 0.5 * plateau[rows]) & (t >= min_floor)
        floor_t[rows[newly]] = t
        armed = ~np.isnan(floor_t[rows]) & (t > floor_t[rows])
        pd = prev_det[rows]
        change = armed & ~np.isnan(pd) & (np.sign(d) != np.sign(pd)) & (d != 0.0) & ~out
        exact = armed & (d == 0.0) & ~out
        change |= exact
        for j in np.flatnonzero(change):
            bracket[int(rows[j])] = (
                t - h, saved[0][j].copy(), saved[1][j].copy(), saved[2][j].copy(), saved[3][j].copy(),
                saved[4][0][j].copy(), saved[4][1][j].copy(), pd[j], d[j],
            )
        exited[rows[out]] = True
        prev_det[rows] = np.where(~np.isnan(floor_t[rows]) & (t >= floor_t[rows]), d, np.nan)
        keep = ~(change | out)
        if not keep.all():
            if not keep.any():
                break
            st = st.take(keep)
            idx = idx[keep]
    return _refine(fam, th, bracket, floor_t, opts)


def _plateau(st: BatchStepper) -> np.ndarray:
    # det dGamma ~ t^(n-1) det[v0, dv0] as t -> 0
    return np.linalg.det(np.concatenate([st.v[:, :, None], st.var[1]], axis=2))


def _refine(fam, th, bracket, floor_t, opts) -> list[Optional[ConjugateEvent]]:
    nb = th.shape[0]
    events: list[Optional[ConjugateEvent]] = [None] * nb
    if not bracket:
        return events
    members = sorted(bracket)
    b = [bracket[m] for m in members]
    t0 = np.array([x[0] for x in b])
    base = object.__new__(BatchStepper)
    base.system = fam.system
    base.q = np.array([x[1] for x in b])
    base.v = np.array([x[2] for x in b])
    base.acc = np.array([x[3] for x in b])
    base.hess = np.array([x[4] for x in b])
    base.var = (np.array([x[5] for x in b]), np.array([x[6] for x in b]))
    d_lo = np.array([x[7] for x in b])
    d_hi = np.array([x[8] for x in b])
    lo = np.zeros(len(b))
    hi = np.full(len(b), fam.step)
    exact = d_hi == 0.0
    lo[exact] = hi[exact]
    while np.max(hi - lo) > opts.t_resolution:
        mid = 0.5 * (lo + hi)
        d = _det(base.copy().step(mid))
        same = np.sign(d) == np.sign(d_lo)
        lo = np.where(same, mid, lo)
        d_lo = np.where(same, d, d_lo)
        hi = np.where(same, hi, mid)
        d_hi = np.where(same, d_hi, d)
    tau = 0.5 * (lo + hi)
    fin = base.copy().step(tau)
    dg = _dgamma(fin)
    dets = _det(fin)
    for j, m in enumerate(members):
        _, _, vt = np.linalg.svd(dg[j])
        kern = vt[-1]
        if kern[0] < 0 or (kern[0] == 0 and kern[1:].sum() < 0):
            kern = -kern
        theta = float(th[m, 0]) if fam.n == 2 else th[m].copy()
        events[m] = ConjugateEvent(
            theta, float(t0[j] + tau[j]), fin.q[j].copy(), float(d_lo[j]), float(d_hi[j]),
            kern, dg[j].copy(), fin.v[j].copy(), float(dets[j]), float(floor_t[m]),
        )
    return events


def detect_conjugate(fam: FamilyMap, theta, opts: DetectOptions | None = None) -> Optional[ConjugateEvent]:
    """First conjugate point along one direction, or None if det dGamma keeps its sign."""
    opts = opts or DetectOptions()
    if not opts.det_tol > 0:
        raise ConfigError("det_tol must be positive")
    return _scan(fam, [theta] if np.ndim(theta) == 0 else [theta], opts)[0]


@dataclass
class Locus:
    thetas: np.ndarray
    events: list
    points: np.ndarray  # NaN rows where no event was found

    @property
    def found(self) -> np.ndarray:
        return np.array([e is not None for e in self.events])

    @property
    def gaps(self) -> np.ndarray:
        return np.flatnonzero(~self.found)

    @property
    def t_star(self) -> np.ndarray:
        return np.array([e.t_star if e is not None else np.nan for e in self.events])


def conjugate_locus(fam: FamilyMap, theta_grid, opts: DetectOptions | None = None,
                    threads: int = 1) -> Locus:
    """Conjugate events on a direction grid, ordered as the grid.

    ``threads`` > 1 splits the grid into chunks run concurrently; every member
    is integrated independently, so the result does not depend on the split.
    """
    th = fam.as_theta_array(theta_grid)
    if th.shape[0] < 8:
        raise ConfigError("direction grid needs at least 8 directions")
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        chunks = np.array_split(np.arange(th.shape[0]), threads)
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda c: _scan(fam, th[c], opts), chunks))
        events = [e for part in parts for e in part]
    else:
        events = _scan(fam, th, opts)
    pts = np.array([e.point if e is not None else np.full(fam.n, np.nan) for e in events])
    grid = th[:, 0] if fam.n == 2 else th
    return Locus(grid, events, pts)


def fold_checks(fam: FamilyMap, events: Sequence[ConjugateEvent], rank_tol: float = 1e-6,
                fold_tol: float = 1e-8, angle_tol_deg: float = 5.0, delta_t: float = 1e-4,
                delta_theta: float = 1e-4, degenerate_tol: float = 1e-2) -> list[FoldReport]:
    """Certify folds at several conjugate events with one batched integration.

    Kernel: right singular vector of the smallest singular value of dGamma.
    Critical set: tangent hyperplane {grad det = 0} in (t, theta) space, with
    grad det from central differences of the family map.
    """
    n = fam.n
    thetas, times = [], []
    for ev in events:
        th0 = fam.as_theta_array([ev.theta])[0]
        thetas += [th0, th0]
        times += [ev.t_star + delta_t, ev.t_star - delta_t]
        for j in range(n - 1):
            e = np.zeros(n - 1)
            e[j] = delta_theta
            thetas += [th0 + e, th0 - e]
            times += [ev.t_star, ev.t_star]
    if not events:
        return []
    _, dg, _ = family_eval(fam, np.array(thetas), np.array(times))
    dets = np.linalg.det(dg).reshape(len(events), 2 * n)
    reports = []
    for ev, d in zip(events, dets):
        sv = np.linalg.svd(ev.dgamma, compute_uv=False)
        kern = np.asarray(ev.kernel, dtype=float)
        grad = np.empty(n)
        grad[0] = (d[0] - d[1]) / (2 * delta_t)
        grad[1:] = (d[2::2] - d[3::2]) / (2 * delta_theta)
        gnorm = np.linalg.norm(grad)
        ghat = grad / gnorm if gnorm > 0 else grad
        if n == 2:
            tangent = np.array([-ghat[1], ghat[0]])
        else:
            _, _, vt = np.linalg.svd(ghat[None])
            tangent = vt[1:].T  # columns span the critical hyperplane
        # angle between the kernel line and the critical hyperplane
        angle = 90.0 - line_angle_deg(kern, ghat) if gnorm > 0 else 0.0
        ddet = float(np.dot(grad, kern))
        degenerate = n > 2 and sv[-2] / sv[0] < degenerate_tol
        threshold = fold_tol * sv[0] ** 2 / max(ev.t_star, fam.step)
        certified = (
            sv[-1] / sv[0] < rank_tol and not degenerate and abs(ddet) > threshold and angle > angle_tol_deg
        )
        reports.append(FoldReport(
            sv, kern, np.asarray(tangent), float(angle), ddet, bool(certified), bool(degenerate),
            thresholds={"rank_tol": rank_tol, "fold_tol": fold_tol, "fold_threshold": float(threshold),
                        "angle_tol_deg": angle_tol_deg, "degenerate_tol": degenerate_tol},
        ))
    return reports


def fold_check(fam: FamilyMap, event: ConjugateEvent, **kwargs) -> FoldReport:
    """Fold certificate for a single event; see ``fold_checks``."""
    return fold_checks(fam, [event], **kwargs)[0]


@dataclass
class DownwardCone:
    base: np.ndarray
    aperture_deg: float
    side_apertures_deg: dict
    records: list = field(default_factory=list)  # (theta_deg, conj_height | None, below | None)


def downward_cone(fam: FamilyMap, height: Callable | None = None, sweep_step_deg: float = 2.5,
                  sweep_max_deg: float = 85.0, tol_deg: float = 0.05,
                  opts: DetectOptions | None = None, chunk: int = 6, sections: int = 8) -> DownwardCone:
    """Aperture of the cone of directions whose conjugate point lies below the base.

    "Below" compares ``height`` (default: the conformal factor f) at the
    conjugate point and at the base.  Planar families sweep both signs of
    theta; higher-dimensional ones sweep along the first frame direction.
    The boundary angle on each side is bracketed by the sweep and then
    narrowed by batched section search (``sections`` interior probes per
    round) until the bracket is below ``tol_deg``.
    """
    height = height or fam.system.f
    h_base = float(height(fam.base))
    unit = np.zeros(fam.n - 1)
    unit[0] = 1.0

    def evaluate(angles_deg):
        angles_deg = np.asarray(angles_deg, dtype=float)
        th = np.radians(angles_deg)
        grid = th if fam.n == 2 else th[:, None] * unit[None]
        out = []
        for a, e in zip(angles_deg, _scan(fam, grid, opts)):
            if e is None:
                out.append((float(a), None, None))
            else:
                hc = float(height(e.point))
                out.append((float(a), hc, hc < h_base))
        return out

    signs = (1.0, -1.0) if fam.n == 2 else (1.0,)
    steps = np.arange(0.0, sweep_max_deg + 1e-9, sweep_step_deg)
    records = []
    below_last = {sg: None for sg in signs}
    bracket = {sg: None for sg in signs}
    for start in range(0, steps.size, chunk):
        todo = [sg for sg in signs if bracket[sg] is None]
        if not todo:
            break
        block = steps[start : start + chunk]
        recs = evaluate(np.concatenate([sg * block for sg in todo]))
        for j, sg in enumerate(todo):
            part = recs[j * block.size : (j + 1) * block.size]
            records += [r for r in part if not (sg < 0 and r[0] == 0.0)]
            for a, _, below in part:
                if below is None:
                    continue
                if below:
                    below_last[sg] = a
                elif below_last[sg] is not None:
                    bracket[sg] = (below_last[sg], a)
                    break
    open_sides = [sg for sg in signs if bracket[sg] is not None]
    while True:
        wide = [sg for sg in open_sides if abs(bracket[sg][1] - bracket[sg][0]) > tol_deg]
        if not wide:
            break
        probes = [np.linspace(*bracket[sg], sections + 2)[1:-1] for sg in wide]
        recs = evaluate(np.concatenate(probes))
        for j, sg in enumerate(wide):
            lo, hi = bracket[sg]
            for a, _, below in recs[j * sections : (j + 1) * sections]:
                if below is None:
                    continue
                if below:
                    lo = a
                else:
                    hi = a
                    break
            bracket[sg] = (lo, hi)
    sides = {}
    for sg in signs:
        key = "+" if sg > 0 else "-"
        if bracket[sg] is not None:
            sides[key] = abs(0.5 * (bracket[sg][0] + bracket[sg][1]))
        else:
            sides[key] = float("nan") if below_last[sg] is None else abs(below_last[sg])
    records.sort(key=lambda r: r[0])
    finite = [a for a in sides.values() if math.isfinite(a)]
    return DownwardCone(fam.base.copy(), float(min(finite)) if finite else float("nan"), sides, records)


@dataclass
class SideTangencyReport:
    thetas_deg: np.ndarray
    crossed: np.ndarray
    tangency_angle_deg: np.ndarray  # NaN where exempt (brake orbit)
    exempt: np.ndarray
    passed: bool
    angle_tol_deg: float


def _locus_spline(locus: Locus):
    ok = locus.found
    th = locus.thetas[ok]
    pts = locus.points[ok]
    return CubicSpline(th, pts, axis=0), th.min(), th.max()


def side_and_tangency_check(fam: FamilyMap, locus: Locus, sample_every: int = 4,
                            angle_tol_deg: float = 5.0, tie_steps: int = 2,
                            refine: int = 200, max_spacing_deg: float = 1.0) -> SideTangencyReport:
    """Sampled geodesics stay on the base side of the locus and touch it tangentially.

    Paths are checked for crossings of the (spline-refined) locus on
    (0, t* - tie_steps * h); at t* the velocity is compared with the locus
    tangent.  A vanishing velocity at t* (the brake orbit) is exempt.

    Paths meet the locus tangentially, so near t* their gap to it is second
    order; the reference locus is re-detected on a grid no coarser than
    ``max_spacing_deg`` so spline error stays below that gap.
    """
    from shapely.geometry import LineString

    if fam.n != 2:
        raise ConfigError("side_and_tangency_check is planar")
    nodes = np.sort(locus.thetas[locus.found])
    step = np.radians(max_spacing_deg)
    parts = [np.linspace(a, b, int(np.ceil((b - a) / step)) + 1)[:-1] for a, b in zip(nodes[:-1], nodes[1:])]
    spline, lo, hi = _locus_spline(conjugate_locus(fam, np.concatenate([*parts, nodes[-1:]])))
    dense = spline(np.linspace(lo, hi, refine * max(len(locus.thetas), 2)))
    locus_line = LineString(dense)
    h = fam.step
    # end nodes are skipped: the locus is only known on one side of them
    found = np.flatnonzero(locus.found)[1:-1]
    picks = list(found[::sample_every])
    evs = [locus.events[i] for i in picks]
    th = np.array([e.theta for e in evs])
    ends = np.array([e.t_star for e in evs]) - tie_steps * h
    st = fam.stepper(th, variations=False)
    nmax = int(np.ceil(ends.max() / h))
    paths = np.full((len(evs), nmax + 1, 2), np.nan)
    paths[:, 0] = st.q
    for k in range(1, nmax + 1):
        st.step(h)
        live = k * h <= ends
        paths[live, k] = st.q[live]
    crossed, angles, exempt = [], [], []
    scale = fam.speed
    for j, e in enumerate(evs):
        p = paths[j][~np.isnan(paths[j, :, 0])]
        crossed.append(bool(LineString(p).crosses(locus_line) or LineString(p).intersects(locus_line)))
        if np.linalg.norm(e.velocity) < 1e-6 * scale:
            exempt.append(True)
            angles.append(np.nan)
        else:
            exempt.append(False)
            angles.append(line_angle_deg(e.velocity, spline(e.theta, 1)))
    angles = np.array(angles)
    passed = not any(crossed) and bool(np.all(np.nan_to_num(angles, nan=0.0) < angle_tol_deg))
    return SideTangencyReport(np.degrees(th), np.array(crossed), angles, np.array(exempt), passed, angle_tol_deg)


def _arclength_events(fam: FamilyMap, thetas: np.ndarray, delta_theta: float, brake_f: float):
    """Conjugate points of the family reparameterized by JM arclength.

    Members and their theta-neighbours are integrated without variations;
    positions are Hermite-interpolated in arclength s (dq/ds = v / f on the
    energy shell) and det[dGamma/ds, dGamma/dtheta] is formed by central
    differences in theta at fixed s.  Members that brake are truncated there.
    """
    h = fam.step
    m = thetas.size
    grid = np.concatenate([thetas, thetas + delta_theta, thetas - delta_theta])
    st = fam.stepper(grid, variations=False)
    nsteps = int(math.ceil(fam.t_max / h - 1e-9))
    qs = np.empty((nsteps + 1, grid.size, 2))
    vs = np.empty_like(qs)
    qs[0], vs[0] = st.q, st.v
    for k in range(1, nsteps + 1):
        st.step(h)
        qs[k], vs[k] = st.q, st.v
    t = np.arange(nsteps + 1) * h
    f = fam.system.f(qs.reshape(-1, 2)).reshape(nsteps + 1, grid.size)
    curves = []
    for i in range(grid.size):
        bad = np.flatnonzero(f[1:, i] <= brake_f)
        end = bad[0] if bad.size else nsteps
        ff = np.maximum(f[: end + 1, i], 0.0)
        speed = np.linalg.norm(vs[: end + 1, i], axis=1)
        integrand = np.sqrt(ff) * speed
        from scipy.integrate import cumulative_simpson

        s_nodes = cumulative_simpson(integrand, x=t[: end + 1], initial=0.0)
        dqds = vs[: end + 1, i] / np.where(integrand > 0, integrand, np.inf)[:, None]
        dqds[0] = vs[0, i] / integrand[0]
        curves.append((CubicHermiteSpline(s_nodes, qs[: end + 1, i], dqds, axis=0), s_nodes, bool(bad.size)))
    events = []
    for i in range(m):
        c, s_nodes, braked = curves[i]
        cp, sp, _ = curves[m + i]
        cm, sm, _ = curves[2 * m + i]
        s_hi = min(s_nodes[-1], sp[-1], sm[-1])

        def det_s(s):
            d1 = c(s, 1)
            d2 = (cp(s) - cm(s)) / (2 * delta_theta)
            return d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]

        s_floor = s_nodes[min(10, len(s_nodes) - 1)]
        nodes = s_nodes[(s_nodes > s_floor) & (s_nodes <= s_hi)]
        if nodes.size < 2:
            events.append(None)
            continue
        d = det_s(nodes)
        sign = np.flatnonzero(np.sign(d[1:]) != np.sign(d[:-1]))
        if sign.size == 0:
            events.append(None)
            continue
        j = sign[0]
        s_star = brentq(det_s, nodes[j], nodes[j + 1], xtol=1e-14, rtol=1e-14)
        events.append(c(s_star))
    return events


@dataclass
class InvarianceReport:
    hausdorff: float
    compared: int
    excluded_thetas_deg: list


def reparam_invariance_check(fam: FamilyMap, thetas, delta_theta: float = 1e-4,
                             brake_f: float = 1e-10) -> InvarianceReport:
    """Symmetric Hausdorff distance between the Newtonian-time locus and the
    locus of the JM-arclength family, over directions where both exist."""
    if fam.n != 2:
        raise ConfigError("reparam_invariance_check is planar")
    th = np.asarray(thetas, dtype=float).ravel()
    newton = _scan(fam, th)
    arc = _arclength_events(fam, th, delta_theta, brake_f)
    a, b, excluded = [], [], []
    for x, en, ea in zip(th, newton, arc):
        if en is None or ea is None:
            excluded.append(float(np.degrees(x)))
            continue
        a.append(en.point)
        b.append(ea)
    if not a:
        return InvarianceReport(float("nan"), 0, excluded)
    a, b = np.array(a), np.array(b)
    dist = max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])
    return InvarianceReport(float(dist), len(a), excluded)


def locus_rows(locus: Locus, fam: FamilyMap, folds: Sequence[Optional[FoldReport]] | None = None) -> np.ndarray:
    """Rows (theta_deg, t_star, p..., det_deriv_kernel, fold_ok) of found events."""
    rows = []
    for i, e in enumerate(locus.events):
        if e is None:
            continue
        fr = folds[i] if folds is not None else None
        th = np.degrees(e.theta) if fam.n == 2 else np.degrees(np.linalg.norm(e.theta))
        rows.append([th, e.t_star, *e.point,
                     fr.det_derivative_along_kernel if fr else np.nan,
                     float(fr.certified) if fr else np.nan])
    return np.array(rows)
