"""Domain types shared by every module: polynomial potentials, mechanical
systems, Hill-region classification and Jacobi-Maupertuis length."""
from __future__ import annotations

from dataclasses import MISSING, dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.integrate import simpson

if TYPE_CHECKING:  # pragma: no cover
    from hillscope.dynamics import Trajectory

TOL_BOUNDARY = 1e-9


class ConfigError(ValueError):
    """Invalid configuration or input shape.  ``path`` names the offending key."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DomainError(ValueError):
    """A point or trajectory left the closed Hill region."""


@dataclass(frozen=True)
class PolynomialPotential:
    dimension: int
    terms: tuple[tuple[float, tuple[int, ...]], ...]

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise ConfigError("dimension must be >= 1", "dimension")
        terms = []
        for k, (c, e) in enumerate(self.terms):
            e = tuple(int(x) for x in e)
            if len(e) != self.dimension:
                raise ConfigError(
                    f"exponent vector has length {len(e)}, expected {self.dimension}",
                    f"potential[{k}].exponents",
                )
            if any(x < 0 for x in e):
                raise ConfigError("negative exponent", f"potential[{k}].exponents")
            terms.append((float(c), e))
        object.__setattr__(self, "terms", tuple(terms))
        object.__setattr__(self, "_tables", _derivative_tables(self.dimension, terms))

    @classmethod
    def from_terms(cls, dimension: int, terms: Sequence) -> "PolynomialPotential":
        return cls(dimension, tuple((c, tuple(e)) for c, e in terms))

    @property
    def degree(self) -> int:
        return max((sum(e) for c, e in self.terms if c != 0.0), default=0)

    def evaluate(self, q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Value, gradient and Hessian at ``q`` of shape (n,) or (B, n).

        Derivatives come from formally differentiated coefficient tables, so
        they are exact up to floating-point rounding.
        """
        q = np.asarray(q, dtype=float)
        if q.shape[-1] != self.dimension:
            raise ConfigError(
                f"point has dimension {q.shape[-1]}, potential has {self.dimension}"
            )
        single = q.ndim == 1
        qb = np.atleast_2d(q)
        exps, coef = self._tables
        n = self.dimension
        if exps.shape[0] == 0:
            out = np.zeros((qb.shape[0], 1 + n + n * n))
        else:
            mono = np.prod(qb[:, None, :] ** exps[None, :, :], axis=2)
            # broadcast-and-sum keeps the reduction order independent of batch size
            out = (mono[:, :, None] * coef[None, :, :]).sum(axis=1)
        value = out[:, 0]
        grad = out[:, 1 : 1 + n]
        hess = out[:, 1 + n :].reshape(-1, n, n)
        if single:
            return value[0], grad[0], hess[0]
        return value, grad, hess

    def value(self, q):
        return self.evaluate(q)[0]

    def gradient(self, q):
        return self.evaluate(q)[1]

    def hessian(self, q):
        return self.evaluate(q)[2]


def _derivative_tables(n: int, terms) -> tuple[np.ndarray, np.ndarray]:
    """Stack V, dV/dq_i and d2V/dq_i dq_j into one monomial table.

    Returns (exponents (M, n), coefficients (M, 1 + n + n*n)); column 0 is the
    value, then the gradient, then the row-major Hessian.
    """
    index: dict[tuple[int, ...], int] = {}
    rows: list[np.ndarray] = []

    def add(exp, col, c):
        if c == 0.0:
            return
        if exp not in index:
            index[exp] = len(rows)
            rows.append(np.zeros(1 + n + n * n))
        rows[index[exp]][col] += c

    for c, e in terms:
        add(e, 0, c)
        for i in range(n):
            if e[i] == 0:
                continue
            ei = list(e)
            ei[i] -= 1
            add(tuple(ei), 1 + i, c * e[i])
            for j in range(n):
                if ei[j] == 0:
                    continue
                eij = list(ei)
                eij[j] -= 1
                add(tuple(eij), 1 + n + i * n + j, c * e[i] * ei[j])
    if not rows:
        return np.zeros((0, n)), np.zeros((0, 1 + n + n * n))
    exps = np.array(sorted(index, key=index.get), dtype=float).reshape(-1, n)
    return exps, np.array(rows)


def eval_potential(p: PolynomialPotential, q) -> tuple[float, np.ndarray, np.ndarray]:
    q = np.asarray(q, dtype=float)
    if q.shape != (p.dimension,):
        raise ConfigError(f"expected a {p.dimension}-vector, got shape {q.shape}")
    v, g, h = p.evaluate(q)
    return float(v), g, h


@dataclass(frozen=True)
class MechanicalSystem:
    """Newtonian system with Euclidean kinetic metric at a fixed energy."""

    potential: PolynomialPotential
    energy: float

    @property
    def dimension(self) -> int:
        return self.potential.dimension

    def f(self, q):
        """Conformal factor 2(E - V); accepts (n,) or (B, n)."""
        return 2.0 * (self.energy - self.potential.evaluate(q)[0])

    def grad_f(self, q):
        return -2.0 * self.potential.evaluate(q)[1]

    def hamiltonian(self, q, v):
        v = np.asarray(v, dtype=float)
        return 0.5 * np.sum(v * v, axis=-1) + self.potential.evaluate(q)[0]


def conformal_factor(s: MechanicalSystem, q) -> float:
    q = np.asarray(q, dtype=float)
    if q.shape != (s.dimension,):
        raise ConfigError(f"expected a {s.dimension}-vector, got shape {q.shape}")
    return float(s.f(q))


@dataclass(frozen=True)
class State:
    q: np.ndarray
    v: np.ndarray

    def energy(self, s: MechanicalSystem) -> float:
        return float(s.hamiltonian(self.q, self.v))


class HillKind(str, Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class HillClass:
    kind: HillKind
    f: float
    tol: float
    regular: bool = False
    grad_norm: float = 0.0


def hill_classify(s: MechanicalSystem, q, tol_boundary: float = TOL_BOUNDARY) -> HillClass:
    if not tol_boundary > 0:
        raise ConfigError("tol_boundary must be positive")
    fq = conformal_factor(s, q)
    if fq > tol_boundary:
        kind = HillKind.INTERIOR
    elif fq < -tol_boundary:
        kind = HillKind.EXTERIOR
    else:
        kind = HillKind.BOUNDARY
    gn = float(np.linalg.norm(s.grad_f(np.asarray(q, dtype=float))))
    regular = kind is HillKind.BOUNDARY and gn > tol_boundary
    return HillClass(kind, fq, tol_boundary, regular, gn)


def jm_length(s: MechanicalSystem, traj: "Trajectory", tol: float = TOL_BOUNDARY) -> float:
    """JM length of a sampled Newton solution, Simpson's rule in Newtonian time.

    The integrand is sqrt(f)|v|; f in [-tol, 0) is clamped to zero.
    """
    t = np.asarray(traj.t, dtype=float)
    if t.size < 2:
        return 0.0
    fv = s.f(traj.q)
    if np.any(fv < -tol):
        k = int(np.argmin(fv))
        raise DomainError(f"sample {k} outside the Hill region (f = {fv[k]:.3e})")
    integrand = np.sqrt(np.maximum(fv, 0.0)) * np.linalg.norm(traj.v, axis=1)
    return float(simpson(integrand, x=t))


# ---------------------------------------------------------------------------
# scenario files


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError("expected an object", path)
    for k in d:
        if k not in allowed:
            raise ConfigError("unknown key", _join(path, k))


def _join(path, key):
    return f"{path}.{key}" if path else key


def _require(d, key, path):
    if key not in d:
        raise ConfigError("missing required key", _join(path, key))
    return d[key]


def _vec(x, n, path):
    try:
        a = np.asarray(x, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected a numeric vector", path) from None
    if n is not None and a.shape != (n,):
        raise ConfigError(f"expected a {n}-vector", path)
    return a


def _pos(x, path):
    if not isinstance(x, (int, float)) or isinstance(x, bool) or not x > 0:
        raise ConfigError("must be a positive number", path)
    return float(x)


def system_from_dict(d: dict, path: str = "system") -> MechanicalSystem:
    _check_keys(d, {"dimension", "energy", "potential"}, path)
    n = _require(d, "dimension", path)
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError("must be a positive integer", f"{path}.dimension")
    energy = _require(d, "energy", path)
    if not isinstance(energy, (int, float)) or isinstance(energy, bool):
        raise ConfigError("must be a number", f"{path}.energy")
    raw = _require(d, "potential", path)
    if not isinstance(raw, list):
        raise ConfigError("expected a list of terms", f"{path}.potential")
    terms = []
    for k, term in enumerate(raw):
        tp = f"{path}.potential[{k}]"
        _check_keys(term, {"coeff", "exponents"}, tp)
        c = _require(term, "coeff", tp)
        e = _require(term, "exponents", tp)
        if not isinstance(e, list) or not all(isinstance(x, int) and x >= 0 for x in e):
            raise ConfigError("expected a list of non-negative integers", f"{tp}.exponents")
        if len(e) != n:
            raise ConfigError(f"expected {n} exponents", f"{tp}.exponents")
        terms.append((float(c), tuple(e)))
    return MechanicalSystem(PolynomialPotential(n, tuple(terms)), float(energy))


def system_to_dict(s: MechanicalSystem) -> dict:
    return {
        "dimension": s.dimension,
        "energy": s.energy,
        "potential": [{"coeff": c, "exponents": list(e)} for c, e in s.potential.terms],
    }


@dataclass
class SimulateSpec:
    init_q: np.ndarray
    init_v: np.ndarray
    t_span: tuple[float, float]
    method: str = "yoshida4"


@dataclass
class FamilySpec:
    base: np.ndarray
    theta_min_deg: float = -60.0
    theta_max_deg: float = 60.0
    n_theta: int = 61
    t_max: float = 10.0
    det_tol: float = 1e-10
    rank_tol: float = 1e-6
    fold_tol: float = 1e-8
    angle_tol_deg: float = 5.0


@dataclass
class ConeSpec:
    bases: list[np.ndarray] = field(default_factory=list)
    chart_heights: list[float] = field(default_factory=list)
    expected_aperture_deg: float | None = None
    aperture_tol_deg: float = 0.05


@dataclass
class ModelSpec:
    x0: float = 0.0
    y0: float = 1.0
    g: float = 0.5
    theta_min_deg: float = -75.0
    theta_max_deg: float = 75.0
    n_theta: int = 31


@dataclass
class SeifertSpec:
    q0: np.ndarray
    extent: float = 0.3
    height: float = 0.2
    eps_B: float = 0.01
    lam: float = 1.4
    entry_lam: float = 2.2
    delta_deg: float = 44.0
    heights: list[float] = field(default_factory=lambda: [0.01, 0.02, 0.04, 0.08])
    h_values: list[float] = field(default_factory=lambda: [0.0025, 0.005, 0.01, 0.02])
    eps_list: list[float] = field(default_factory=lambda: [0.1, 0.05, 0.025])
    approach_dist: float = 0.02
    expected_f1_a: float | None = None


@dataclass
class ExperimentConfig:
    kind: str = "lab"
    step: float = 1e-3
    tol_boundary: float = TOL_BOUNDARY
    energy_tol: float = 1e-9
    brake_tol: float = 1e-10
    simulate: SimulateSpec | None = None
    family: FamilySpec | None = None
    cone: ConeSpec | None = None
    model: ModelSpec | None = None
    seifert: SeifertSpec | None = None


@dataclass
class ScenarioConfig:
    system: MechanicalSystem
    experiment: ExperimentConfig
    raw: dict = field(default_factory=dict, repr=False)


EXPERIMENT_KINDS = ("lab", "simulate")

_FLOAT_KEYS = {
    "family": ("theta_min_deg", "theta_max_deg", "t_max", "det_tol", "rank_tol", "fold_tol", "angle_tol_deg"),
    "model": ("x0", "y0", "g", "theta_min_deg", "theta_max_deg"),
    "seifert": ("extent", "height", "eps_B", "lam", "entry_lam", "delta_deg", "approach_dist", "expected_f1_a"),
}
_POSITIVE = {"t_max", "det_tol", "rank_tol", "fold_tol", "angle_tol_deg", "y0", "g",
             "extent", "height", "eps_B", "lam", "entry_lam", "delta_deg", "approach_dist"}


def _section(cls, d, path, n, vectors=(), lists=()):
    names = {f.name for f in cls.__dataclass_fields__.values()}
    _check_keys(d, names, path)
    kw = {}
    for k, val in d.items():
        p = f"{path}.{k}"
        if k in vectors:
            kw[k] = _vec(val, n, p)
        elif k in lists:
            if not isinstance(val, list) or not val:
                raise ConfigError("expected a non-empty list", p)
            kw[k] = [_pos(x, f"{p}[{i}]") for i, x in enumerate(val)]
        elif k == "n_theta":
            if not isinstance(val, int) or isinstance(val, bool) or val < 8:
                raise ConfigError("direction-grid resolution must be an integer >= 8", p)
            kw[k] = val
        elif val is None and k == "expected_f1_a":
            kw[k] = None
        elif k in _POSITIVE:
            kw[k] = _pos(val, p)
        else:
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigError("must be a number", p)
            kw[k] = float(val)
    missing = [
        f.name for f in cls.__dataclass_fields__.values()
        if f.default is MISSING and f.default_factory is MISSING and f.name not in kw
    ]
    if missing:
        raise ConfigError("missing required key", f"{path}.{missing[0]}")
    return cls(**kw)


def experiment_from_dict(d: dict, n: int, path: str = "experiment") -> ExperimentConfig:
    _check_keys(d, {f for f in ExperimentConfig.__dataclass_fields__}, path)
    kind = _require(d, "kind", path)
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}", f"{path}.kind")
    cfg = ExperimentConfig(kind=kind)
    for k in ("step", "tol_boundary", "energy_tol", "brake_tol"):
        if k in d:
            setattr(cfg, k, _pos(d[k], f"{path}.{k}"))
    if "simulate" in d:
        sp = f"{path}.simulate"
        sd = d["simulate"]
        _check_keys(sd, {"init_q", "init_v", "t_span", "method"}, sp)
        span = _vec(_require(sd, "t_span", sp), 2, f"{sp}.t_span")
        if not span[1] != span[0]:
            raise ConfigError("degenerate time span", f"{sp}.t_span")
        method = sd.get("method", "yoshida4")
        if method not in ("yoshida4", "rk"):
            raise ConfigError("method must be 'yoshida4' or 'rk'", f"{sp}.method")
        cfg.simulate = SimulateSpec(
            _vec(_require(sd, "init_q", sp), n, f"{sp}.init_q"),
            _vec(_require(sd, "init_v", sp), n, f"{sp}.init_v"),
            (float(span[0]), float(span[1])),
            method,
        )
    if "family" in d:
        cfg.family = _section(FamilySpec, d["family"], f"{path}.family", n, vectors=("base",))
    if "cone" in d:
        cp = f"{path}.cone"
        cd = d["cone"]
        _check_keys(cd, {"bases", "chart_heights", "expected_aperture_deg", "aperture_tol_deg"}, cp)
        bases = [_vec(b, n, f"{cp}.bases[{i}]") for i, b in enumerate(cd.get("bases", []))]
        hs = [_pos(h, f"{cp}.chart_heights[{i}]") for i, h in enumerate(cd.get("chart_heights", []))]
        cfg.cone = ConeSpec(bases, hs)
        if cd.get("expected_aperture_deg") is not None:
            cfg.cone.expected_aperture_deg = _pos(cd["expected_aperture_deg"], f"{cp}.expected_aperture_deg")
        if "aperture_tol_deg" in cd:
            cfg.cone.aperture_tol_deg = _pos(cd["aperture_tol_deg"], f"{cp}.aperture_tol_deg")
    if "model" in d:
        cfg.model = _section(ModelSpec, d["model"], f"{path}.model", n)
    if "seifert" in d:
        cfg.seifert = _section(
            SeifertSpec, d["seifert"], f"{path}.seifert", n,
            vectors=("q0",), lists=("heights", "h_values", "eps_list"),
        )
    return cfg


def scenario_from_dict(d: dict) -> ScenarioConfig:
    _check_keys(d, {"system", "experiment"}, "")
    system = system_from_dict(_require(d, "system", ""), "system")
    exp = experiment_from_dict(_require(d, "experiment", ""), system.dimension)
    return ScenarioConfig(system, exp, d)


def load_scenario(path) -> ScenarioConfig:
    import json
    from pathlib import Path

    text = Path(path).read_text(encoding="utf-8")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err}") from None
    return scenario_from_dict(d)
