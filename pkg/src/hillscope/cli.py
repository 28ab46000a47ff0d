"""Command-line scenario runner: ``hillscope <subcommand> <scenario.json> [flags]``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 when the
scenario is invalid (the offending key path is printed).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hillscope import conjugate as cj
from hillscope import model as mdl
from hillscope import seifert as sf
from hillscope.core import ConfigError, DomainError, ScenarioConfig, State, load_scenario
from hillscope.dynamics import IntegratorOptions, detect_brake, integrate, write_trajectory_csv
from hillscope.svg import PALETTE, Figure, bounds

SUBCOMMANDS = (
    "simulate", "model-envelope", "conjugate-locus", "fold-report", "downward-cone",
    "seifert-build", "seifert-properties", "rescale-compare", "theorem1-scan", "verify-all",
)


@dataclass
class RunManifest:
    subcommand: str
    scenario: str
    config: dict
    outputs: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    wall_time: float = 0.0
    seed: int = 0
    threads: int = 1
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand, "scenario": self.scenario, "config": self.config,
            "outputs": self.outputs, "checks": self.checks, "passed": self.passed,
            "wall_time": self.wall_time, "seed": self.seed, "threads": self.threads,
            "data": sf._jsonable(self.data),
        }


@dataclass
class Run:
    cfg: ScenarioConfig
    out: Path
    svg: bool
    threads: int
    flip: bool
    manifest: RunManifest
    _chart: object = None

    def write_csv(self, name: str, header: list[str], rows) -> None:
        path = self.out / name
        rows = np.asarray(rows, dtype=float).reshape(-1, len(header))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join("%.17g" % x for x in r) + "\n")
        self.manifest.outputs.append(name)

    def write_json(self, name: str, obj) -> None:
        with open(self.out / name, "w", encoding="utf-8") as fh:
            json.dump(sf._jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.manifest.outputs.append(name)

    def save_svg(self, name: str, fig: Figure) -> None:
        if self.svg:
            fig.save(self.out / name)
            self.manifest.outputs.append(name)

    def check(self, name: str, passed: bool, **measured) -> None:
        self.manifest.checks.append({"name": name, "pass": bool(passed), "measured": sf._jsonable(measured)})

    def report(self, rep: "sf.PropertyReport") -> None:
        name = f"property{rep.property}"
        if any(c["name"] == name for c in self.manifest.checks):
            return  # verify-all reaches the chart metric check twice
        d = rep.to_dict()
        self.manifest.checks.append({"name": name, **d})

    def section(self, name: str):
        sec = getattr(self.cfg.experiment, name)
        if sec is None:
            raise ConfigError("missing required section", f"experiment.{name}")
        return sec

    def chart(self) -> "sf.SeifertChart":
        if self._chart is None:
            sp = self.section("seifert")
            self._chart = sf.build_chart(self.cfg.system, sp.q0, sp.extent, sp.height,
                                         step=self.cfg.experiment.step, tol_boundary=self.cfg.experiment.tol_boundary)
        return self._chart


def _family(run: Run) -> tuple[cj.FamilyMap, np.ndarray]:
    sp = run.section("family")
    exp = run.cfg.experiment
    fam = cj.FamilyMap.build(run.cfg.system, sp.base, t_max=sp.t_max, step=exp.step,
                             tol_boundary=exp.tol_boundary)
    thetas = np.radians(np.linspace(sp.theta_min_deg, sp.theta_max_deg, sp.n_theta))
    return fam, thetas


def cmd_simulate(run: Run) -> None:
    sp = run.section("simulate")
    exp = run.cfg.experiment
    opts = IntegratorOptions(step=exp.step, method=sp.method, energy_tol=exp.energy_tol,
                             tol_boundary=exp.tol_boundary)
    traj = integrate(run.cfg.system, State(sp.init_q, sp.init_v), sp.t_span, opts)
    write_trajectory_csv(traj, run.out / "trajectory.csv")
    run.manifest.outputs.append("trajectory.csv")
    brakes = detect_brake(traj, exp.brake_tol)
    run.manifest.data["brakes"] = [{"t": b.t_brake, "q": b.q_brake, "residual_speed": b.residual_speed}
                                   for b in brakes]
    run.manifest.data["exited"] = bool(traj.meta.get("exited"))
    run.check("energy_drift", traj.energy_drift <= exp.energy_tol, drift=traj.energy_drift, tol=exp.energy_tol)
    if run.cfg.system.dimension == 2:
        fig = Figure(*bounds(traj.q, pad=0.25), flip=run.flip, title="trajectory")
        fig.hill_boundary(run.cfg.system)
        fig.polyline(traj.q, PALETTE[0], 1.5)
        for b in brakes:
            fig.circle(b.q_brake, 4, PALETTE[1])
        run.save_svg("trajectory.svg", fig)


def cmd_model_envelope(run: Run) -> None:
    sp = run.section("model")
    p = mdl.ModelPoint.planar(sp.x0, sp.y0)
    degs = np.linspace(sp.theta_min_deg, sp.theta_max_deg, sp.n_theta)
    fam_rows = mdl.throw_family(p, degs, sp.g)
    env = mdl.envelope_samples(p, degs, sp.g)
    run.write_csv("model_family.csv", ["theta_deg", "t", "x", "y"], fam_rows)
    run.write_csv("envelope.csv", ["theta_deg", "t_star", "x", "y"], env)
    # the numerical pipeline must reproduce the closed-form envelope
    system = mdl.model_system(2, sp.g)
    fam = cj.FamilyMap.build(system, p.position, t_max=1.05 * env[:, 1].max(), step=run.cfg.experiment.step)
    loc = cj.conjugate_locus(fam, np.radians(degs), threads=run.threads)
    pts = loc.points[loc.found]
    dev = float(np.max(np.abs(pts[:, 1] - mdl.envelope_height(p, pts[:, 0])))) if len(pts) else float("inf")
    run.check("numerical_envelope", dev < 1e-6 and loc.found.all(), max_deviation=dev, gaps=loc.gaps)
    fig = Figure(*bounds(env[:, 2:], [[sp.x0, 0.0], [sp.x0, sp.y0]], pad=0.1), flip=run.flip,
                 title="throws from the base and their envelope")
    fig.hill_boundary(system)
    for k, th in enumerate(degs):
        rows = fam_rows[fam_rows[:, 0] == th]
        fig.polyline(rows[:, 2:], "#9ab", 0.7)
    xs = np.linspace(env[:, 2].min(), env[:, 2].max(), 200)
    fig.polyline(np.column_stack([xs, mdl.envelope_height(p, xs)]), PALETTE[1], 2.0)
    fig.circle(p.position, 4, PALETTE[0])
    run.save_svg("model_envelope.svg", fig)


def _locus_and_folds(run: Run):
    fam, thetas = _family(run)
    loc = cj.conjugate_locus(fam, thetas, threads=run.threads)
    sp = run.section("family")
    found = [e for e in loc.events if e is not None]
    reps = cj.fold_checks(fam, found, rank_tol=sp.rank_tol, fold_tol=sp.fold_tol, angle_tol_deg=sp.angle_tol_deg)
    it = iter(reps)
    folds = [next(it) if e is not None else None for e in loc.events]
    return fam, loc, folds


def cmd_conjugate_locus(run: Run) -> None:
    fam, loc, folds = _locus_and_folds(run)
    n = fam.n
    header = ["theta_deg", "t_star"] + [f"p{c}" for c in "xyz"[:n]] + ["det_deriv_kernel", "fold_ok"]
    if n > 3:
        header = ["theta_deg", "t_star"] + [f"p{i + 1}" for i in range(n)] + ["det_deriv_kernel", "fold_ok"]
    run.write_csv("locus.csv", header, cj.locus_rows(loc, fam, folds))
    run.manifest.data["gaps_deg"] = np.degrees(loc.thetas[loc.gaps]) if n == 2 else loc.gaps
    run.check("locus_nonempty", loc.found.any(), found=int(loc.found.sum()), total=len(loc.events))
    if n != 2 or not loc.found.any():
        return
    side = cj.side_and_tangency_check(fam, loc, angle_tol_deg=run.section("family").angle_tol_deg)
    run.check("side_and_tangency", side.passed, crossed=int(side.crossed.sum()),
              max_tangency_angle_deg=float(np.nanmax(side.tangency_angle_deg, initial=0.0)),
              exempt=int(side.exempt.sum()))
    pts = loc.points[loc.found]
    fig = Figure(*bounds(pts, fam.base[None], pad=0.3), flip=run.flip, title="geodesic family and conjugate locus")
    fig.hill_boundary(fam.system)
    sample = loc.events[:: max(1, len(loc.events) // 15)]
    th = np.array([e.theta for e in sample if e is not None])
    if th.size:
        st = fam.stepper(th, variations=False)
        paths = [st.q.copy()]
        ends = 1.3 * np.array([e.t_star for e in sample if e is not None])
        for k in range(int(ends.max() / fam.step)):
            st.step(fam.step)
            paths.append(np.where((k * fam.step < ends)[:, None], st.q, np.nan))
        paths = np.array(paths)
        for j in range(th.size):
            fig.polyline(paths[:, j], "#9ab", 0.7)
    fig.polyline(pts, PALETTE[1], 2.0)
    fig.circle(fam.base, 4, PALETTE[0])
    run.save_svg("locus.svg", fig)


def cmd_fold_report(run: Run) -> None:
    fam, loc, folds = _locus_and_folds(run)
    recs = []
    for e, fr in zip(loc.events, folds):
        if e is None:
            continue
        recs.append({"theta": e.theta, "t_star": e.t_star, "point": e.point, **fr.to_dict()})
    run.write_json("folds.json", recs)
    bad = [r["theta"] for r in recs if not r["certified"]]
    run.check("all_folds_certified", bool(recs) and not bad, events=len(recs), uncertified_thetas=bad)


def cmd_downward_cone(run: Run) -> None:
    sp = run.section("cone")
    exp = run.cfg.experiment
    t_max = exp.family.t_max if exp.family is not None else 10.0
    bases = [np.asarray(b, dtype=float) for b in sp.bases]
    labels = [f"base{i}" for i in range(len(bases))]
    if sp.chart_heights:
        q0 = run.section("seifert").q0
        gf = run.cfg.system.grad_f(q0)
        nrm = gf / np.linalg.norm(gf)
        for h in sp.chart_heights:
            bases.append(q0 + h * nrm)
            labels.append(f"height{h:g}")
    if not bases:
        raise ConfigError("no bases configured", "experiment.cone.bases")
    rows, summary = [], []
    for i, b in enumerate(bases):
        fam = cj.FamilyMap.build(run.cfg.system, b, t_max=t_max, step=exp.step, tol_boundary=exp.tol_boundary)
        cone = cj.downward_cone(fam)
        for th, hc, below in cone.records:
            rows.append([i, th, np.nan if hc is None else hc, np.nan if below is None else float(below)])
        summary.append([i, *b, cone.aperture_deg, cone.side_apertures_deg.get("+", np.nan),
                        cone.side_apertures_deg.get("-", np.nan)])
        brake_below = [r for r in cone.records if r[0] == 0.0 and r[2]]
        run.check(f"brake_direction_in_cone[{labels[i]}]", bool(brake_below), aperture_deg=cone.aperture_deg)
        if sp.expected_aperture_deg is not None and i < len(sp.bases):
            err = abs(cone.aperture_deg - sp.expected_aperture_deg)
            run.check(f"aperture[{labels[i]}]", err <= sp.aperture_tol_deg, aperture_deg=cone.aperture_deg,
                      expected=sp.expected_aperture_deg, tol=sp.aperture_tol_deg)
    n = run.cfg.system.dimension
    run.write_csv("cone_records.csv", ["base", "theta_deg", "conj_height", "below"], rows)
    run.write_csv("cone_summary.csv", ["base"] + [f"q{k + 1}" for k in range(n)]
                  + ["aperture_deg", "aperture_plus_deg", "aperture_minus_deg"], summary)
    if len(sp.chart_heights) >= 2:
        order = np.argsort(sp.chart_heights)[::-1]  # far to near
        aps = np.array([summary[len(sp.bases) + k][n + 1] for k in order])
        gaps = np.abs(aps - 45.0)
        trend = bool(np.all(np.diff(gaps) <= 1e-9) and gaps[-1] <= 2.0)
        run.check("aperture_trend_to_45", trend, apertures_far_to_near=aps)


def cmd_seifert_build(run: Run) -> None:
    chart = run.chart()
    run.write_csv("chart.csv", ["x1", "y", "q1", "q2"], chart.rows())
    run.report(sf.chart_metric_check(chart))
    W, H = chart.extent, chart.height
    corners = chart.forward(np.array([-W, W, -W, W]), np.array([0, 0, H, H]))
    fig = Figure(*bounds(corners, pad=0.2), flip=run.flip, title="Seifert chart lines")
    fig.hill_boundary(run.cfg.system)
    for x in np.linspace(-W, W, 11):
        fig.polyline(chart.forward(np.full(50, x), np.linspace(0, H, 50)), PALETTE[0], 0.8)
    for y in np.linspace(0, H, 7):
        fig.polyline(chart.forward(np.linspace(-W, W, 50), np.full(50, y)), PALETTE[2], 0.8)
    fig.circle(chart.center, 4, PALETTE[1])
    run.save_svg("chart.svg", fig)


def cmd_seifert_properties(run: Run) -> None:
    chart = run.chart()
    sp = run.section("seifert")
    step = run.cfg.experiment.step
    run.report(sf.property1_check(chart, sp.heights, step=step))
    run.report(sf.chart_metric_check(chart))
    p3 = sf.property3_check(chart, sp.lam * sp.eps_B, sp.eps_B, sp.delta_deg, step=step)
    run.report(p3)
    run.report(sf.property4_check(chart, step=step))
    run.report(sf.property5_check(chart, sp.h_values, step=step))
    run.write_json("properties.json", [c for c in run.manifest.checks if c["name"].startswith("property")])
    fig = _cylinder_figure(run, chart, sp.lam * sp.eps_B, sp.eps_B, p3.witness)
    run.save_svg("cylinders.svg", fig)


def _cylinder_figure(run: Run, chart, roof_a: float, roof_b: float, witness=None) -> Figure:
    W = chart.extent
    fig = Figure((-W, W), (-0.1 * roof_a, 2.0 * roof_a), flip=run.flip, title="cylinders A and B (chart coordinates)")
    fig.polyline([(-W, 0), (W, 0)], "#555", 1.5)
    fig.rect((-W, 0), (W, roof_a), PALETTE[0])
    fig.rect((-0.5 * W, 0), (0.5 * W, roof_b), PALETTE[2])
    vert = [(0.0, 0.6 * roof_b)] if witness is None else [witness["vertex"]]
    p = sf.chart_paths(chart, vert, 1.9 * roof_a, W, run.cfg.experiment.step)[0]
    fig.polyline(p.xy, PALETTE[1] if witness is None else "#f00", 1.5)
    return fig


def cmd_rescale_compare(run: Run) -> None:
    chart = run.chart()
    sp = run.section("seifert")
    rep = sf.rescale_compare(chart, sp.eps_list, step=run.cfg.experiment.step)
    run.write_csv("rescale.csv", ["eps", "deviation", "deviation_over_eps"],
                  np.column_stack([rep.eps, rep.deviation, rep.ratio]))
    run.check("deviation_is_order_eps", rep.passed, ratio=rep.ratio, factor=rep.factor)
    metric = sf.chart_metric_check(chart)
    run.manifest.data["f1"] = {"a": metric.measured["f1_a"], "b": metric.measured["f1_b"]}
    if sp.expected_f1_a is not None:
        a = metric.measured["f1_a"]
        rel = abs(a - sp.expected_f1_a) / abs(sp.expected_f1_a)
        run.check("f1_coefficient", rel <= 0.1, measured=a, expected=sp.expected_f1_a, rel_error=rel)


def cmd_theorem1_scan(run: Run) -> None:
    chart = run.chart()
    sp = run.section("seifert")
    rep = sf.theorem1_scan(chart, sp.approach_dist, sp.entry_lam, step=run.cfg.experiment.step)
    rows = [[*pr.vertex, *pr.entry_point, pr.entry_height, pr.theta_deg, *pr.conjugate_point,
             pr.conjugate_height, pr.t_star] for pr in rep.pairs]
    run.write_csv("conjugate_pairs.csv", ["vertex_x", "vertex_y", "entry_q1", "entry_q2", "entry_height",
                                          "theta_deg", "conj_q1", "conj_q2", "conj_height", "t_star"], rows)
    run.manifest.data["pairs"] = [{"vertex": pr.vertex, "entry": pr.entry_point, "conjugate": pr.conjugate_point,
                                   "entry_height": pr.entry_height, "conjugate_height": pr.conjugate_height}
                                  for pr in rep.pairs]
    run.check("theorem1_pairs", rep.passed, samples=rep.samples, pairs=len(rep.pairs), missing=rep.missing,
              skipped=rep.skipped, max_height=rep.max_height, height_bound=rep.height_bound)


def cmd_verify_all(run: Run) -> None:
    exp = run.cfg.experiment
    plan = [
        ("simulate", exp.simulate, cmd_simulate),
        ("model", exp.model, cmd_model_envelope),
        ("family", exp.family, cmd_conjugate_locus),
        ("family", exp.family, cmd_fold_report),
        ("cone", exp.cone, cmd_downward_cone),
        ("seifert", exp.seifert, cmd_seifert_build),
        ("seifert", exp.seifert, cmd_seifert_properties),
        ("seifert", exp.seifert, cmd_rescale_compare),
        ("seifert", exp.seifert, cmd_theorem1_scan),
    ]
    for _, sec, fn in plan:
        if sec is not None:
            fn(run)


COMMANDS = {
    "simulate": cmd_simulate,
    "model-envelope": cmd_model_envelope,
    "conjugate-locus": cmd_conjugate_locus,
    "fold-report": cmd_fold_report,
    "downward-cone": cmd_downward_cone,
    "seifert-build": cmd_seifert_build,
    "seifert-properties": cmd_seifert_properties,
    "rescale-compare": cmd_rescale_compare,
    "theorem1-scan": cmd_theorem1_scan,
    "verify-all": cmd_verify_all,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hillscope", description="Conjugate points near Hill boundaries.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("scenario", help="scenario JSON file")
    ap.add_argument("--out", default="./out", help="output directory (default ./out)")
    ap.add_argument("--svg", action=argparse.BooleanOptionalAction, default=True, help="write SVG figures")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    ap.add_argument("--seed", type=int, default=0, help="reserved; all pipelines use fixed grids")
    ap.add_argument("--flip", action="store_true", help="draw with the vertical axis reversed")
    return ap


def run(argv=None) -> tuple[int, RunManifest | None]:
    args = build_parser().parse_args(argv)
    threads = args.threads or os.cpu_count() or 1
    t0 = time.perf_counter()
    try:
        cfg = load_scenario(args.scenario)
    except (ConfigError, OSError) as err:
        print(f"hillscope: invalid scenario: {err}", file=sys.stderr)
        return 2, None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(args.subcommand, str(args.scenario), cfg.raw, seed=args.seed, threads=threads)
    ctx = Run(cfg, out, args.svg, threads, args.flip, man)
    try:
        COMMANDS[args.subcommand](ctx)
    except (ConfigError, DomainError, sf.ChartError) as err:
        print(f"hillscope: {err}", file=sys.stderr)
        return 2, None
    man.wall_time = time.perf_counter() - t0
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(man.to_dict(), fh, indent=2)
        fh.write("\n")
    for c in man.checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']}")
        if not c["pass"]:
            print(json.dumps(c), file=sys.stderr)
    return (0 if man.passed else 1), man


def main(argv=None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
