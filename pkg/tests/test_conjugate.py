import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from conftest import oscillator, oscillator_conjugate
from hillscope.conjugate import (
    FamilyMap,
    conjugate_locus,
    detect_conjugate,
    downward_cone,
    family_eval,
    family_map_eval,
    fold_check,
    fold_checks,
    locus_rows,
    nearest_boundary_point,
    reparam_invariance_check,
    side_and_tangency_check,
)
from hillscope.core import ConfigError, DomainError
from hillscope.model import ModelPoint, ThrowParams, gamma_jacobian


@pytest.fixture(scope="module")
def model_fam(model2):
    return FamilyMap.build(model2, [0.0, 1.0], t_max=8.0)


@pytest.fixture(scope="module")
def osc_fam(osc2):
    return FamilyMap.build(osc2, [0.9, 0.0], t_max=4.0)


@pytest.fixture(scope="module")
def osc_locus(osc_fam):
    return conjugate_locus(osc_fam, np.radians(np.linspace(-60, 60, 25)))


def test_chart_axis_points_at_nearest_boundary(model_fam, osc_fam, osc2):
    assert np.allclose(model_fam.down, [0, -1])
    assert np.allclose(osc_fam.down, [1, 0])
    p = nearest_boundary_point(osc2, np.array([0.3, 0.4]))
    assert np.allclose(p, [0.6, 0.8], atol=1e-12)


def test_members_carry_the_energy(osc_fam, osc2):
    v0, _ = osc_fam.initial(np.radians([-40, 0, 17]))
    h = osc2.hamiltonian(np.repeat(osc_fam.base[None], 3, 0), v0)
    assert np.allclose(h, osc2.energy, atol=1e-15)


@given(st.floats(-1.4, 1.4))
def test_theta_of_inverts_directions(theta):
    fam = FamilyMap.build(oscillator(), [0.5, 0.2])
    u, _ = fam.directions([theta])
    assert abs(fam.theta_of(u[0]) - theta) < 1e-12


def test_direction_derivative_in_three_dimensions():
    fam = FamilyMap.build(oscillator(3), [0.2, 0.1, 0.3])
    th = np.array([[0.3, -0.2]])
    u, du = fam.directions(th)
    e = 1e-6
    for j in range(2):
        d = np.zeros(2)
        d[j] = e
        fd = (fam.directions(th + d)[0] - fam.directions(th - d)[0]) / (2 * e)
        assert np.allclose(fd[0], du[0, :, j], atol=1e-9)
    assert np.isclose(np.linalg.norm(u), 1.0)


def test_family_differential_matches_closed_form(model_fam):
    rng = np.random.default_rng(11)
    th = rng.uniform(-1.2, 1.2, 50)
    t = rng.uniform(0.05, 4.0, 50)
    pts, dg, _ = family_eval(model_fam, th, t)
    p = ModelPoint.planar(0.0, 1.0)
    for k in range(50):
        jac, _ = gamma_jacobian(p, ThrowParams(th[k]), t[k])
        assert np.allclose(dg[k], jac, rtol=1e-6, atol=1e-9)


def test_family_map_eval_rejects_bad_time(model_fam):
    with pytest.raises(ConfigError):
        family_map_eval(model_fam, 0.1, 0.0)
    with pytest.raises(DomainError):
        FamilyMap.build(oscillator(), [1.5, 0.0])


@pytest.mark.parametrize("n", [2, 3])
def test_origin_degeneracy_scales_like_t_power(n):
    fam = FamilyMap.build(oscillator(n), [0.3] + [0.0] * (n - 1))
    th = 0.2 if n == 2 else np.array([0.2, 0.1])
    ts = np.array([1e-3, 2e-3, 4e-3, 8e-3])
    dets = [np.linalg.det(family_map_eval(fam, th, t)[1]) for t in ts]
    ratios = np.array(dets) / ts ** (n - 1)
    # finite nonzero limit with an O(t) correction: successive gaps halve
    gaps = np.diff(ratios)
    assert np.allclose(gaps[1:] / gaps[:-1], 2.0, rtol=0.05)
    assert abs(ratios[0]) > 0.1


def test_thirty_degree_event(model_fam):
    ev = detect_conjugate(model_fam, np.radians(30))
    assert abs(ev.t_star - 4 / np.sqrt(3)) < 1e-8
    assert np.allclose(ev.point, [2 / np.sqrt(3), 1 / 3], atol=1e-8)
    assert np.sign(ev.det_before) != np.sign(ev.det_after)
    assert abs(ev.det_at) < 1e-10
    assert ev.t_star > ev.t_floor


def test_brake_direction_event(model_fam, osc_fam):
    ev = detect_conjugate(model_fam, 0.0)
    assert abs(ev.t_star - 2.0) < 1e-8 and np.allclose(ev.point, 0.0, atol=1e-8)
    ev = detect_conjugate(osc_fam, 0.0)
    assert abs(ev.t_star - np.arctan(np.sqrt(0.19) / 0.9)) < 1e-9
    assert np.allclose(ev.point, [1.0, 0.0], atol=1e-9)


def test_brake_point_by_brute_force_grid(osc_fam):
    # independent route: dense det samples of the closed-form oscillator and bisection
    a, r = 0.9, np.sqrt(0.19)
    det = lambda t: r * np.sin(t) * (r * np.cos(t) - a * np.sin(t))
    grid = np.linspace(1e-3, 3.0, 3001)
    k = np.flatnonzero(np.diff(np.sign(det(grid))))[0]
    ts = brentq(det, grid[k], grid[k + 1], xtol=1e-15)
    q = np.array([a * np.cos(ts) + r * np.sin(ts), 0.0])
    assert np.allclose(q, [1.0, 0.0], atol=1e-12)
    assert np.allclose(detect_conjugate(osc_fam, 0.0).point, q, atol=1e-9)


def test_no_sign_change_means_no_event(model_fam):
    short = FamilyMap.build(model_fam.system, [0.0, 1.0], t_max=1.0)
    assert detect_conjugate(short, 0.3) is None


def test_oscillator_locus_matches_closed_form(osc_locus):
    ts, q = oscillator_conjugate(0.9, osc_locus.thetas)
    assert np.max(np.abs(osc_locus.t_star - ts)) < 1e-9
    assert np.max(np.abs(osc_locus.points - q)) < 1e-9


def test_oscillator_locus_is_symmetric(osc_locus):
    p = osc_locus.points
    assert np.allclose(p[::-1, 0], p[:, 0], atol=1e-12)
    assert np.allclose(p[::-1, 1], -p[:, 1], atol=1e-12)


def test_model_locus_touches_boundary_only_at_brake_point(model_fam):
    loc = conjugate_locus(model_fam, np.radians(np.linspace(-60, 60, 41)))
    f = model_fam.system.f(loc.points)
    away = np.abs(loc.thetas) > 1e-12
    assert np.all(f[away] > 0) and abs(f[~away][0]) < 1e-9
    assert np.max(np.abs(loc.points[:, 1] - loc.points[:, 0] ** 2 / 4)) < 1e-6


def test_grid_resolution_and_gaps(model_fam):
    with pytest.raises(ConfigError):
        conjugate_locus(model_fam, np.radians(np.linspace(-10, 10, 5)))
    # upward directions reach no conjugate point before t_max: recorded as gaps
    loc = conjugate_locus(model_fam, np.radians(np.linspace(60, 120, 9)))
    assert loc.gaps.size > 0 and np.all(np.isnan(loc.points[loc.gaps]))


def test_threads_do_not_change_results(model_fam):
    th = np.radians(np.linspace(-50, 50, 16))
    a = conjugate_locus(model_fam, th, threads=1)
    b = conjugate_locus(model_fam, th, threads=3)
    assert np.array_equal(a.points, b.points)


def test_fold_reports(model_fam):
    r = fold_check(model_fam, detect_conjugate(model_fam, np.radians(30)))
    assert r.certified and not r.degenerate
    k = r.kernel / r.kernel[0]
    assert np.allclose(k, [1.0, -0.25], atol=1e-6)
    b = fold_check(model_fam, detect_conjugate(model_fam, 0.0))
    assert b.certified
    assert np.allclose(np.abs(b.kernel), [1.0, 0.0], atol=1e-8)
    assert np.allclose(np.abs(b.critical_tangent), [0.0, 1.0], atol=1e-6)
    assert abs(b.transversality_angle - 90.0) < 1e-4


def test_oscillator_folds_all_certified(osc_fam, osc_locus):
    reps = fold_checks(osc_fam, osc_locus.events)
    assert all(r.certified for r in reps)
    for r in reps:
        sv = r.singular_values
        assert sv[-1] / sv[0] < 1e-6


def test_three_dimensional_locus():
    fam = FamilyMap.build(oscillator(3), [0.5, 0.0, 0.0], t_max=4.0)
    th = np.array([[0.1, 0.2], [0.3, -0.1], [0.0, 0.0], [0.5, 0.5]] * 2)
    loc = conjugate_locus(fam, th)
    ang = np.linalg.norm(th, axis=1)
    ts, _ = oscillator_conjugate(0.5, ang)
    assert np.allclose(loc.t_star, ts, atol=1e-9)
    assert all(r.certified for r in fold_checks(fam, loc.events))
    assert locus_rows(loc, fam).shape == (8, 7)


@pytest.mark.parametrize("y0", [0.25, 1.0, 4.0])
def test_model_aperture_is_45_degrees(model2, y0):
    cone = downward_cone(FamilyMap.build(model2, [0.0, y0], t_max=10.0))
    assert abs(cone.aperture_deg - 45.0) < 0.05
    rec = {round(a, 6): below for a, _, below in cone.records}
    assert rec[30.0] and rec[0.0]


def _oscillator_aperture(a):
    # closed-form oracle: conjugate point lies below the base iff |q*| > a
    g = lambda th: np.linalg.norm(oscillator_conjugate(a, th)[1]) - a
    return np.degrees(brentq(g, 0.01, 1.5, xtol=1e-12))


@pytest.mark.parametrize("h", [0.08, 0.01])
def test_oscillator_aperture_matches_closed_form(osc2, h):
    cone = downward_cone(FamilyMap.build(osc2, [1 - h, 0.0], t_max=4.0))
    assert abs(cone.aperture_deg - _oscillator_aperture(1 - h)) < 0.05


def test_side_and_tangency(osc_fam, osc_locus, model_fam):
    rep = side_and_tangency_check(osc_fam, osc_locus, sample_every=1)
    assert rep.passed and not rep.crossed.any()
    k = np.argmin(np.abs(rep.thetas_deg - 20.0))
    assert rep.tangency_angle_deg[k] < 0.5
    loc = conjugate_locus(model_fam, np.radians(np.linspace(-40, 40, 17)))
    rep = side_and_tangency_check(model_fam, loc, sample_every=1)
    assert rep.passed
    assert rep.exempt[np.argmin(np.abs(rep.thetas_deg))]  # brake orbit


def test_reparameterization_invariance(model_fam, osc_fam):
    r = reparam_invariance_check(model_fam, np.radians(np.linspace(-50, 50, 11)))
    assert r.hausdorff < 1e-6
    assert 0.0 in r.excluded_thetas_deg  # the brake member cannot be arclength-parameterized
    r = reparam_invariance_check(osc_fam, np.radians(np.linspace(-50, 50, 11)))
    assert r.hausdorff < 1e-5


def test_single_direction_invariance_is_zero_or_excluded(osc_fam):
    r = reparam_invariance_check(osc_fam, [np.radians(20)])
    assert r.compared == 1 and r.hausdorff < 1e-6
