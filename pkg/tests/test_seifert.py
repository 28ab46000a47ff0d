import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oscillator
from hillscope.core import MechanicalSystem, PolynomialPotential
from hillscope.model import model_system
from hillscope.seifert import (
    ChartError,
    build_chart,
    chart_metric_check,
    chart_paths,
    property1_check,
    property3_check,
    property4_check,
    property5_check,
    rescale_compare,
    sample_vertices,
    theorem1_scan,
)

HEIGHTS = [0.01, 0.02, 0.04, 0.08]


def test_model_chart_is_the_identity(model_chart):
    # with g = 1/2 the model is already in normal form: x = X, y = Y
    rows = model_chart.rows()
    assert np.max(np.abs(rows[:, 2:] - rows[:, :2])) < 1e-9
    assert model_chart.scale == pytest.approx(1.0)


@given(st.floats(-0.5, 0.5), st.floats(0.0, 0.3))
@settings(max_examples=40, deadline=None)
def test_inverse_roundtrip(osc_chart, x, y):
    q = osc_chart.forward(x, y)
    assert np.allclose(osc_chart.inverse(q), [x, y], atol=1e-8)


def test_chart_bottom_edge_is_on_the_boundary(osc_chart, model_chart):
    xs = np.linspace(-0.5, 0.5, 41)
    for c in (osc_chart, model_chart):
        assert np.max(np.abs(c.system.f(c.boundary_point(xs)))) < 1e-9


def test_oscillator_vertical_lines_are_radial(osc_chart):
    # brake orbits of the isotropic oscillator are radial segments
    for x in (-0.4, 0.0, 0.3):
        q = osc_chart.forward(np.full(9, x), np.linspace(0.0, 0.3, 9))
        ang = np.arctan2(q[:, 1], q[:, 0])
        assert np.ptp(ang) < 1e-9


def test_chart_rejects_bad_centres(osc2):
    with pytest.raises(ChartError):
        build_chart(osc2, [0.5, 0.0])  # interior point
    with pytest.raises(ChartError):
        build_chart(oscillator(3), [1.0, 0.0, 0.0])
    flat = MechanicalSystem(PolynomialPotential(2, ((1.0, (2, 0)), (-1.0, (0, 2)))), 0.0)
    with pytest.raises(ChartError):
        build_chart(flat, [0.0, 0.0])  # critical point of V on the boundary


@pytest.mark.parametrize("name", ["model_chart", "osc_chart", "pert_chart"])
def test_property1_distance_exponent(request, name):
    rep = property1_check(request.getfixturevalue(name), HEIGHTS)
    assert rep.passed
    assert abs(rep.measured["slope"] - 1.5) < 1e-6
    assert abs(rep.measured["prefactor"] - 2 / 3) < 1e-6


def test_property1_needs_three_heights(model_chart):
    with pytest.raises(ValueError, match="need >= 3 heights"):
        property1_check(model_chart, [0.01, 0.02])


@pytest.mark.parametrize("name", ["model_chart", "osc_chart", "pert_chart"])
def test_property2_metric_normal_form(request, name):
    rep = property2 = chart_metric_check(request.getfixturevalue(name))
    assert property2.passed
    assert rep.to_dict()["pass"] is True


def test_perturbed_first_order_coefficient(pert_chart):
    m = chart_metric_check(pert_chart).measured
    assert abs(m["f1_a"] - 1 / 15) / (1 / 15) < 0.1


@pytest.mark.parametrize("name", ["model_chart", "osc_chart"])
def test_property3_steep_exit(request, name):
    rep = property3_check(request.getfixturevalue(name), 0.022, 0.01)
    assert rep.passed and rep.measured["max_angle_deg"] < 44.0


def test_property3_reports_witness_when_roof_is_too_low(model_chart):
    rep = property3_check(model_chart, 0.028, 0.02)
    assert not rep.passed
    assert rep.witness["angle_deg"] >= 44.0


def test_property3_model_exit_angle_law(model_chart):
    # parabola y - ym = x^2 / (4 ym) is at 45 degrees exactly at y = 2 ym
    verts = [(0.0, 0.01)]
    for lam, below45 in ((1.8, False), (2.2, True)):
        p = chart_paths(model_chart, verts, lam * 0.01)[0]
        a, b = p.xy[-1], p.xy[-2]
        ang = math.degrees(math.atan2(abs(a[0] - b[0]), abs(a[1] - b[1])))
        exact = math.degrees(math.atan(1 / math.sqrt(lam - 1)))
        assert abs(ang - exact) < 0.5
        assert (ang < 45.0) == below45


def test_property3_argument_checks(model_chart):
    with pytest.raises(ValueError):
        property3_check(model_chart, 0.01, 0.02)
    with pytest.raises(ValueError):
        property3_check(model_chart, 0.04, 0.02, delta_deg=50.0)


@pytest.mark.parametrize("name", ["model_chart", "osc_chart", "pert_chart"])
def test_property4_convex_height(request, name):
    rep = property4_check(request.getfixturevalue(name))
    assert rep.passed and rep.measured["samples"] == 25


@pytest.mark.parametrize("name", ["model_chart", "osc_chart"])
def test_property5_residence(request, name):
    rep = property5_check(request.getfixturevalue(name), HEIGHTS)
    assert rep.passed
    assert abs(rep.measured["sqrt_h_slope"] - 0.5) <= 0.02


def test_model_residence_is_exact(model_chart):
    # brake orbit from height h: t = 2 sqrt(2 h / g) with g = 1/2 is 4 sqrt(h)
    p = chart_paths(model_chart, [(0.0, 0.0)], 0.1)[0]
    from hillscope.seifert import _residence

    assert abs(_residence(p, 0.04) - 4 * math.sqrt(0.04)) < 2e-3


def test_sample_vertices_grid():
    v = sample_vertices(None, 1.0, 0.5, nx=3, ny=2)
    assert v.shape == (6, 2) and set(v[:, 1]) == {0.0, 0.5}


def test_rescale_oscillator_ratio_bounded(osc_chart):
    rep = rescale_compare(osc_chart, [0.1, 0.05, 0.025])
    assert rep.passed
    assert rep.ratio.max() / rep.ratio.min() <= 3.0


def test_rescale_model_is_exact(model_chart):
    rep = rescale_compare(model_chart, [0.1, 0.05])
    assert np.all(rep.deviation < 1e-6) and rep.passed


def test_theorem1_scan_oscillator(osc_chart):
    rep = theorem1_scan(osc_chart, 0.02, 2.2)
    assert rep.passed and rep.samples >= 50
    assert not rep.missing and len(rep.pairs) == rep.samples
    assert rep.max_height < 0.05
    for pr in rep.pairs:
        assert pr.conjugate_height < pr.entry_height
