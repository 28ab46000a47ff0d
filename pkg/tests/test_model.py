import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hillscope.core import ConfigError
from hillscope.model import (
    ModelPoint,
    ThrowParams,
    ballistic_state,
    brake_point_taylor,
    brake_time,
    critical_time,
    envelope_height,
    envelope_hypersurface,
    envelope_point,
    fold_certificate_model,
    gamma_det_gradient,
    gamma_jacobian,
    minimum_height,
    model_energy,
)

P = ModelPoint.planar(0.0, 1.0)
angles = st.floats(-1.3, 1.3)


@given(angles, st.floats(0.0, 6.0))
def test_energy_is_zero_along_throws(theta, t):
    assert abs(model_energy(P, ThrowParams(theta), t)) < 1e-12


def test_thirty_degree_throw():
    tp = ThrowParams(np.radians(30))
    assert np.isclose(critical_time(P, tp), 4 / np.sqrt(3))
    assert np.allclose(envelope_point(P, tp), [2 / np.sqrt(3), 1 / 3])


def test_brake_throw():
    tp = ThrowParams(0.0)
    assert critical_time(P, tp) == 2.0 == brake_time(P)
    assert np.allclose(envelope_point(P, tp), [0.0, 0.0])


def test_non_downward_throw_has_no_critical_time():
    with pytest.raises(ValueError):
        critical_time(P, ThrowParams(2.0))


@given(angles, st.floats(0.1, 4.0), st.floats(-2, 2))
def test_envelope_lies_on_parabola(theta, y0, x0):
    p = ModelPoint.planar(x0, y0)
    q = envelope_point(p, ThrowParams(theta))
    assert abs(q[1] - envelope_height(p, q[0])) < 1e-9 * (1 + q[1])
    assert np.isclose(q[1], y0 * np.tan(theta) ** 2)


@given(angles, st.floats(0.2, 5.0))
@settings(max_examples=40)
def test_jacobian_matches_finite_differences(theta, t):
    tp = ThrowParams(theta)
    jac, det = gamma_jacobian(P, tp, t)
    e = 1e-6
    dt = (ballistic_state(P, tp, t + e).q - ballistic_state(P, tp, t - e).q) / (2 * e)
    dth = (ballistic_state(P, ThrowParams(theta + e), t).q - ballistic_state(P, ThrowParams(theta - e), t).q) / (2 * e)
    assert np.allclose(jac[:, 0], dt, atol=1e-8)
    assert np.allclose(jac[:, 1], dth, atol=1e-8)
    assert np.isclose(det, np.linalg.det(jac), atol=1e-12)


@given(angles)
def test_critical_locus_satisfies_v2_t_equals_2y0(theta):
    tp = ThrowParams(theta)
    ts = critical_time(P, tp)
    _, v2 = tp.velocity(P)
    assert abs(v2 * ts - 2.0) < 1e-12
    assert abs(gamma_jacobian(P, tp, ts)[1]) < 1e-12


def test_det_gradient_matches_finite_differences():
    tp = ThrowParams(0.4)
    t = 1.3
    g = gamma_det_gradient(P, tp, t)
    e = 1e-6
    dt = (gamma_jacobian(P, tp, t + e)[1] - gamma_jacobian(P, tp, t - e)[1]) / (2 * e)
    dth = (gamma_jacobian(P, ThrowParams(0.4 + e), t)[1] - gamma_jacobian(P, ThrowParams(0.4 - e), t)[1]) / (2 * e)
    assert np.allclose(g, [dt, dth], atol=1e-8)


def test_fold_certificates():
    r = fold_certificate_model(P, ThrowParams(np.radians(30)))
    assert r.certified
    k = r.kernel / r.kernel[0]
    assert np.allclose(k, [1.0, -0.25])  # proportional to (2, -0.5)
    b = fold_certificate_model(P, ThrowParams(0.0))
    assert b.certified and np.allclose(np.abs(b.kernel), [1, 0])
    assert np.isclose(b.transversality_angle, 90.0)
    assert np.isclose(b.det_derivative_along_kernel, -1.0)


@given(st.floats(-0.05, 0.05), st.floats(0.0, 0.1))
def test_brake_taylor_expansion(theta, h):
    tp = ThrowParams(theta)
    q = ballistic_state(P, tp, critical_time(P, tp) + h).q
    approx = brake_point_taylor(P, theta, h)
    a = abs(theta)
    assert abs(q[0] - approx[0]) <= 2 * (a * h + a**3) + 1e-15
    assert abs(q[1] - approx[1]) <= 2 * (a * a * h + a**4) + 1e-15


def test_minimum_height_and_hypersurface():
    tp = ThrowParams(np.radians(30))
    assert np.isclose(minimum_height(P, tp), 0.25)
    p3 = ModelPoint(np.array([0.0, 0.0]), 2.0)
    pts = envelope_hypersurface(p3)
    assert pts.shape[1] == 3
    assert np.allclose(pts[:, 2], (pts[:, 0] ** 2 + pts[:, 1] ** 2) / 8.0)
    with pytest.raises(ConfigError):
        ModelPoint.planar(0.0, -1.0)
