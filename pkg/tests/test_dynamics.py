import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hillscope.core import ConfigError, DomainError, State
from hillscope.dynamics import (
    BatchStepper,
    IntegratorOptions,
    brake_reflection_check,
    detect_brake,
    integrate,
    integrate_with_variations,
    jm_arclength,
    reparameterize,
    state_at,
    write_trajectory_csv,
)
from hillscope.model import ModelPoint, ThrowParams, ballistic_state


@given(st.floats(-1.2, 1.2), st.floats(0.1, 1.0))
@settings(max_examples=20, deadline=None)
def test_model_flow_is_reproduced_to_rounding(model2, theta, frac):
    p = ModelPoint.planar(0.0, 1.0)
    tp = ThrowParams(theta)
    init = ballistic_state(p, tp, 0.0)
    t1 = frac * 4.0
    traj = integrate(model2, init, (0.0, t1))
    exact = ballistic_state(p, tp, t1)
    assert np.max(np.abs(traj.q[-1] - exact.q)) < 1e-10


def test_oscillator_period_and_energy(osc2):
    init = State(np.array([0.9, 0.0]), np.array([0.0, np.sqrt(0.19)]))
    traj = integrate(osc2, init, (0.0, 2 * np.pi))
    assert np.max(np.abs(traj.q[-1] - init.q)) < 1e-8
    assert traj.meta["energy_drift"] < 1e-9


def test_tangent_map_matches_oscillator_closed_form(osc2):
    traj = integrate_with_variations(osc2, State(np.array([0.3, 0.2]), np.array([0.1, 0.5])), (0.0, 1.7))
    t = traj.t[-1]
    m = traj.tangent[-1]
    assert np.allclose(m[:2, 2:], np.sin(t) * np.eye(2), atol=1e-12)
    assert np.allclose(m[:2, :2], np.cos(t) * np.eye(2), atol=1e-12)
    assert abs(np.linalg.det(m) - 1.0) < 1e-10  # symplectic


def test_rk_cross_check(osc2):
    init = State(np.array([0.5, 0.1]), np.array([0.3, -0.6]))
    a = integrate(osc2, init, (0.0, 2.0))
    b = integrate(osc2, init, (0.0, 2.0), IntegratorOptions(method="rk"))
    assert np.max(np.abs(a.q[-1] - b.q[-1])) < 1e-9


def test_backward_span_returns_increasing_times(osc2):
    traj = integrate(osc2, State(np.array([0.5, 0.0]), np.array([0.0, 0.5])), (1.0, 0.0))
    assert np.all(np.diff(traj.t) > 0)
    assert traj.t[-1] == 1.0


def test_exit_truncates_and_flags(osc2):
    # starting off the energy shell the orbit leaves the Hill region
    traj = integrate(osc2, State(np.array([0.9, 0.0]), np.array([0.8, 0.0])), (0.0, 2.0))
    assert traj.meta["exited"]
    assert np.all(traj.f >= -1e-9)


def test_options_validation():
    with pytest.raises(ConfigError):
        IntegratorOptions(step=0.0)
    with pytest.raises(ConfigError):
        IntegratorOptions(method="euler")


def test_batch_stepper_rows_are_independent(osc2):
    rng = np.random.default_rng(3)
    q, v = rng.normal(size=(5, 2)) * 0.3, rng.normal(size=(5, 2)) * 0.3
    full = BatchStepper(osc2, q, v)
    part = BatchStepper(osc2, q[2:3], v[2:3])
    for _ in range(100):
        full.step(1e-3)
        part.step(1e-3)
    assert np.array_equal(full.q[2], part.q[0])


def test_brake_detection_and_reflection(osc2):
    init = State(np.array([0.9, 0.0]), np.array([np.sqrt(0.19), 0.0]))
    traj = integrate(osc2, init, (0.0, 1.0))
    ev = detect_brake(traj)
    assert len(ev) == 1
    assert np.allclose(ev[0].q_brake, [1.0, 0.0], atol=1e-10)
    assert abs(ev[0].t_brake - np.arccos(0.9)) < 1e-9
    chk = brake_reflection_check(osc2, ev[0], 0.1)
    assert chk.mismatch < 1e-12
    assert chk.taylor_residual < 1e-5  # O(h^4) at h = 0.1


def test_state_at_reintegrates(osc2):
    traj = integrate(osc2, State(np.array([0.5, 0.0]), np.array([0.0, 0.5])), (0.0, 1.0))
    s = state_at(traj, 0.4567)
    assert np.allclose(s.q, [0.5 * np.cos(0.4567), 0.5 * np.sin(0.4567)], atol=1e-12)


def test_reparameterization_keeps_the_image(osc2):
    traj = integrate(osc2, State(np.array([0.0, 0.0]), np.array([0.6, 0.8])), (0.0, 1.2))
    arc = reparameterize(traj, "jm_arclength")
    s = arc.param
    assert np.allclose(np.diff(s), s[1] - s[0])
    # resampled points lie on the original segment x/y = 3/4
    assert np.allclose(arc.q[:, 0] * 0.8, arc.q[:, 1] * 0.6, atol=1e-10)
    assert abs(jm_arclength(arc)[-1] - s[-1]) < 1e-6


def test_arclength_undefined_through_a_brake(osc2):
    traj = integrate(osc2, State(np.array([0.9, 0.0]), np.array([np.sqrt(0.19), 0.0])), (0.0, 1.0))
    with pytest.raises(DomainError):
        reparameterize(traj, "jm_arclength")


def test_csv_is_deterministic(tmp_path, osc2):
    traj = integrate(osc2, State(np.array([0.5, 0.0]), np.array([0.0, 0.5])), (0.0, 0.2))
    write_trajectory_csv(traj, tmp_path / "a.csv")
    write_trajectory_csv(traj, tmp_path / "b.csv")
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    assert a.startswith(b"t,q1,q2,v1,v2,f,H\n")
