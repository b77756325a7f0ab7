import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from elastinv import fem
from elastinv.inversion import (
    DEGENERATE_STEPSIZE,
    StopReason,
    StoppingRule,
    add_noise,
    check_discrepancy,
    discrepancy_index,
    initial_state,
    iterate,
    landweber_step,
    nesterov_alpha,
    residual_gradient,
    steepest_descent_stepsize,
    tpg_step,
)
from elastinv.mesh import build_unit_square_mesh
from elastinv.operator import LameField


class LinearSurrogate:
    """``F(lam, mu) = A lam + B mu`` with Euclidean parameter and data inner products."""

    def __init__(self, A, B):
        self.A, self.B = A, B
        self.forward_calls = 0

    def forward(self, x, guess=None):
        self.forward_calls += 1
        return self.A @ x.lam + self.B @ x.mu

    def derivative(self, x, h, u=None):
        return self.A @ h.lam + self.B @ h.mu

    def adjoint(self, x, w, u=None):
        return LameField(self.A.T @ w, self.B.T @ w)

    def hs_inner(self, a, b):
        return float(a.lam @ b.lam + a.mu @ b.mu)

    def data_norm(self, v):
        return float(np.linalg.norm(v))

    def project(self, x):
        return x


def surrogate(rng, n=6, p=12, cond=1.0):
    Q, _ = np.linalg.qr(rng.standard_normal((p, 2 * n)))
    sv = np.geomspace(1.0, 1.0 / cond, 2 * n)
    M = Q * sv
    return LinearSurrogate(M[:, :n], M[:, n:]), n


def test_alpha_schedule():
    assert [nesterov_alpha(k) for k in range(4)] == [0.0, 0.0, 0.25, 0.4]
    assert nesterov_alpha(1000) == pytest.approx(1 - 3 / 1002)


def test_stepsize_matches_closed_form(rng):
    op, n = surrogate(rng, cond=10.0)
    x = LameField(rng.standard_normal(n), rng.standard_normal(n))
    y = rng.standard_normal(12)
    s, rnorm = residual_gradient(op, x, y)
    A = np.hstack([op.A, op.B])
    sv = np.concatenate([s.lam, s.mu])
    omega = steepest_descent_stepsize(op, x, s)
    assert omega == pytest.approx(sv @ sv / np.sum((A @ sv) ** 2), rel=1e-13)
    assert rnorm == pytest.approx(np.linalg.norm(y - A @ np.concatenate([x.lam, x.mu])))
    # exact line search for the quadratic residual
    phi = lambda w: np.linalg.norm(y - op.forward(x + w * s))
    assert phi(omega) <= min(phi(0.9 * omega), phi(1.1 * omega))


def test_stepsize_degenerate_cases():
    op = LinearSurrogate(np.zeros((3, 2)), np.zeros((3, 2)))
    x = LameField.zeros(2)
    assert steepest_descent_stepsize(op, x, LameField.zeros(2)) == 0.0
    assert steepest_descent_stepsize(op, x, LameField.constant(2, 1.0, 0.0)) == DEGENERATE_STEPSIZE


def test_isometry_landweber_one_step(rng):
    """With orthonormal columns, one unit Landweber step recovers the exact solution."""
    op, n = surrogate(rng, cond=1.0)
    truth = LameField(rng.standard_normal(n), rng.standard_normal(n))
    y = op.forward(truth)
    state = landweber_step(op, initial_state(op, LameField.zeros(n), y), y, use_sd_stepsize=False)
    assert np.allclose(state.x.lam, truth.lam) and np.allclose(state.x.mu, truth.mu)
    assert state.residual_history[-1] < 1e-12
    assert steepest_descent_stepsize(op, LameField.zeros(n), truth) == pytest.approx(1.0)


@given(st.integers(0, 10_000))
def test_landweber_residual_monotone(seed):
    rng = np.random.default_rng(seed)
    op, n = surrogate(rng, cond=100.0)
    y = rng.standard_normal(12)
    for sd in (False, True):
        state = iterate(op, y, LameField.zeros(n), StoppingRule(0.0, max_iters=30),
                        method="landweber-sd" if sd else "landweber")
        r = np.array(state.residual_history)
        assert np.all(np.diff(r) <= 1e-12 * r[0])


def test_tpg_faster_than_steepest_descent(rng):
    op, n = surrogate(rng, cond=1e3)
    truth = LameField(rng.standard_normal(n), rng.standard_normal(n))
    y = op.forward(truth)
    rule = StoppingRule(delta=1e-3 * np.linalg.norm(y), max_iters=2000)
    sd = iterate(op, y, LameField.zeros(n), rule, method="landweber-sd")
    tpg = iterate(op, y, LameField.zeros(n), rule, method="tpg")
    assert tpg.reason is StopReason.DISCREPANCY
    assert sd.reason is StopReason.MAX_ITERS
    assert sd.residual_history[-1] > tpg.residual_history[-1]


def test_tpg_alpha_zero_is_steepest_descent(rng):
    op, n = surrogate(rng, cond=50.0)
    y = rng.standard_normal(12)
    a = iterate(op, y, LameField.zeros(n), StoppingRule(0.0, max_iters=25), method="tpg", alpha=0.0)
    b = iterate(op, y, LameField.zeros(n), StoppingRule(0.0, max_iters=25), method="landweber-sd")
    assert a.residual_history == b.residual_history
    assert np.array_equal(a.x.lam, b.x.lam) and np.array_equal(a.x.mu, b.x.mu)


def test_tpg_reuses_forward_when_not_extrapolating(rng):
    op, n = surrogate(rng)
    y = rng.standard_normal(12)
    s0 = initial_state(op, LameField.zeros(n), y)
    calls = op.forward_calls
    s1 = tpg_step(op, s0, y)  # alpha_0 = 0, so z = x
    assert op.forward_calls == calls + 1
    tpg_step(op, tpg_step(op, s1, y), y)  # alpha_2 > 0 needs an extra solve at z
    assert op.forward_calls == calls + 4


def test_discrepancy_index_examples():
    assert discrepancy_index([5.0, 3.0, 1.0, 0.5], tau=1.0, delta=1.0) == 2
    assert discrepancy_index([5.0, 3.0, 2.0], tau=2.0, delta=1.0) == 2
    assert discrepancy_index([5.0, 3.0], tau=1.0, delta=1.0) is None
    assert discrepancy_index([0.0], tau=1.0, delta=0.0) is None


@given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.floats(1e-3, 5), st.floats(1, 3))
def test_stop_rule_agrees_with_index(res, delta, tau):
    rule = StoppingRule(delta, tau, max_iters=10**6)
    k = discrepancy_index(res, tau, delta)
    for j in range(len(res)):
        st_ = type("S", (), {"residual_history": res[: j + 1], "k": j})
        reason = check_discrepancy(st_, rule)
        expected = StopReason.DISCREPANCY if k is not None and j >= k and res[j] <= tau * delta else None
        if k is not None and j == k:
            assert reason is StopReason.DISCREPANCY
        if k is None or j < k:
            assert reason is StopReason.CONTINUE
        del expected


def test_zero_noise_never_stops_by_discrepancy(rng):
    op, n = surrogate(rng)
    y = op.forward(LameField(rng.standard_normal(n), rng.standard_normal(n)))
    state = iterate(op, y, LameField.zeros(n), StoppingRule(0.0, max_iters=40), method="tpg")
    assert state.reason is StopReason.MAX_ITERS and state.k == 40
    assert state.residual_history[-1] < 1e-6 * state.residual_history[0]


def test_stopping_rule_validation():
    with pytest.raises(ValueError):
        StoppingRule(-1.0)
    with pytest.raises(ValueError):
        StoppingRule(1.0, tau=0.5)
    assert StoppingRule(2.0, tau=1.5).threshold == 3.0
    with pytest.raises(ValueError):
        iterate(LinearSurrogate(np.eye(2), np.eye(2)), np.ones(2), LameField.zeros(2),
                StoppingRule(0.0, max_iters=1), method="newton")


def test_noise_level_exact_and_seeded():
    m = build_unit_square_mesh(8)
    u = np.column_stack([np.sin(m.vertices[:, 0]), m.vertices[:, 1] ** 2])
    a, b = add_noise(m, u, 0.005, seed=3), add_noise(m, u, 0.005, seed=3)
    assert np.array_equal(a.u_delta, b.u_delta)
    assert a.delta == pytest.approx(0.005 * fem.l2_norm(m, u), rel=1e-12)
    assert fem.l2_norm(m, a.u_delta - u) == a.delta
    c = add_noise(m, u, 0.005, seed=4)
    assert not np.array_equal(a.u_delta, c.u_delta)
    z = add_noise(m, u, 0.0, seed=1)
    assert z.delta == 0.0 and np.array_equal(z.u_delta, u)
    with pytest.raises(ValueError):
        add_noise(m, u, -0.1)


def test_real_operator_short_run_reduces_residual():
    from conftest import make_operator
    from elastinv.phantom import compose_phantom, preset

    op = make_operator(8, "Fc", tol=1e-12)
    truth = compose_phantom(preset("smooth"), op.mesh) - op.data.background
    y = op.forward(op.project(truth))
    state = iterate(op, y, LameField.zeros(op.num_vertices), StoppingRule(0.0, max_iters=15), method="tpg")
    assert state.residual_history[-1] < 0.5 * state.residual_history[0]
    assert all(math.isfinite(w) and w > 0 for w in state.stepsizes)


def test_pure_bc_steepest_descent_configuration_terminates():
    from elastinv.config import ExperimentConfig
    from elastinv.inversion import run_inversion

    cfg = ExperimentConfig(inverse_n=8, data_n=16, operator="F", bc="pure", method="landweber-sd",
                           noise_level=0.02, max_iters=60)
    result = run_inversion(cfg)
    state = result.state
    assert state.stopped and state.reason in (StopReason.DISCREPANCY, StopReason.MAX_ITERS)
    assert state.alphas == [0.0] * state.k
    assert state.residual_history[-1] < state.residual_history[0]
    assert result.lame.mu.min() >= cfg.mu_floor and result.lame.lam.min() >= 0
