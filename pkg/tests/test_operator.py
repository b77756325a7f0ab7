import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import make_operator
from elastinv.diagnostics import duality_gap, random_admissible
from elastinv.mesh import build_unit_square_mesh
from elastinv.operator import (
    ElasticityOperator,
    LameField,
    MissingBackgroundError,
    SmoothingConfig,
    dirichlet_problem,
    experiment_problem,
    project_admissible,
    weighted_param_distance,
)


def test_lame_field_arithmetic():
    a = LameField(np.array([1.0, 2.0]), np.array([0.5, 0.25]))
    b = LameField.constant(2, 1.0, 1.0)
    c = 2 * a - b
    assert np.array_equal(c.lam, [1.0, 3.0]) and np.array_equal(c.mu, [0.0, -0.5])
    assert np.array_equal((-a).lam, -a.lam)
    assert len(a) == 2 and a.is_finite()
    d = a.copy()
    d.lam[0] = 7
    assert a.lam[0] == 1.0
    with pytest.raises(ValueError):
        LameField(np.zeros(3), np.zeros(2))


def test_smoothing_config_validation():
    assert SmoothingConfig(2.0).m == 2
    assert SmoothingConfig(1.5).m == 2
    with pytest.raises(ValueError):
        SmoothingConfig(1.0)
    with pytest.raises(ValueError):
        SmoothingConfig(2.0, m=3)


def test_fc_requires_background():
    m = build_unit_square_mesh(4)
    with pytest.raises(MissingBackgroundError):
        ElasticityOperator(m, experiment_problem(m), "Fc")
    with pytest.raises(ValueError):
        ElasticityOperator(m, experiment_problem(m), "G")


def test_forward_satisfies_boundary_conditions():
    op = make_operator(8, bc="mixed")
    x = LameField.constant(op.num_vertices, 2.0, 0.3)
    ut = op.forward(x) + op.phi
    v = op.mesh.vertices
    top, bottom = v[:, 1] == 1, v[:, 1] == 0
    assert np.allclose(ut[top], [0.0, -1e-4], atol=1e-18)
    assert np.all(ut[bottom] == 0)
    # compression: vertical displacement monotone in height
    assert np.all(ut[~bottom & ~top, 1] < 0)
    # traction-free sides bulge outward
    assert ut[np.argmax((v[:, 0] == 1) & (v[:, 1] == 0.5)), 0] > 0


def test_pure_bc_clamps_sides():
    op = make_operator(8, bc="pure")
    ut = op.forward(LameField.constant(op.num_vertices, 2.0, 0.3)) + op.phi
    v = op.mesh.vertices
    sides = ((v[:, 0] == 0) | (v[:, 0] == 1)) & (v[:, 1] < 1)
    assert np.all(ut[sides] == 0)
    assert np.allclose(ut[v[:, 1] == 1], [0.0, -1e-4], atol=1e-18)


def test_fc_at_zero_equals_f_at_background():
    f, fc = make_operator(8, "F"), make_operator(8, "Fc")
    nv = f.num_vertices
    assert np.allclose(f.forward(LameField.constant(nv, 2.0, 0.3)), fc.forward(LameField.zeros(nv)),
                       rtol=0, atol=1e-16)


@pytest.mark.parametrize("mode", ["F", "Fc"])
@pytest.mark.parametrize("bc", ["mixed", "pure"])
def test_duality_n8(mode, bc):
    op = make_operator(8, mode, bc, tol=1e-13)
    rng = np.random.default_rng(7)
    x = random_admissible(op, rng)
    for _ in range(5):
        h = op.random_direction(rng)
        w = rng.standard_normal((op.num_vertices, 2))
        assert duality_gap(op, x, h, w) <= 1e-8


def test_derivative_linear_in_direction(rng):
    op = make_operator(6, tol=1e-13)
    x = random_admissible(op, rng)
    h1, h2 = op.random_direction(rng), op.random_direction(rng)
    lhs = op.derivative(x, 2 * h1 - h2)
    rhs = 2 * op.derivative(x, h1) - op.derivative(x, h2)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * np.abs(rhs).max())


def test_zero_divergence_kills_lambda_gradient(rng):
    """Pure shear has div(u) = 0, so the lambda part of the adjoint vanishes."""
    m = build_unit_square_mesh(8)
    gamma = 1e-3
    data = dirichlet_problem(m, lambda p: np.column_stack([gamma * p[:, 1], 0 * p[:, 0]]))
    op = ElasticityOperator(m, data, "F", tol=1e-13)
    x = LameField.constant(m.num_vertices, 2.0, 0.3)
    s = op.adjoint(x, rng.standard_normal((m.num_vertices, 2)))
    assert np.abs(s.lam).max() <= 1e-10 * np.abs(s.mu).max()
    assert np.abs(s.mu).max() > 0


def test_fc_adjoint_vanishes_outside_subdomain(rng):
    op = make_operator(16, "Fc")
    x = random_admissible(op, rng)
    s = op.adjoint(x, rng.standard_normal((op.num_vertices, 2)))
    outside = np.setdiff1d(np.arange(op.num_vertices), op.support)
    assert np.all(s.lam[outside] == 0) and np.all(s.mu[outside] == 0)
    assert np.abs(s.mu[op.support]).max() > 0


def test_riesz_map_inverts_gram(rng):
    for mode in ("F", "Fc"):
        op = make_operator(8, mode)
        b = rng.standard_normal(op.num_vertices) * op._free
        assert np.allclose(op.gram_apply(op.smooth_embed_load(b)), b, rtol=0, atol=1e-10 * np.abs(b).max())


def test_sobolev_inner_symmetric_positive(rng):
    op = make_operator(6)
    a, b = op.random_direction(rng), op.random_direction(rng)
    assert op.hs_inner(a, b) == pytest.approx(op.hs_inner(b, a), rel=1e-12)
    assert op.hs_norm(a) > 0
    # the H^s norm dominates the L^2 norm
    l2 = np.sqrt(a.lam @ op.ops.mass @ a.lam + a.mu @ op.ops.mass @ a.mu)
    assert op.hs_norm(a) >= l2


fields = arrays(np.float64, 25, elements=st.floats(-5, 5))


@given(fields, fields)
def test_projection_idempotent_and_admissible(lam, mu):
    m = build_unit_square_mesh(4)
    data = experiment_problem(m, background=LameField.constant(25, 2.0, 0.3))
    x = LameField(lam, mu)
    p = project_admissible(x, data)
    assert np.all(p.lam >= 0) and np.all(p.mu >= data.mu_floor)
    q = project_admissible(p, data)
    assert np.array_equal(p.lam, q.lam) and np.array_equal(p.mu, q.mu)
    op = ElasticityOperator(m, data, "Fc")
    pc = op.project(x)
    total = op.total_parameters(pc)
    assert np.all(total.lam >= 0) and np.all(total.mu >= data.mu_floor - 1e-15)
    outside = np.setdiff1d(np.arange(25), op.support)
    assert np.all(pc.lam[outside] == 0) and np.all(pc.mu[outside] == 0)


def test_weighted_distance():
    a = LameField(np.array([1.0, 2.0]), np.array([0.0, 0.5]))
    b = LameField(np.array([1.5, 2.0]), np.array([0.0, 0.0]))
    assert weighted_param_distance(a, b) == 2 * 0.5 + 2 * 0.5
    assert weighted_param_distance(a, b, dim=3) == 3 * 0.5 + 2 * 0.5


def test_weighted_distance_examples(rng):
    a = LameField(rng.standard_normal(30), rng.standard_normal(30))
    assert weighted_param_distance(a, a) == 0.0
    one = LameField.constant(30, 1.0, 1.0)
    assert weighted_param_distance(a + one, a) == pytest.approx(4.0)
    b = LameField(rng.standard_normal(30), rng.standard_normal(30))
    brute = 2 * max(abs(p - q) for p, q in zip(a.lam, b.lam)) + 2 * max(abs(p - q) for p, q in zip(a.mu, b.mu))
    assert weighted_param_distance(a, b) == brute
    with pytest.raises(ValueError):
        weighted_param_distance(a, LameField.zeros(3))


def test_uniform_compression_is_exact():
    """Constant Lame data with (0, c x2) on the whole boundary reproduces that field."""
    m = build_unit_square_mesh(8)
    c = -1e-4
    op = ElasticityOperator(m, dirichlet_problem(m, lambda p: np.column_stack([0 * p[:, 0], c * p[:, 1]])),
                            "F", tol=1e-13)
    ut = op.forward(LameField.constant(m.num_vertices, 2.0, 0.3)) + op.phi
    assert np.abs(ut - np.column_stack([np.zeros(m.num_vertices), c * m.vertices[:, 1]])).max() < 1e-15


def test_forward_lipschitz_along_shrinking_perturbations(rng):
    op = make_operator(8, tol=1e-13)
    x = random_admissible(op, rng)
    h = LameField(rng.uniform(-1, 1, op.num_vertices), rng.uniform(-0.2, 0.2, op.num_vertices))
    u = op.forward(x)
    ratios = [op.data_norm(op.forward(x + t * h) - u) / weighted_param_distance(x + t * h, x)
              for t in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert max(ratios) < 2 * min(ratios)
    assert all(np.isfinite(ratios))


def test_smooth_embed_examples(rng):
    op = make_operator(8, "F")
    nt = op.mesh.num_triangles
    assert np.array_equal(op.smooth_embed(np.zeros(nt)), np.zeros(op.num_vertices))
    # constants are fixed points of (M + K)^-1 M
    assert np.allclose(op.smooth_embed(np.full(nt, 1.7)), 1.7, rtol=0, atol=1e-12)
    for _ in range(5):
        g = rng.standard_normal(nt)
        assert op.smooth_embed(g) @ op.ops.element_load(g) >= 0
    w0 = op.adjoint(LameField.constant(op.num_vertices, 2.0, 0.3), np.zeros((op.num_vertices, 2)))
    assert not w0.lam.any() and not w0.mu.any()


def test_lift_background_zeroes_outside_subdomain():
    from elastinv.operator import lift_background

    op = make_operator(10, "Fc")
    ones = LameField.constant(op.num_vertices, 1.0, 0.1)
    lifted = lift_background(ones, op.data, op.support)
    outside = np.setdiff1d(np.arange(op.num_vertices), op.support)
    assert np.all(lifted.lam[outside] == 2.0) and np.all(lifted.mu[outside] == 0.3)
    assert np.allclose(lifted.lam[op.support], 3.0) and np.allclose(lifted.mu[op.support], 0.4)
    assert np.array_equal(lift_background(LameField.zeros(op.num_vertices), op.data).lam, op.data.background.lam)
