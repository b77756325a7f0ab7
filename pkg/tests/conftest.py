import hypothesis
import numpy as np
import pytest

from elastinv.mesh import build_unit_square_mesh
from elastinv.operator import ElasticityOperator, LameField, experiment_problem

hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.load_profile("default")


def make_operator(n=8, mode="F", bc="mixed", tol=1e-12, background=(2.0, 0.3)):
    mesh = build_unit_square_mesh(n)
    bg = LameField.constant(mesh.num_vertices, *background) if mode == "Fc" else None
    return ElasticityOperator(mesh, experiment_problem(mesh, bc=bc, background=bg), mode, tol=tol)


@pytest.fixture(scope="session")
def mesh8():
    return build_unit_square_mesh(8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
