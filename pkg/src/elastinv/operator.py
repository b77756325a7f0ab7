"""Parameter-to-displacement operator, its derivative and its Hilbert-space adjoint.

The unknown Lame parameters live in a discrete Sobolev space whose inner product
is induced by ``m`` successive solves with ``M + K`` (scalar P1 mass plus
stiffness). The adjoint returned by :meth:`ElasticityOperator.adjoint` is exact
with respect to that inner product, so ``<F'(x)h, w>_{L2} = <h, F'(x)^* w>_{H}``
holds up to linear-solver tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from elastinv import fem
from elastinv.mesh import BoundaryTag, TriMesh, locate_subdomain_vertices

DEFAULT_OMEGA1 = (0.05, 0.95, 0.05, 0.95)


class MissingBackgroundError(ValueError):
    pass


@dataclass
class LameField:
    """Nodal P1 pair ``(lambda, mu)`` in kPa."""

    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        if self.lam.shape != self.mu.shape or self.lam.ndim != 1:
            raise ValueError("lambda and mu must be 1-d arrays of equal length")

    @classmethod
    def constant(cls, nv: int, lam: float, mu: float) -> "LameField":
        return cls(np.full(nv, float(lam)), np.full(nv, float(mu)))

    @classmethod
    def zeros(cls, nv: int) -> "LameField":
        return cls(np.zeros(nv), np.zeros(nv))

    def __len__(self):
        return len(self.lam)

    def __add__(self, other: "LameField") -> "LameField":
        return LameField(self.lam + other.lam, self.mu + other.mu)

    def __sub__(self, other: "LameField") -> "LameField":
        return LameField(self.lam - other.lam, self.mu - other.mu)

    def __mul__(self, c: float) -> "LameField":
        return LameField(c * self.lam, c * self.mu)

    __rmul__ = __mul__

    def __neg__(self) -> "LameField":
        return LameField(-self.lam, -self.mu)

    def copy(self) -> "LameField":
        return LameField(self.lam.copy(), self.mu.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.lam)) and np.all(np.isfinite(self.mu)))


@dataclass(frozen=True)
class SmoothingConfig:
    """Sobolev order ``s`` of the parameter space and its realization order ``m``."""

    s: float = 2.0
    m: int | None = None
    dim: int = 2

    def __post_init__(self):
        if not self.s > self.dim / 2:
            raise ValueError(f"Sobolev order must exceed N/2 = {self.dim / 2}, got s={self.s}")
        m = math.ceil(self.s) if self.m is None else int(self.m)
        if m != math.ceil(self.s):
            raise ValueError(f"realization order must be ceil(s) = {math.ceil(self.s)}, got {m}")
        object.__setattr__(self, "m", m)


@dataclass
class ProblemData:
    """Loads, homogenizer and admissibility data of one forward problem.

    ``phi`` is a nodal lifting of the Dirichlet data: its values on
    ``dirichlet_vertices`` are the prescribed displacements, interior values
    are arbitrary (they cancel in the physical field ``u + phi``).
    """

    phi: np.ndarray
    dirichlet_vertices: np.ndarray
    f: np.ndarray | None = None
    gT: dict | np.ndarray | None = None
    mu_floor: float = 0.05
    background: LameField | None = None
    omega1: tuple | None = None

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.dirichlet_vertices = np.unique(np.asarray(self.dirichlet_vertices, dtype=np.int64))
        if not self.mu_floor > 0:
            raise ValueError("admissibility floor mu_b must be positive")


def experiment_problem(
    mesh: TriMesh,
    c_p: float = -1e-4,
    bc: str = "mixed",
    mu_floor: float = 0.05,
    background: LameField | None = None,
    omega1: tuple | None = DEFAULT_OMEGA1,
) -> ProblemData:
    """Compression of the unit square: bottom fixed, top displaced by ``(0, c_p)``.

    ``bc="mixed"`` leaves the sides traction free; ``bc="pure"`` clamps them to
    zero displacement (top corners keep the plate displacement).
    """
    x2 = mesh.vertices[:, 1]
    phi = np.column_stack([np.zeros_like(x2), c_p * x2])
    bottom = mesh.vertices_with_tags([BoundaryTag.DIRICHLET_BOTTOM])
    top = mesh.vertices_with_tags([BoundaryTag.DIRICHLET_TOP])
    if bc == "mixed":
        dirichlet = np.union1d(bottom, top)
    elif bc in ("pure", "pure-displacement"):
        sides = mesh.vertices_with_tags([BoundaryTag.TRACTION_LEFT, BoundaryTag.TRACTION_RIGHT])
        phi[np.setdiff1d(sides, top)] = 0.0
        dirichlet = mesh.boundary_vertices
    else:
        raise ValueError(f"unknown boundary condition mode {bc!r}")
    return ProblemData(
        phi=phi,
        dirichlet_vertices=dirichlet,
        f=None,
        gT=None,
        mu_floor=mu_floor,
        background=background,
        omega1=omega1,
    )


def dirichlet_problem(mesh: TriMesh, g_D, f=None, mu_floor: float = 0.05) -> ProblemData:
    """Pure-displacement problem with ``g_D(x) -> (nv, 2)`` prescribed on all of the boundary."""
    phi = np.asarray(g_D(mesh.vertices), dtype=float)
    return ProblemData(phi=phi, dirichlet_vertices=mesh.boundary_vertices, f=f, mu_floor=mu_floor)


# -- pointwise parameter maps ----------------------------------------------


def lift_background(delta: LameField, data: ProblemData, support: np.ndarray | None = None) -> LameField:
    """``(lambda_b + delta_lambda, mu_b + delta_mu)`` with ``delta`` zeroed off ``support``."""
    if data.background is None:
        raise MissingBackgroundError("compact-support mode needs background Lame fields")
    if support is not None:
        delta = restrict(delta, support)
    return data.background + delta


def restrict(x: LameField, support: np.ndarray) -> LameField:
    lam = np.zeros_like(x.lam)
    mu = np.zeros_like(x.mu)
    lam[support] = x.lam[support]
    mu[support] = x.mu[support]
    return LameField(lam, mu)


def project_admissible(
    x: LameField, data: ProblemData, fc_mode: bool = False, support: np.ndarray | None = None
) -> LameField:
    """Vertexwise clipping onto the admissible set.

    Plain mode enforces ``lambda >= 0, mu >= mu_b``. Compact-support mode acts on
    deviations from the background: ``lambda >= -lambda_b``,
    ``mu >= mu_b - mu_background`` and zero off ``support``.
    """
    if not fc_mode:
        return LameField(np.maximum(x.lam, 0.0), np.maximum(x.mu, data.mu_floor))
    if data.background is None:
        raise MissingBackgroundError("compact-support mode needs background Lame fields")
    bg = data.background
    out = LameField(np.maximum(x.lam, -bg.lam), np.maximum(x.mu, data.mu_floor - bg.mu))
    return out if support is None else restrict(out, support)


def weighted_param_distance(a: LameField, b: LameField, dim: int = 2) -> float:
    """``N ||lambda_a - lambda_b||_inf + 2 ||mu_a - mu_b||_inf`` over vertices."""
    if len(a) != len(b):
        raise ValueError("fields live on different meshes")
    d = a - b
    return float(dim * np.max(np.abs(d.lam)) + 2.0 * np.max(np.abs(d.mu)))


# -- the operator -----------------------------------------------------------


class ElasticityOperator:
    """Discrete parameter-to-solution map ``F`` (``mode="F"``) or ``F_c`` (``mode="Fc"``).

    In ``Fc`` mode the argument is a deviation from ``data.background``
    supported on the vertices strictly inside ``data.omega1``; the parameter
    space and its Riesz map are restricted to those vertices.

    Parameters
    ----------
    mesh : TriMesh
    data : ProblemData
    mode : {"F", "Fc"}
    smoothing : SmoothingConfig
    tol : float
        Relative residual tolerance of every elasticity and Riesz-map solve.
    """

    def __init__(
        self,
        mesh: TriMesh,
        data: ProblemData,
        mode: str = "F",
        smoothing: SmoothingConfig | None = None,
        tol: float = 1e-10,
    ):
        if mode not in ("F", "Fc"):
            raise ValueError(f"unknown operator mode {mode!r}")
        if data.phi.shape != (mesh.num_vertices, 2):
            raise ValueError("homogenizer does not match the mesh")
        self.mesh = mesh
        self.data = data
        self.mode = mode
        self.smoothing = smoothing or SmoothingConfig()
        self.tol = tol
        self.ops = fem.mesh_operators(mesh)
        nv = mesh.num_vertices
        self.dirichlet_dofs = fem.vertex_dofs(data.dirichlet_vertices)
        self.load = fem.assemble_load(mesh, data.f, data.gT)
        self.phi = data.phi

        if mode == "Fc":
            if data.background is None:
                raise MissingBackgroundError("compact-support mode needs background Lame fields")
            box = data.omega1 if data.omega1 is not None else DEFAULT_OMEGA1
            self.support = locate_subdomain_vertices(mesh, box)
        else:
            self.support = np.arange(nv)
        free = np.zeros(nv)
        free[self.support] = 1.0
        self._free = free
        self._fixed = np.setdiff1d(np.arange(nv), self.support)
        D = sp.diags(free)
        A = (self.ops.mass + self.ops.stiffness).tocsr()
        self._riesz_solve_matrix, _ = fem.apply_dirichlet(A, np.zeros(nv), self._fixed)
        self._riesz_apply_matrix = (D @ A @ D).tocsr()
        self._mass_solve_matrix, _ = fem.apply_dirichlet(self.ops.mass, np.zeros(nv), self._fixed)
        self._mass_restricted = (D @ self.ops.mass @ D).tocsr()
        # both matrices are fixed and SPD, so factor them once
        self._riesz_lu = spla.splu(self._riesz_solve_matrix.tocsc())
        self._mass_lu = spla.splu(self._mass_solve_matrix.tocsc())

    @property
    def fc_mode(self) -> bool:
        return self.mode == "Fc"

    @property
    def num_vertices(self) -> int:
        return self.mesh.num_vertices

    # parameters

    def total_parameters(self, x: LameField) -> LameField:
        if self.fc_mode:
            return lift_background(x, self.data, self.support)
        return x

    def project(self, x: LameField) -> LameField:
        return project_admissible(x, self.data, self.fc_mode, self.support if self.fc_mode else None)

    def stiffness(self, x: LameField) -> sp.csr_matrix:
        t = self.total_parameters(x)
        return self.ops.elasticity(t.lam, t.mu)

    def _solve(self, K, rhs, guess=None) -> np.ndarray:
        Kd, rd = fem.apply_dirichlet(K, rhs, self.dirichlet_dofs)
        x0 = None if guess is None else np.asarray(guess, dtype=float).ravel()
        return fem.solve_spd(Kd, rd, tol=self.tol, x0=x0).reshape(-1, 2)

    # operator evaluations

    def forward(self, x: LameField, guess: np.ndarray | None = None) -> np.ndarray:
        """Homogenized displacement ``u`` (zero on the Dirichlet boundary); physical field is ``u + phi``."""
        K = self.stiffness(x)
        rhs = self.load - K @ self.phi.ravel()
        return self._solve(K, rhs, guess)

    def derivative(self, x: LameField, h: LameField, u: np.ndarray | None = None) -> np.ndarray:
        """``F'(x) h``: solve ``a_x(uh, v) = -a_h(u + phi, v)`` for all test functions ``v``."""
        if u is None:
            u = self.forward(x)
        if self.fc_mode:
            h = restrict(h, self.support)
        Kh = self.ops.elasticity(h.lam, h.mu)
        rhs = -(Kh @ (u + self.phi).ravel())
        return self._solve(self.stiffness(x), rhs)

    def adjoint(self, x: LameField, w: np.ndarray, u: np.ndarray | None = None) -> LameField:
        """``F'(x)^* w`` with respect to the discrete Sobolev inner product."""
        lam_load, mu_load = self.adjoint_loads(x, w, u)
        return LameField(self.smooth_embed_load(lam_load), self.smooth_embed_load(mu_load))

    def adjoint_loads(self, x: LameField, w: np.ndarray, u: np.ndarray | None = None):
        """Nodal loads ``int u_1(w) v`` and ``int u_2(w) v`` before the Riesz map."""
        if u is None:
            u = self.forward(x)
        w = np.asarray(w, dtype=float)
        uw = self._solve(self.stiffness(x), self.ops.vector_mass @ w.ravel())
        ut = u + self.phi
        u1 = fem.element_divergence(self.mesh, ut) * -fem.element_divergence(self.mesh, uw)
        u2 = 2.0 * np.einsum(
            "tij,tij->t", fem.element_strain(self.mesh, ut), -fem.element_strain(self.mesh, uw)
        )
        return self.ops.element_load(u1), self.ops.element_load(u2)

    # Sobolev embedding

    def smooth_embed(self, g: np.ndarray) -> np.ndarray:
        """Riesz representative in the parameter space of a piecewise-constant element field."""
        return self.smooth_embed_load(self.ops.element_load(np.asarray(g, dtype=float)))

    def smooth_embed_load(self, b: np.ndarray) -> np.ndarray:
        b = self._free * b
        y = self._riesz_lu.solve(b)
        for _ in range(self.smoothing.m - 1):
            y = self._riesz_lu.solve(self._mass_restricted @ y)
        return self._free * y

    def gram_apply(self, v: np.ndarray) -> np.ndarray:
        """Apply the Gram matrix of the discrete Sobolev inner product."""
        y = self._riesz_apply_matrix @ (self._free * v)
        for _ in range(self.smoothing.m - 1):
            z = self._mass_lu.solve(self._free * y)
            y = self._riesz_apply_matrix @ z
        return y

    def hs_inner_scalar(self, a: np.ndarray, b: np.ndarray) -> float:
        return float((self._free * a) @ self.gram_apply(b))

    def hs_inner(self, a: LameField, b: LameField) -> float:
        return self.hs_inner_scalar(a.lam, b.lam) + self.hs_inner_scalar(a.mu, b.mu)

    def hs_norm(self, a: LameField) -> float:
        return math.sqrt(max(self.hs_inner(a, a), 0.0))

    # data space

    def data_inner(self, v: np.ndarray, w: np.ndarray) -> float:
        return float(np.asarray(v).ravel() @ (self.ops.vector_mass @ np.asarray(w).ravel()))

    def data_norm(self, v: np.ndarray) -> float:
        return math.sqrt(max(self.data_inner(v, v), 0.0))

    def random_direction(self, rng: np.random.Generator, scale=(1.0, 1.0)) -> LameField:
        """Random P1 direction respecting the operator's parameter support."""
        nv = self.num_vertices
        h = LameField(scale[0] * rng.uniform(-1, 1, nv), scale[1] * rng.uniform(-1, 1, nv))
        return restrict(h, self.support) if self.fc_mode else h
