"""P1 finite element assembly for isotropic linear elasticity and a Jacobi-PCG solver.

Vector fields are stored as ``(nv, 2)`` arrays of nodal values; their degrees of
freedom are numbered interleaved, ``dof = 2 * vertex + component``.
"""

from __future__ import annotations

import logging
import weakref

import numpy as np
import scipy.sparse as sp

from elastinv.mesh import TriMesh

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class NotSPDError(SolverError):
    """Raised when CG detects non-positive curvature (inadmissible parameters)."""


class NoConvergenceError(SolverError):
    pass


# -- element-level data -----------------------------------------------------


class _Pattern:
    """Fixed CSR sparsity pattern with a scatter map from element entries."""

    def __init__(self, rows: np.ndarray, cols: np.ndarray, shape: int):
        keys = rows.ravel() * shape + cols.ravel()
        ukeys, self.scatter = np.unique(keys, return_inverse=True)
        self.indices = (ukeys % shape).astype(np.int32)
        urows = ukeys // shape
        self.indptr = np.searchsorted(urows, np.arange(shape + 1)).astype(np.int32)
        self.nnz = len(ukeys)
        self.shape = shape

    def build(self, elem_values: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self.scatter, weights=elem_values.ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.shape, self.shape))


class MeshOperators:
    """Per-mesh precomputation: element matrices and assembly patterns."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        tri = mesh.triangles
        nt, nv = mesh.num_triangles, mesh.num_vertices
        area = mesh.areas
        G = mesh.basis_gradients  # (nt, 3, 2)

        # vector element matrices, local dof (a, c) -> 2a + c
        dofs = (2 * tri[:, :, None] + np.arange(2)[None, None, :]).reshape(nt, 6)
        Gf = G.reshape(nt, 6)  # Gf[:, 2a+c] = d_c phi_a, i.e. div of phi_a e_c
        self.k_lam = area[:, None, None] * Gf[:, :, None] * Gf[:, None, :]
        gg = np.einsum("tak,tbk->tab", G, G)
        eye2 = np.eye(2)
        # 2 eps(phi_a e_c):eps(phi_b e_d) = delta_cd grad_a.grad_b + d_d phi_a d_c phi_b
        k_mu = np.einsum("tab,cd->tacbd", gg, eye2) + np.einsum("tad,tbc->tacbd", G, G)
        self.k_mu = area[:, None, None] * k_mu.reshape(nt, 6, 6)
        # bitwise-symmetric element blocks give a bitwise-symmetric global matrix
        self.k_lam = 0.5 * (self.k_lam + self.k_lam.transpose(0, 2, 1))
        self.k_mu = 0.5 * (self.k_mu + self.k_mu.transpose(0, 2, 1))
        self.dofs = dofs
        self.vec_pattern = _Pattern(
            np.repeat(dofs[:, :, None], 6, axis=2), np.repeat(dofs[:, None, :], 6, axis=1), 2 * nv
        )

        sc_rows = np.repeat(tri[:, :, None], 3, axis=2)
        sc_cols = np.repeat(tri[:, None, :], 3, axis=1)
        self.scalar_pattern = _Pattern(sc_rows, sc_cols, nv)
        m_loc = (np.ones((3, 3)) + np.eye(3)) / 12.0
        self.mass = self.scalar_pattern.build(area[:, None, None] * m_loc[None])
        self.stiffness = self.scalar_pattern.build(area[:, None, None] * gg)
        self.vector_mass = sp.kron(self.mass, sp.identity(2), format="csr")
        # element mean of a nodal field: (nt, nv) with 1/3 entries
        self.vertex_mean = sp.csr_matrix(
            (np.full(3 * nt, 1.0 / 3.0), tri.ravel(), np.arange(0, 3 * nt + 1, 3)), shape=(nt, nv)
        )

    def element_means(self, values: np.ndarray) -> np.ndarray:
        return self.vertex_mean @ values

    def elasticity(self, lam: np.ndarray, mu: np.ndarray) -> sp.csr_matrix:
        lbar = self.element_means(lam)
        mbar = self.element_means(mu)
        return self.vec_pattern.build(lbar[:, None, None] * self.k_lam + mbar[:, None, None] * self.k_mu)

    def element_load(self, g: np.ndarray) -> np.ndarray:
        """Nodal load ``int g phi_i`` of a piecewise-constant element field."""
        return self.vertex_mean.T @ (g * self.mesh.areas)


_OPERATORS: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def mesh_operators(mesh: TriMesh) -> MeshOperators:
    ops = _OPERATORS.get(mesh)
    if ops is None:
        ops = _OPERATORS[mesh] = MeshOperators(mesh)
    return ops


# -- assembly ---------------------------------------------------------------


def assemble_elasticity(mesh: TriMesh, lam, mu) -> sp.csr_matrix:
    """Stiffness matrix of ``int lam div u div v + 2 mu eps(u):eps(v)``.

    ``lam`` and ``mu`` are nodal P1 coefficients (or scalars). The integrand is
    the product of a linear coefficient with constant strains, so the element
    mean of the coefficient integrates it exactly.
    """
    nv = mesh.num_vertices
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (nv,))
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (nv,))
    if lam.shape != (nv,) or mu.shape != (nv,):
        raise ValueError(f"Lame fields must have {nv} nodal values")
    return mesh_operators(mesh).elasticity(lam, mu)


def assemble_mass(mesh: TriMesh) -> sp.csr_matrix:
    return mesh_operators(mesh).mass


def assemble_scalar_stiffness(mesh: TriMesh) -> sp.csr_matrix:
    return mesh_operators(mesh).stiffness


def assemble_vector_mass(mesh: TriMesh) -> sp.csr_matrix:
    return mesh_operators(mesh).vector_mass


def assemble_load(mesh: TriMesh, f=None, gT=None) -> np.ndarray:
    """Load vector of ``l(v) = (f, v) + (gT, v)_{traction edges}``.

    Parameters
    ----------
    f : (nv, 2) array or None
        Nodal body force, integrated with the P1 mass matrix.
    gT : mapping ``BoundaryTag -> (2,) vector`` or (nv, 2) array or None
        Traction data. A mapping gives constant tractions per tagged edge; an
        array gives nodal values used on every traction-tagged edge.
    """
    nv = mesh.num_vertices
    ops = mesh_operators(mesh)
    b = np.zeros((nv, 2))
    if f is not None:
        f = np.asarray(f, dtype=float)
        if f.shape != (nv, 2):
            raise ValueError(f"body force must have shape {(nv, 2)}, got {f.shape}")
        b += ops.mass @ f
    if gT is not None:
        edges, lengths = mesh.boundary_edges, mesh.edge_lengths()
        if isinstance(gT, dict):
            for tag, val in gT.items():
                sel = mesh.edge_tags == int(tag)
                val = np.asarray(val, dtype=float)
                half = 0.5 * lengths[sel][:, None] * val[None, :]
                np.add.at(b, edges[sel, 0], half)
                np.add.at(b, edges[sel, 1], half)
        else:
            g = np.asarray(gT, dtype=float)
            if g.shape != (nv, 2):
                raise ValueError(f"nodal traction must have shape {(nv, 2)}")
            sel = np.isin(mesh.edge_tags, [2, 3])
            e, L = edges[sel], lengths[sel][:, None]
            ga, gb = g[e[:, 0]], g[e[:, 1]]
            np.add.at(b, e[:, 0], L * (2 * ga + gb) / 6.0)
            np.add.at(b, e[:, 1], L * (ga + 2 * gb) / 6.0)
    return b.ravel()


def vertex_dofs(vertices: np.ndarray) -> np.ndarray:
    """Both interleaved displacement dofs of each vertex."""
    vertices = np.asarray(vertices, dtype=np.int64)
    return np.sort(np.concatenate([2 * vertices, 2 * vertices + 1]))


def apply_dirichlet(K: sp.spmatrix, rhs: np.ndarray, dofs, values=None):
    """Symmetric elimination of prescribed dofs.

    Constrained rows and columns are zeroed with a unit diagonal, couplings to
    the prescribed values move to the right-hand side.
    """
    dofs = np.asarray(dofs, dtype=np.int64)
    if dofs.size == 0:
        return K, rhs
    ndof = K.shape[0]
    if np.any(dofs < 0) or np.any(dofs >= ndof) or len(np.unique(dofs)) != len(dofs):
        raise ValueError("constraint indices must be unique and within the matrix dimension")
    g = np.zeros(ndof)
    if values is not None:
        g[dofs] = values
    free = np.ones(ndof)
    free[dofs] = 0.0
    D = sp.diags(free)
    K_out = (D @ K @ D + sp.diags(1.0 - free)).tocsr()
    rhs_out = free * (rhs - K @ g) + g
    return K_out, rhs_out


# -- linear solver ----------------------------------------------------------


def solve_spd(
    K: sp.spmatrix,
    rhs: np.ndarray,
    tol: float = 1e-10,
    maxiter: int | None = None,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients.

    Stops when ``||K x - rhs|| <= tol * ||rhs||``. Raises :class:`NotSPDError`
    on a non-positive diagonal or curvature ``p^T K p <= 0`` and
    :class:`NoConvergenceError` after ``maxiter`` (default ``20 * dim``) steps.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    maxiter = 20 * n if maxiter is None else maxiter
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros(n)
    diag = K.diagonal()
    if np.any(diag <= 0.0):
        raise NotSPDError(f"non-positive diagonal entry (min {diag.min():.3e})")
    dinv = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = rhs - K @ x if x0 is not None else rhs.copy()
    target = tol * bnorm
    if np.linalg.norm(r) <= target:
        return x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(maxiter):
        Kp = K @ p
        pKp = p @ Kp
        if pKp <= 0.0:
            raise NotSPDError(f"non-positive curvature p^T K p = {pKp:.3e} at CG step {it}")
        alpha = rz / pKp
        x += alpha * p
        r -= alpha * Kp
        if np.linalg.norm(r) <= target:
            return x
        z = dinv * r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise NoConvergenceError(
        f"CG did not reach tol {tol:g} in {maxiter} iterations "
        f"(relative residual {np.linalg.norm(r) / bnorm:.3e})"
    )


# -- post-processing --------------------------------------------------------


def element_gradients(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
    """Elementwise constant gradient of a nodal field.

    Returns ``(nt, 2)`` for scalar fields and ``(nt, 2, 2)`` with
    ``grad[t, c, k] = d_k u_c`` for (nv, 2) vector fields.
    """
    G = mesh.basis_gradients
    ut = np.asarray(u)[mesh.triangles]
    if ut.ndim == 2:
        return np.einsum("ta,tak->tk", ut, G)
    return np.einsum("tac,tak->tck", ut, G)


def element_divergence(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
    g = element_gradients(mesh, u)
    return g[:, 0, 0] + g[:, 1, 1]


def element_strain(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
    g = element_gradients(mesh, u)
    return 0.5 * (g + g.transpose(0, 2, 1))


def l2_norm(mesh: TriMesh, u: np.ndarray) -> float:
    """L2 norm of a nodal P1 field (scalar or vector) through the mass matrix."""
    u = np.asarray(u, dtype=float)
    M = mesh_operators(mesh).mass
    if u.ndim == 1:
        return float(np.sqrt(max(u @ (M @ u), 0.0)))
    return float(np.sqrt(max(np.sum(u * (M @ u)), 0.0)))


def l2_inner(mesh: TriMesh, u: np.ndarray, v: np.ndarray) -> float:
    M = mesh_operators(mesh).mass
    return float(np.sum(np.asarray(u) * (M @ np.asarray(v))))


# degree-5 seven-point rule on the reference triangle (barycentric coords, weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
_W0, _W1, _W2 = 0.225, 0.132394152788506, 0.125939180544827
QUAD7_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
QUAD7_WEIGHTS = np.array([_W0, _W1, _W1, _W1, _W2, _W2, _W2])


def l2_error(mesh: TriMesh, u: np.ndarray, exact) -> float:
    """``||u_h - u||_{L2}`` for a nodal P1 field against a callable ``exact(points) -> values``."""
    u = np.asarray(u, dtype=float)
    p = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
    pts = np.einsum("qa,tak->tqk", QUAD7_BARY, p)
    uh = np.einsum("qa,ta...->tq...", QUAD7_BARY, u[mesh.triangles])
    ue = np.asarray(exact(pts.reshape(-1, 2))).reshape(uh.shape)
    err2 = (uh - ue) ** 2
    if err2.ndim == 3:
        err2 = err2.sum(axis=2)
    return float(np.sqrt(np.sum(mesh.areas[:, None] * QUAD7_WEIGHTS[None, :] * err2)))
