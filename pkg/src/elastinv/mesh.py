"""Structured triangulations of the unit square with tagged boundary edges."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class BoundaryTag(enum.IntEnum):
    DIRICHLET_BOTTOM = 0
    DIRICHLET_TOP = 1
    TRACTION_LEFT = 2
    TRACTION_RIGHT = 3


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Conforming triangulation with tagged boundary edges.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counter-clockwise
    boundary_edges : (ne, 2) int array of vertex pairs
    edge_tags : (ne,) int array of :class:`BoundaryTag` values
    n : int or None
        Subdivisions per side for structured meshes; enables fast point location.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray
    n: int | None = None

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Gradients of the three barycentric hat functions, shape (nt, 3, 2)."""
        p = self.vertices[self.triangles]
        # grad(phi_a) = rot90(p_c - p_b) / (2|T|) for (a, b, c) cyclic
        grads = np.empty((self.num_triangles, 3, 2))
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            e = p[:, c] - p[:, b]
            grads[:, a, 0] = -e[:, 1]
            grads[:, a, 1] = e[:, 0]
        grads /= (2.0 * self.signed_areas)[:, None, None]
        return grads

    def vertices_with_tags(self, tags) -> np.ndarray:
        """Sorted unique vertex indices lying on edges with any of ``tags``."""
        tags = [int(t) for t in tags]
        sel = np.isin(self.edge_tags, tags)
        return np.unique(self.boundary_edges[sel])

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def edge_lengths(self) -> np.ndarray:
        e = self.vertices[self.boundary_edges]
        return np.linalg.norm(e[:, 1] - e[:, 0], axis=1)


def build_unit_square_mesh(n: int) -> TriMesh:
    """Right-triangle mesh of (0,1)^2 with ``n`` cells per side.

    Each square cell is split along its lower-left to upper-right diagonal.
    Boundary edges are tagged by midpoint location.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"need at least one subdivision per side, got n={n}")
    t = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(t, t, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    # interleave so triangles 2c, 2c+1 belong to cell c
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    k = np.arange(n)
    edges = [
        (np.column_stack([vid(k, 0), vid(k + 1, 0)]), BoundaryTag.DIRICHLET_BOTTOM),
        (np.column_stack([vid(k, n), vid(k + 1, n)]), BoundaryTag.DIRICHLET_TOP),
        (np.column_stack([vid(0, k), vid(0, k + 1)]), BoundaryTag.TRACTION_LEFT),
        (np.column_stack([vid(n, k), vid(n, k + 1)]), BoundaryTag.TRACTION_RIGHT),
    ]
    boundary_edges = np.vstack([e for e, _ in edges]).astype(np.int64)
    edge_tags = np.concatenate([np.full(n, int(tag)) for _, tag in edges])
    return TriMesh(vertices, triangles, boundary_edges, edge_tags, n=n)


def locate_subdomain_vertices(mesh: TriMesh, box) -> np.ndarray:
    """Indices of vertices strictly inside ``box = (xmin, xmax, ymin, ymax)``."""
    xmin, xmax, ymin, ymax = box
    if not (0.0 <= xmin <= xmax <= 1.0 and 0.0 <= ymin <= ymax <= 1.0):
        raise ValueError(f"box {box} is not contained in the unit square")
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    inside = (x > xmin) & (x < xmax) & (y > ymin) & (y < ymax)
    return np.flatnonzero(inside)


def interpolate_p1(mesh: TriMesh, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate a nodal P1 field of a structured mesh at arbitrary points.

    ``values`` may carry trailing component axes, e.g. (nv, 2) displacements.
    """
    if mesh.n is None:
        raise ValueError("point location is only implemented for structured meshes")
    n = mesh.n
    values = np.asarray(values)
    points = np.asarray(points, dtype=float)
    sx = np.clip(points[:, 0], 0.0, 1.0) * n
    sy = np.clip(points[:, 1], 0.0, 1.0) * n
    i = np.minimum(np.floor(sx).astype(np.int64), n - 1)
    j = np.minimum(np.floor(sy).astype(np.int64), n - 1)
    xi = sx - i
    eta = sy - j

    def at(ii, jj):
        return values[jj * (n + 1) + ii]

    f00, f10, f01, f11 = at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)
    lower = xi >= eta
    extra = (slice(None),) + (None,) * (values.ndim - 1)
    xi, eta, lower = xi[extra], eta[extra], lower[extra]
    val_lower = f00 + xi * (f10 - f00) + eta * (f11 - f10)
    val_upper = f00 + eta * (f01 - f00) + xi * (f11 - f01)
    return np.where(lower, val_lower, val_upper)
