#!/usr/bin/env python3
"""Manufactured-solution convergence of the forward solver, both boundary setups.

Pure displacement data uses the exact field on all of the boundary. The mixed
case prescribes it on bottom and top and applies the exact traction on the
sides. Prints L2 errors and observed rates.
"""

import numpy as np
import sympy

from elastinv import fem
from elastinv.mesh import BoundaryTag, build_unit_square_mesh
from elastinv.operator import ElasticityOperator, LameField, ProblemData

x, y = sympy.symbols("x y")
LAM = 2 + x * y          # variable coefficients exercise the element-mean rule
MU = sympy.Rational(3, 10) + sympy.Rational(1, 10) * x
U = sympy.Matrix([sympy.sin(sympy.pi * x) * sympy.sin(sympy.pi * y), x * y * (1 - x)])

grad = U.jacobian([x, y])
eps = (grad + grad.T) / 2
sigma = LAM * eps.trace() * sympy.eye(2) + 2 * MU * eps
force = -sympy.Matrix([sympy.diff(sigma[i, 0], x) + sympy.diff(sigma[i, 1], y) for i in range(2)])


def _vec(expr):
    fn = sympy.lambdify((x, y), list(expr), "numpy")
    return lambda p: np.column_stack([np.broadcast_to(c, p[:, 0].shape) for c in fn(p[:, 0], p[:, 1])])


exact, f = _vec(U), _vec(force)
lam_fn, mu_fn = (sympy.lambdify((x, y), e, "numpy") for e in (LAM, MU))
# traction sigma n on x = 0 (n = -e1) and x = 1 (n = e1)
trac = _vec(sigma[:, 0])


def solve(n, bc):
    m = build_unit_square_mesh(n)
    v = m.vertices
    if bc == "pure":
        dirichlet, gT = m.boundary_vertices, None
    else:
        dirichlet = m.vertices_with_tags([BoundaryTag.DIRICHLET_BOTTOM, BoundaryTag.DIRICHLET_TOP])
        gT = trac(v) * np.where(v[:, 0] < 0.5, -1.0, 1.0)[:, None]
    data = ProblemData(phi=exact(v), dirichlet_vertices=dirichlet, f=f(v), gT=gT)
    op = ElasticityOperator(m, data, "F", tol=1e-12)
    lame = LameField(np.broadcast_to(lam_fn(*v.T), v[:, 0].shape).copy(), np.broadcast_to(mu_fn(*v.T), v[:, 0].shape).copy())
    return fem.l2_error(m, op.forward(lame) + op.phi, exact)


if __name__ == "__main__":
    ns = [8, 16, 32, 64]
    for bc in ("pure", "mixed"):
        errs = [solve(n, bc) for n in ns]
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        fit = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
        print(f"{bc:<6} errors " + " ".join(f"{e:.3e}" for e in errs)
              + "  rates " + " ".join(f"{r:.2f}" for r in rates) + f"  fitted {fit:.3f}")
