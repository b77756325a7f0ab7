"""Numerical checks of the structural properties the iteration relies on.

Adjoint consistency, Taylor remainders of the derivative, empirical
tangential-cone ratios and discrete coercivity of the stiffness matrix.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from elastinv import fem
from elastinv.mesh import TriMesh
from elastinv.operator import ElasticityOperator, LameField, restrict
from elastinv.phantom import BumpSpec, eval_bump


def w1inf_norm(mesh: TriMesh, x: LameField) -> float:
    """``max(||v||_inf, ||grad v||_inf)`` of each component, summed over (lambda, mu)."""
    total = 0.0
    for v in (x.lam, x.mu):
        grad = fem.element_gradients(mesh, v)
        total += max(np.max(np.abs(v)), np.max(np.hypot(grad[:, 0], grad[:, 1])))
    return float(total)


# -- tangential cone condition ---------------------------------------------


@dataclass
class TccReport:
    scales: np.ndarray
    sizes: np.ndarray
    ratios: np.ndarray
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.ratios < 1.0)) and not any(self.flags)

    def monotone(self, slack: float = 0.05) -> bool:
        """Ratios shrink with the scale, allowing ``slack`` relative wiggle."""
        r = self.ratios
        return bool(np.all(r[:-1] <= r[1:] * (1.0 + slack)))

    def rows(self):
        for t, s, r in zip(self.scales, self.sizes, self.ratios):
            yield {"scale": t, "w1inf_size": s, "ratio": r}


def collar_mask(op: ElasticityOperator, width: float | None = None) -> np.ndarray:
    """Support vertices at least ``width`` (default one element) inside the subdomain boundary."""
    mesh = op.mesh
    if width is None:
        width = 1.0 / mesh.n if mesh.n else float(np.sqrt(2 * mesh.areas.max()))
    xmin, xmax, ymin, ymax = op.data.omega1 or (0.0, 1.0, 0.0, 1.0)
    x, y = mesh.vertices[op.support, 0], mesh.vertices[op.support, 1]
    dist = np.minimum.reduce([x - xmin, xmax - x, y - ymin, ymax - y])
    return op.support[dist > width + 1e-12]


def bump_direction(
    op: ElasticityOperator,
    which: str = "both",
    center=(0.5, 0.5),
    r1: float = 0.1,
    r2: float = 0.3,
    amplitude=None,
) -> LameField:
    """Smooth bump perturbation vanishing on a one-element collar of the subdomain.

    The default amplitude per parameter is its background value, so a scale
    ``t`` perturbs by ``t`` times the background.
    """
    if amplitude is None:
        bg = op.data.background
        amplitude = (float(bg.lam.max()), float(bg.mu.max())) if bg is not None else (1.0, 1.0)
    profile = eval_bump(BumpSpec(tuple(center), r1, r2, 1.0, 0.0), op.mesh.vertices)
    lam = amplitude[0] * profile if which in ("lam", "both") else np.zeros_like(profile)
    mu = amplitude[1] * profile if which in ("mu", "both") else np.zeros_like(profile)
    return restrict(LameField(lam, mu), collar_mask(op))


def tcc_ratio(op: ElasticityOperator, x: LameField, xbar: LameField, u=None) -> float:
    if u is None:
        u = op.forward(x)
    ubar = op.forward(xbar)
    diff = u - ubar
    lin = op.derivative(x, x - xbar, u)
    num = op.data_norm(diff - lin)
    den = op.data_norm(diff)
    if den == 0.0:
        if num == 0.0:
            return 0.0
        return math.inf
    return num / den


def tcc_sweep(op: ElasticityOperator, x: LameField, direction: LameField, scales) -> TccReport:
    """Ratios ``||F(x) - F(xb) - F'(x)(x - xb)|| / ||F(x) - F(xb)||`` for ``xb = P(x + t d)``."""
    if op.fc_mode:
        outside = np.setdiff1d(np.arange(op.num_vertices), op.support)
        if np.any(direction.lam[outside] != 0) or np.any(direction.mu[outside] != 0):
            raise ValueError("direction must vanish outside the subdomain")
    scales = np.sort(np.asarray(scales, dtype=float))
    u = op.forward(x)
    sizes, ratios, flags = [], [], []
    for t in scales:
        xbar = op.project(x + t * direction)
        sizes.append(w1inf_norm(op.mesh, xbar - x))
        r = tcc_ratio(op, x, xbar, u)
        if math.isinf(r):
            flags.append(f"degenerate at t={t:g}: F(x) = F(xbar) but linearization differs")
        ratios.append(r)
    return TccReport(scales, np.array(sizes), np.array(ratios), flags)


# -- derivative and adjoint checks ----------------------------------------


def duality_gap(op: ElasticityOperator, x: LameField, h: LameField, w: np.ndarray, u=None) -> float:
    """``|<F'h, w> - <h, F'^* w>_H| / (||F'h|| ||w||)``, zero when either side vanishes."""
    if u is None:
        u = op.forward(x)
    dh = op.derivative(x, h, u)
    s = op.adjoint(x, w, u)
    denom = op.data_norm(dh) * op.data_norm(w)
    if denom == 0.0:
        return 0.0
    return abs(op.data_inner(dh, w) - op.hs_inner(h, s)) / denom


def random_admissible(op: ElasticityOperator, rng: np.random.Generator) -> LameField:
    nv = op.num_vertices
    if op.fc_mode:
        bg = op.data.background
        x = LameField(rng.uniform(-0.3, 1.0, nv) * bg.lam, rng.uniform(-0.3, 1.0, nv) * bg.mu)
        return op.project(restrict(x, op.support))
    return op.project(LameField(rng.uniform(1.0, 4.0, nv), rng.uniform(0.3, 1.0, nv)))


def adjoint_test(op: ElasticityOperator, x: LameField | None = None, trials: int = 20,
                 seed: int = 0) -> float:
    """Largest duality gap over ``trials`` random ``(h, w)`` pairs."""
    rng = np.random.default_rng(seed)
    if x is None:
        x = random_admissible(op, rng)
    u = op.forward(x)
    worst = 0.0
    for _ in range(trials):
        h = op.random_direction(rng)
        w = rng.standard_normal((op.num_vertices, 2))
        worst = max(worst, duality_gap(op, x, h, w, u))
    return worst


@dataclass
class TaylorReport:
    ts: np.ndarray
    remainders: np.ndarray

    @property
    def slope(self) -> float:
        """Least-squares slope of ``log remainder`` against ``log t``."""
        return float(np.polyfit(np.log(self.ts), np.log(self.remainders), 1)[0])


def taylor_test(op: ElasticityOperator, x: LameField, h: LameField, ts=(1e-1, 1e-2, 1e-3)) -> TaylorReport:
    u = op.forward(x)
    dh = op.derivative(x, h, u)
    rem = [op.data_norm(op.forward(x + t * h) - u - t * dh) for t in ts]
    return TaylorReport(np.asarray(ts, dtype=float), np.asarray(rem))


# -- coercivity -------------------------------------------------------------


@dataclass
class CoercivityReport:
    passed: bool
    message: str
    min_lambda: float
    min_mu: float


def coercivity_test(mesh: TriMesh, lame: LameField, dirichlet_vertices, probes: int = 5,
                    seed: int = 0, dense_limit: int = 4000) -> CoercivityReport:
    """SPD check of the constrained stiffness matrix.

    Small systems get an exact dense Cholesky test; every system is probed by
    CG solves on random right-hand sides and by energy ``v^T K v`` of random
    constrained vectors.
    """
    K = fem.assemble_elasticity(mesh, lame.lam, lame.mu)
    dofs = fem.vertex_dofs(dirichlet_vertices)
    free = np.setdiff1d(np.arange(K.shape[0]), dofs)
    Kd, _ = fem.apply_dirichlet(K, np.zeros(K.shape[0]), dofs)
    rng = np.random.default_rng(seed)
    stats = dict(min_lambda=float(lame.lam.min()), min_mu=float(lame.mu.min()))

    def fail(msg):
        return CoercivityReport(False, f"NOT_SPD: {msg} (min lambda {stats['min_lambda']:.3g}, "
                                       f"min mu {stats['min_mu']:.3g})", **stats)

    if len(free) <= dense_limit:
        try:
            np.linalg.cholesky(K[free][:, free].toarray())
        except np.linalg.LinAlgError:
            return fail("Cholesky factorization of the constrained stiffness failed")
    for _ in range(probes):
        v = np.zeros(K.shape[0])
        v[free] = rng.standard_normal(len(free))
        if v @ (K @ v) <= 0.0:
            return fail("non-positive energy on a random constrained vector")
        try:
            fem.solve_spd(Kd, v, tol=1e-8)
        except fem.NotSPDError as exc:
            return fail(str(exc))
        except fem.NoConvergenceError as exc:
            return fail(f"CG stalled: {exc}")
    return CoercivityReport(True, "SPD", **stats)


def write_report(path, rows: list[dict]) -> Path:
    path = Path(path)
    if not rows:
        path.write_text("")
        return path
    keys = list(rows[0])
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return path
