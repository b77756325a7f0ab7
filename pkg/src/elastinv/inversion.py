"""Landweber and two-point gradient (Nesterov) iterations with discrepancy-principle stopping."""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from elastinv import fem
from elastinv.mesh import TriMesh, build_unit_square_mesh, interpolate_p1
from elastinv.operator import (
    ElasticityOperator,
    LameField,
    SmoothingConfig,
    experiment_problem,
)
from elastinv.phantom import compose_phantom

log = logging.getLogger(__name__)

DEGENERATE_STEPSIZE = 1e6


class StopReason(str, enum.Enum):
    CONTINUE = "continue"
    DISCREPANCY = "discrepancy"
    MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class StoppingRule:
    delta: float
    tau: float = 1.0
    max_iters: int = 5000

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("noise level must be non-negative")
        if self.tau < 1:
            raise ValueError("tau must be at least 1")

    @property
    def threshold(self) -> float:
        return self.tau * self.delta


@dataclass
class NoisyData:
    u_delta: np.ndarray
    delta: float
    seed: int | None


@dataclass
class IterationState:
    """Iterates ``x_k``, ``x_{k-1}``, the cached forward solution at ``x_k`` and the log."""

    x: LameField
    x_prev: LameField
    u_x: np.ndarray
    k: int = 0
    residual_history: list = field(default_factory=list)
    stepsizes: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    stopped: bool = False
    reason: StopReason = StopReason.CONTINUE


def add_noise(mesh: TriMesh, u: np.ndarray, relative_level: float, seed=None) -> NoisyData:
    """Add i.i.d. Gaussian nodal noise rescaled to ``relative_level * ||u||_{L2}`` exactly."""
    if relative_level < 0:
        raise ValueError("noise level must be non-negative")
    u = np.asarray(u, dtype=float)
    if relative_level == 0:
        return NoisyData(u.copy(), 0.0, seed)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(u.shape)
    noise *= relative_level * fem.l2_norm(mesh, u) / fem.l2_norm(mesh, noise)
    u_delta = u + noise
    return NoisyData(u_delta, fem.l2_norm(mesh, u_delta - u), seed)


def nesterov_alpha(k: int) -> float:
    return max(0.0, (k - 1) / (k + 2))


def residual_gradient(op: ElasticityOperator, x: LameField, u_delta: np.ndarray, u=None):
    """``s(x) = F'(x)^*(u_delta - F(x))`` and ``||u_delta - F(x)||_{L2}``."""
    if u is None:
        u = op.forward(x)
    r = u_delta - u
    return op.adjoint(x, r, u), op.data_norm(r)


def steepest_descent_stepsize(
    op: ElasticityOperator, x: LameField, s: LameField, u=None, atol: float = 0.0
) -> float:
    """``||s||_H^2 / ||F'(x) s||_{L2}^2``; zero when ``||s||_H <= atol``."""
    s_norm2 = op.hs_inner(s, s)
    if math.sqrt(max(s_norm2, 0.0)) <= atol:
        return 0.0
    ds_norm2 = op.data_norm(op.derivative(x, s, u)) ** 2
    if ds_norm2 == 0.0:
        log.warning("F'(x)s vanishes for nonzero s; capping stepsize at %g", DEGENERATE_STEPSIZE)
        return DEGENERATE_STEPSIZE
    return s_norm2 / ds_norm2


def _gradient_update(op, z, u_z, u_delta, use_sd_stepsize):
    s, _ = residual_gradient(op, z, u_delta, u_z)
    omega = steepest_descent_stepsize(op, z, s, u_z) if use_sd_stepsize else 1.0
    return op.project(z + omega * s), omega


def _advance(op, state, x_new, u_guess, u_delta, omega, alpha, t0):
    u_new = op.forward(x_new, guess=u_guess)
    state = IterationState(
        x=x_new,
        x_prev=state.x,
        u_x=u_new,
        k=state.k + 1,
        residual_history=state.residual_history + [op.data_norm(u_delta - u_new)],
        stepsizes=state.stepsizes + [omega],
        alphas=state.alphas + [alpha],
        wall_times=state.wall_times + [time.perf_counter() - t0],
    )
    return state


def initial_state(op: ElasticityOperator, x0: LameField, u_delta: np.ndarray) -> IterationState:
    x0 = op.project(x0)
    u0 = op.forward(x0)
    return IterationState(x=x0, x_prev=x0, u_x=u0, residual_history=[op.data_norm(u_delta - u0)],
                          wall_times=[0.0])


def landweber_step(op, state: IterationState, u_delta, use_sd_stepsize: bool = True) -> IterationState:
    """``x_{k+1} = P(x_k + omega s(x_k))`` with ``omega = 1`` or the steepest-descent stepsize."""
    t0 = time.perf_counter()
    x_new, omega = _gradient_update(op, state.x, state.u_x, u_delta, use_sd_stepsize)
    return _advance(op, state, x_new, state.u_x, u_delta, omega, 0.0, t0)


def tpg_step(op, state: IterationState, u_delta, alpha: float | None = None) -> IterationState:
    """Nesterov-accelerated step: gradient and stepsize evaluated at the extrapolation point ``z_k``."""
    t0 = time.perf_counter()
    a = nesterov_alpha(state.k) if alpha is None else alpha
    z = state.x + a * (state.x - state.x_prev)
    if np.array_equal(z.lam, state.x.lam) and np.array_equal(z.mu, state.x.mu):
        u_z = state.u_x
    else:
        u_z = op.forward(z, guess=state.u_x)
    x_new, omega = _gradient_update(op, z, u_z, u_delta, True)
    return _advance(op, state, x_new, u_z, u_delta, omega, a, t0)


def check_discrepancy(state: IterationState, rule: StoppingRule) -> StopReason:
    """Stop at the first iterate with residual ``<= tau * delta``, or at the iteration cap."""
    if rule.delta > 0 and state.residual_history[-1] <= rule.threshold:
        return StopReason.DISCREPANCY
    if state.k >= rule.max_iters:
        return StopReason.MAX_ITERS
    return StopReason.CONTINUE


def discrepancy_index(residuals, tau: float, delta: float) -> int | None:
    """First index whose residual satisfies the discrepancy principle."""
    if delta <= 0:
        return None
    for k, r in enumerate(residuals):
        if r <= tau * delta:
            return k
    return None


def iterate(
    op: ElasticityOperator,
    u_delta: np.ndarray,
    x0: LameField,
    rule: StoppingRule,
    method: str = "tpg",
    alpha: float | None = None,
    callback=None,
) -> IterationState:
    """Run ``method`` (``tpg``, ``landweber`` or ``landweber-sd``) until ``rule`` stops it."""
    state = initial_state(op, x0, u_delta)
    while True:
        reason = check_discrepancy(state, rule)
        if callback is not None:
            callback(state)
        if reason is not StopReason.CONTINUE:
            state.stopped, state.reason = True, reason
            return state
        if method == "tpg":
            state = tpg_step(op, state, u_delta, alpha)
        elif method == "landweber":
            state = landweber_step(op, state, u_delta, use_sd_stepsize=False)
        elif method == "landweber-sd":
            state = landweber_step(op, state, u_delta, use_sd_stepsize=True)
        else:
            raise ValueError(f"unknown method {method!r}")
        if state.k % 50 == 0:
            log.info("k=%d residual=%.6e (target %.6e)", state.k, state.residual_history[-1],
                     rule.threshold)


# -- experiment driver ------------------------------------------------------


@dataclass
class SyntheticData:
    mesh: TriMesh
    truth: LameField
    u_exact: np.ndarray
    noisy: NoisyData
    data_mesh: TriMesh


@dataclass
class ReconstructionResult:
    lame: LameField
    state: IterationState
    operator: ElasticityOperator
    data: SyntheticData
    timings: dict


def exact_data(config, mesh: TriMesh | None = None):
    """Forward solve of the phantom on the data mesh, interpolated to ``mesh``.

    Returns the physical displacement ``u + phi`` at the vertices of ``mesh``
    together with the fine-mesh truth phantom.
    """
    data_mesh = build_unit_square_mesh(config.data_n)
    truth_fine = compose_phantom(config.phantom_spec(), data_mesh)
    problem = experiment_problem(data_mesh, c_p=config.c_p, bc=config.bc, mu_floor=config.mu_floor)
    op = ElasticityOperator(data_mesh, problem, "F", tol=config.solver_tol)
    ut_fine = op.forward(truth_fine) + problem.phi
    if mesh is None:
        return data_mesh, ut_fine
    return data_mesh, interpolate_p1(data_mesh, ut_fine, mesh.vertices)


def build_operator(config, mesh: TriMesh) -> ElasticityOperator:
    background = None
    if config.operator == "Fc":
        background = LameField.constant(mesh.num_vertices, *config.phantom_spec().background)
    problem = experiment_problem(
        mesh, c_p=config.c_p, bc=config.bc, mu_floor=config.mu_floor,
        background=background, omega1=tuple(config.omega1),
    )
    return ElasticityOperator(
        mesh, problem, config.operator, SmoothingConfig(config.smoothing_s), tol=config.solver_tol
    )


def synthesize(config, mesh: TriMesh, op: ElasticityOperator, physical_data=None) -> SyntheticData:
    """Noisy homogenized data ``u_delta`` on the inverse mesh.

    Noise is scaled relative to the physical displacement ``u + phi``.
    """
    if physical_data is None:
        data_mesh, physical_data = exact_data(config, mesh)
    else:
        data_mesh = None
    noisy = add_noise(mesh, physical_data, config.noise_level, config.seed)
    phi = op.data.phi
    noisy_hom = NoisyData(noisy.u_delta - phi, noisy.delta, noisy.seed)
    truth = compose_phantom(config.phantom_spec(), mesh)
    return SyntheticData(mesh, truth, physical_data - phi, noisy_hom, data_mesh)


def run_inversion(config, u_delta: np.ndarray | None = None, delta: float | None = None,
                  callback=None) -> ReconstructionResult:
    """Full reconstruction run described by an :class:`~elastinv.config.ExperimentConfig`.

    ``u_delta`` (homogenized, on the inverse mesh) and ``delta`` may be given to
    reuse previously generated data; otherwise data is synthesized from the
    configured phantom.
    """
    t_start = time.perf_counter()
    mesh = build_unit_square_mesh(config.inverse_n)
    op = build_operator(config, mesh)
    if u_delta is None:
        data = synthesize(config, mesh, op)
    else:
        if delta is None:
            raise ValueError("precomputed data needs its noise level delta")
        noisy = NoisyData(np.asarray(u_delta, dtype=float), float(delta), config.seed)
        truth = compose_phantom(config.phantom_spec(), mesh)
        data = SyntheticData(mesh, truth, None, noisy, None)
    t_data = time.perf_counter()
    x0 = LameField.constant(mesh.num_vertices, *config.initial_guess)
    rule = StoppingRule(delta=data.noisy.delta, tau=config.tau, max_iters=config.max_iters)
    state = iterate(op, data.noisy.u_delta, x0, rule, method=config.method, callback=callback)
    t_end = time.perf_counter()
    lame = op.total_parameters(state.x)
    timings = {"data": t_data - t_start, "iterations": t_end - t_data, "total": t_end - t_start}
    log.info("stopped after %d iterations (%s)", state.k, state.reason.value)
    return ReconstructionResult(lame, state, op, data, timings)
