"""Lame-parameter phantoms built from C^2 circular bump functions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from elastinv.mesh import TriMesh
from elastinv.operator import LameField


class AdmissibilityError(ValueError):
    pass


@dataclass(frozen=True)
class BumpSpec:
    """Radial bump: ``h1`` on the disc of radius ``r1``, ``h2`` beyond ``r2``."""

    center: tuple[float, float]
    r1: float
    r2: float
    h1: float
    h2: float

    def __post_init__(self):
        if not 0.0 <= self.r1 <= self.r2:
            raise ValueError(f"need 0 <= r1 <= r2, got r1={self.r1}, r2={self.r2}")
        if not np.all(np.isfinite([*self.center, self.r1, self.r2, self.h1, self.h2])):
            raise ValueError("bump parameters must be finite")


@dataclass(frozen=True)
class PhantomSpec:
    """Constant background with inclusions; each inclusion is a (lambda, mu) bump pair."""

    background: tuple[float, float] = (2.0, 0.3)
    inclusions: tuple[tuple[BumpSpec, BumpSpec], ...] = field(default_factory=tuple)


def quintic_transition(r1, r2, h1, h2, r):
    """Degree-5 Hermite blend from ``h1`` at ``r1`` to ``h2`` at ``r2``.

    First and second derivatives vanish at both ends.
    """
    if not r1 < r2:
        raise ValueError("transition needs r1 < r2")
    r = np.asarray(r, dtype=float)
    if np.any(r < r1) or np.any(r > r2):
        raise ValueError(f"radius outside the transition band [{r1}, {r2}]")
    t = (r - r1) / (r2 - r1)
    smooth = t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
    return h1 + (h2 - h1) * smooth


def eval_bump(spec: BumpSpec, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    dist = np.hypot(x[:, 0] - spec.center[0], x[:, 1] - spec.center[1])
    out = np.where(dist <= spec.r1, spec.h1, spec.h2).astype(float)
    band = (dist > spec.r1) & (dist < spec.r2)
    if np.any(band):
        out[band] = quintic_transition(spec.r1, spec.r2, spec.h1, spec.h2, dist[band])
    return out


def compose_phantom(spec: PhantomSpec, mesh: TriMesh) -> LameField:
    """Evaluate a phantom at mesh vertices; later inclusions overwrite earlier ones."""
    nv = mesh.num_vertices
    lam = np.full(nv, float(spec.background[0]))
    mu = np.full(nv, float(spec.background[1]))
    pts = mesh.vertices
    for bump_lam, bump_mu in spec.inclusions:
        for bump, target in ((bump_lam, lam), (bump_mu, mu)):
            dist = np.hypot(pts[:, 0] - bump.center[0], pts[:, 1] - bump.center[1])
            inside = dist < bump.r2
            target[inside] = eval_bump(bump, pts[inside])
    if np.any(mu <= 0.0):
        raise AdmissibilityError(f"phantom has non-positive mu (min {mu.min():.3g})")
    if np.any(lam < 0.0):
        raise AdmissibilityError(f"phantom has negative lambda (min {lam.min():.3g})")
    return LameField(lam, mu)


def _inclusion(center, r1, r2, lam_peak, mu_peak, background):
    return (
        BumpSpec(tuple(center), r1, r2, lam_peak, background[0]),
        BumpSpec(tuple(center), r1, r2, mu_peak, background[1]),
    )


BACKGROUND = (2.0, 0.3)


def smooth_phantom() -> PhantomSpec:
    return PhantomSpec(BACKGROUND, (_inclusion((0.5, 0.5), 0.15, 0.35, 4.0, 0.9, BACKGROUND),))


def near_discontinuous_phantom(width: float = 0.01) -> PhantomSpec:
    return PhantomSpec(
        BACKGROUND, (_inclusion((0.5, 0.5), 0.25, 0.25 + width, 4.0, 0.9, BACKGROUND),)
    )


def three_inclusion_phantom() -> PhantomSpec:
    r1, r2 = 0.06, 0.15
    return PhantomSpec(
        BACKGROUND,
        (
            _inclusion((0.3, 0.3), r1, r2, 3.5, 0.6, BACKGROUND),
            _inclusion((0.7, 0.35), r1, r2, 4.5, 0.9, BACKGROUND),
            _inclusion((0.5, 0.7), r1, r2, 3.0, 1.2, BACKGROUND),
        ),
    )


PRESETS = {
    "smooth": smooth_phantom,
    "near-discontinuous": near_discontinuous_phantom,
    "three-inclusions": three_inclusion_phantom,
    "background": lambda: PhantomSpec(BACKGROUND, ()),
}


def preset(name: str) -> PhantomSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown phantom preset {name!r}; choose from {sorted(PRESETS)}") from None
