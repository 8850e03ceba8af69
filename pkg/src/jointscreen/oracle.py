"""Brute-force reference implementations used to cross-check the library.

Nothing here is meant for production scale: the samplers fight the curse
of dimensionality (keep m <= 10) and the reference solver trades speed
for a certified duality gap.  Every routine is deterministic given the
OracleConfig seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dictionary, PrimalPoint, Problem
from .regions import DomeRegion, SphereRegion
from .screening import ScreenMask, _delta_threshold_value, eps_threshold
from .solver import ConvergenceError, SafeSphere, SolveResult, DualPoint


@dataclass(frozen=True)
class OracleConfig:
    sample_count: int = 100_000
    seed: int = 0
    tolerance: float = 1e-3

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if not (self.tolerance > 0):
            raise ValueError("tolerance must be positive")


def _unit_rows(g: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return g / norms


def _direction_batches(rng, count: int, dim: int, pull: np.ndarray | None):
    """Unit directions: uniform plus two strata pulled toward `pull`.

    Biasing the proposal toward the ascent direction densifies samples
    where the maximum lives without ever leaving the region, so the
    sampled maximum stays a valid lower bound while converging faster.
    """
    thirds = [count - 2 * (count // 3), count // 3, count // 3]
    batches = [_unit_rows(rng.standard_normal((thirds[0], dim)))]
    if pull is not None and float(np.linalg.norm(pull)) > 0:
        unit_pull = pull / np.linalg.norm(pull)
        for kappa, size in ((4.0, thirds[1]), (32.0, thirds[2])):
            g = rng.standard_normal((size, dim)) + kappa * unit_pull
            batches.append(_unit_rows(g))
    else:
        batches.append(_unit_rows(rng.standard_normal((thirds[1] + thirds[2], dim))))
    return np.vstack([b for b in batches if b.shape[0]])


def sample_sphere_region(region: SphereRegion, count: int, rng, pull=None) -> np.ndarray:
    """Points on the boundary ||a - t|| = eps (where a linear max lives)."""
    dirs = _direction_batches(rng, count, region.t.shape[0], pull)
    return region.t + region.eps * dirs


def sample_dome(region: DomeRegion, count: int, rng, pull=None, surface_only=True) -> np.ndarray:
    """Points of the dome: spherical-cap surface plus the flat base disc.

    Decomposes a = alpha*t + z with z in the orthogonal complement of t,
    ||z|| <= sqrt(1 - alpha^2) and alpha in [delta, 1].  With
    surface_only the radius is exactly sqrt(1 - alpha^2) (cap surface);
    otherwise it is scaled by a random factor to cover the interior.
    """
    t = region.t
    dim = t.shape[0]
    cap = count - count // 4
    alphas = rng.uniform(region.delta, 1.0, size=cap)
    pull_perp = None
    if pull is not None:
        pull_perp = pull - (pull @ t) * t
    dirs = _direction_batches(rng, cap, dim, pull_perp)
    dirs = dirs - np.outer(dirs @ t, t)
    dirs = _unit_rows(dirs)
    radii = np.sqrt(np.maximum(0.0, 1.0 - alphas**2))
    if not surface_only:
        radii = radii * np.sqrt(rng.uniform(0.0, 1.0, size=cap))
    points = alphas[:, None] * t + radii[:, None] * dirs
    disc = count - cap
    if disc:
        disc_dirs = _unit_rows(rng.standard_normal((disc, dim)))
        disc_dirs = _unit_rows(disc_dirs - np.outer(disc_dirs @ t, t))
        scale = math.sqrt(max(0.0, 1.0 - region.delta**2))
        disc_radii = scale * np.sqrt(rng.uniform(0.0, 1.0, size=disc))
        points = np.vstack([points, region.delta * t + disc_radii[:, None] * disc_dirs])
    return points


def region_max_bruteforce(region, c, config: OracleConfig) -> float:
    """Sampled lower bound on max <a, c> over the region.

    Never exceeds the closed-form value (all samples lie inside the
    region); approaches it as sample_count grows.
    """
    c = np.asarray(c, dtype=float)
    rng = np.random.default_rng(config.seed)
    best = -math.inf
    remaining = config.sample_count
    chunk_size = 200_000
    while remaining > 0:
        chunk = min(chunk_size, remaining)
        remaining -= chunk
        if isinstance(region, SphereRegion):
            points = sample_sphere_region(region, chunk, rng, pull=c)
        elif isinstance(region, DomeRegion):
            points = sample_dome(region, chunk, rng, pull=c)
        else:
            raise TypeError(f"unsupported region type {type(region).__name__}")
        best = max(best, float((points @ c).max()))
    return best


def reference_solve(problem: Problem, tolerance: float, max_iters: int = 1_000_000, x0=None) -> PrimalPoint:
    """High-precision accelerated proximal-gradient solve with its own gap check.

    Shares no code with the solver module beyond the problem types: step
    size, dual scaling, and both objectives are evaluated inline, so the
    certificate (duality gap <= tolerance) is an independent measurement.
    """
    if tolerance < 1e-14:
        raise ValueError(f"tolerance {tolerance!r} below the certifiable floor 1e-14")
    A = problem.dictionary.atoms
    y = problem.observation.y
    lam = problem.lam
    sigma = float(np.linalg.norm(A, 2))
    step = 1.0 / max(sigma * sigma, 1e-12)
    n = problem.n
    x = np.zeros(n) if x0 is None else np.asarray(getattr(x0, "x", x0), dtype=float).copy()
    x_prev = x.copy()
    t = 1.0
    half_y_sq = 0.5 * float(y @ y)

    def gap_and_theta(x):
        r = y - A @ x
        theta = r / max(lam, float((A.T @ r).max()))
        primal = 0.5 * float(r @ r) + lam * float(x.sum())
        d = y - lam * theta
        return primal - (half_y_sq - 0.5 * float(d @ d)), theta

    for iteration in range(max_iters):
        if iteration < 64 or iteration % 8 == 0:
            gap, _ = gap_and_theta(x)
            if gap <= tolerance:
                return PrimalPoint(x)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = x + ((t - 1.0) / t_next) * (x - x_prev)
        x_prev = x
        x = np.maximum(0.0, z + step * (A.T @ (y - A @ z)) - lam * step)
        t = 1.0 if float((z - x) @ (x - x_prev)) > 0.0 else t_next
    gap, theta = gap_and_theta(x)
    if gap <= tolerance:
        return PrimalPoint(x)
    radius = math.sqrt(2.0 * max(gap, 0.0)) / lam
    raise ConvergenceError(
        gap,
        max_iters,
        SolveResult(PrimalPoint(x), DualPoint(theta), gap, max_iters, SafeSphere(theta, 1.0 - radius)),
    )


def exhaustive_standard_screen(dictionary: Dictionary, sphere: SafeSphere) -> ScreenMask:
    """Literal per-atom loop evaluating <a_i, c> < tau, no vectorization."""
    mask = ScreenMask.empty(dictionary.n)
    for i in range(dictionary.n):
        if float(np.dot(dictionary.column(i), sphere.center)) < sphere.tau:
            mask.screened[i] = True
    mask.inner_product_count = dictionary.n
    return mask


def exhaustive_sphere_region_screen(dictionary: Dictionary, t, sphere: SafeSphere) -> ScreenMask:
    """Per-atom distance check ||a_i - t|| < eps_{t,c}."""
    t = np.asarray(t, dtype=float)
    threshold = eps_threshold(t, sphere)
    mask = ScreenMask.empty(dictionary.n)
    for i in range(dictionary.n):
        if float(np.linalg.norm(dictionary.column(i) - t)) < threshold:
            mask.screened[i] = True
    mask.inner_product_count = 1
    return mask


def exhaustive_dome_region_screen(dictionary: Dictionary, t, sphere: SafeSphere) -> ScreenMask:
    """Per-atom inner-product check <t, a_i> > delta_{t,c}, gated like the fast path."""
    t = np.asarray(t, dtype=float)
    mask = ScreenMask.empty(dictionary.n)
    mask.inner_product_count = 1
    c = sphere.center
    norm_c = float(np.linalg.norm(c))
    tc = float(t @ c)
    if sphere.tau > norm_c or not (tc < sphere.tau):
        return mask
    threshold = _delta_threshold_value(norm_c, tc, sphere.tau)
    for i in range(dictionary.n):
        if float(np.dot(t, dictionary.column(i))) > threshold:
            mask.screened[i] = True
    return mask
