"""Atom-space regions and their closed-form maxima.

Two region families are screened jointly: balls ("sphere regions")
{a : ||a - t|| <= eps} and spherical caps of the unit ball ("dome
regions") {a : <a, t> >= delta, ||a|| <= 1} with a unit axis t.  The
maximum of <a, c> over either region has a closed form; the dome case
reduces to the scalar function g below.  Minimal enclosing spheres and
domes of finite unit-vector sets are also built here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatchError, UNIT_NORM_TOL

BOUNDARY_TOL = 1e-12
RATIO_CLAMP_TOL = 1e-9


class DegenerateDomeError(RuntimeError):
    """The minimal enclosing sphere is centered at the origin, so no dome
    axis can be recovered from it.  `t_hint`/`delta` give a usable (not
    necessarily optimal) dome containing the set."""

    def __init__(self, t_hint: np.ndarray, delta: float):
        self.t_hint = t_hint
        self.delta = delta
        super().__init__(
            "minimal enclosing sphere is centered at the origin; "
            f"fallback dome has delta = {delta!r}"
        )


@dataclass(frozen=True, eq=False)
class SphereRegion:
    """Ball of radius eps >= 0 around t."""

    t: np.ndarray
    eps: float

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1:
            raise DimensionMismatchError(f"t must be 1-d, got shape {t.shape}")
        if not (self.eps >= 0):
            raise ValueError(f"eps must be nonnegative, got {self.eps!r}")
        object.__setattr__(self, "t", t)

    def contains(self, a, slack: float = 0.0) -> bool:
        return float(np.linalg.norm(np.asarray(a, dtype=float) - self.t)) <= self.eps + slack


@dataclass(frozen=True, eq=False)
class DomeRegion:
    """Unit-ball vectors whose inner product with the unit axis t is >= delta."""

    t: np.ndarray
    delta: float

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1:
            raise DimensionMismatchError(f"t must be 1-d, got shape {t.shape}")
        norm = np.linalg.norm(t)
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"dome axis must be unit norm, got ||t|| = {norm!r}")
        if not (-1.0 - BOUNDARY_TOL <= self.delta <= 1.0 + BOUNDARY_TOL):
            raise ValueError(f"delta must lie in [-1, 1], got {self.delta!r}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "delta", float(min(1.0, max(-1.0, self.delta))))

    def contains(self, a, slack: float = 0.0) -> bool:
        a = np.asarray(a, dtype=float)
        return (
            float(np.linalg.norm(a)) <= 1.0 + slack
            and float(a @ self.t) >= self.delta - slack
        )


@dataclass(frozen=True, eq=False)
class UnitVectorSet:
    """A nonempty collection of unit vectors, stored as rows."""

    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if vectors.shape[0] < 1:
            raise ValueError("set must contain at least one vector")
        norms = np.linalg.norm(vectors, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_TOL)
        if bad.size:
            raise ValueError(
                f"member {bad[0]} has norm {norms[bad[0]]!r}, expected 1 within {UNIT_NORM_TOL}"
            )
        object.__setattr__(self, "vectors", vectors)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def sphere_region_max(region: SphereRegion, c) -> float:
    """max of <a, c> over the ball: <t, c> + eps*||c||."""
    c = np.asarray(c, dtype=float)
    if c.shape != region.t.shape:
        raise DimensionMismatchError(f"c has shape {c.shape}, region is in {region.t.shape}")
    return float(region.t @ c) + region.eps * float(np.linalg.norm(c))


def concave_aux_g(a: float, xi: float) -> float:
    """Decreasing envelope of f(xi) = a*xi + sqrt(1-a^2)*sqrt(1-xi^2).

    Equals 1 for xi < a (f attains its maximum 1 at xi = a), and f(xi)
    on [a, 1].  Concave and non-increasing on [-1, 1].  Inputs may
    overshoot the interval by at most 1e-12 and are clamped.
    """
    for name, val in (("a", a), ("xi", xi)):
        if not (-1.0 - BOUNDARY_TOL <= val <= 1.0 + BOUNDARY_TOL):
            raise ValueError(f"{name} = {val!r} outside [-1, 1]")
    a = min(1.0, max(-1.0, a))
    xi = min(1.0, max(-1.0, xi))
    if xi < a:
        return 1.0
    return a * xi + np.sqrt(1.0 - a * a) * np.sqrt(1.0 - xi * xi)


def dome_region_max(region: DomeRegion, c) -> float:
    """max of <a, c> over the dome: ||c|| * g(<t,c>/||c||, delta).

    Returns 0 for c = 0 (the exact limit; every inner product with the
    zero vector vanishes).
    """
    c = np.asarray(c, dtype=float)
    if c.shape != region.t.shape:
        raise DimensionMismatchError(f"c has shape {c.shape}, region is in {region.t.shape}")
    norm_c = float(np.linalg.norm(c))
    if norm_c == 0.0:
        return 0.0
    ratio = float(region.t @ c) / norm_c
    if abs(ratio) > 1.0 + RATIO_CLAMP_TOL:
        raise ValueError(f"<t,c>/||c|| = {ratio!r} is not a cosine; is t unit norm?")
    ratio = min(1.0, max(-1.0, ratio))
    return norm_c * concave_aux_g(ratio, region.delta)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, v.size + 1) > (css - 1.0))[0][-1]
    return np.maximum(v - (css[rho] - 1.0) / (rho + 1.0), 0.0)


def _polish_min_norm(P: np.ndarray, gram: np.ndarray, u: np.ndarray, tol: float):
    """Snap u to the exact minimizer on its detected support, if certified."""
    support = np.flatnonzero(u > 1e-10)
    if support.size == 0:
        support = np.array([int(np.argmin(np.diag(gram)))])
    k = support.size
    system = np.zeros((k + 1, k + 1))
    system[:k, :k] = 2.0 * gram[np.ix_(support, support)]
    system[:k, k] = 1.0
    system[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    v = sol[:k]
    if v.min() < -1e-10 or abs(v.sum() - 1.0) > 1e-8:
        return None
    v = np.maximum(v, 0.0)
    v /= v.sum()
    candidate = np.zeros_like(u)
    candidate[support] = v
    x = P.T @ candidate
    sq = float(x @ x)
    if float((P @ x).min()) >= sq - tol * max(1.0, sq):
        return candidate
    return None


def _min_norm_point_hull(P: np.ndarray, tol: float = 1e-13, max_rounds: int = 400):
    """Minimizer of ||P^T u|| over the probability simplex.

    Accelerated projected gradient with periodic exact refits on the
    active support; the Wolfe criterion min_i <p_i, x> >= ||x||^2
    certifies optimality.
    """
    k = P.shape[0]
    if k == 1:
        return np.array([1.0])
    gram = P @ P.T
    lip = 2.0 * float(np.linalg.eigvalsh(gram)[-1]) + 1e-15
    u = np.full(k, 1.0 / k)
    w = u.copy()
    t = 1.0
    for _ in range(max_rounds):
        for _ in range(50):
            grad = 2.0 * (gram @ w)
            u_next = _project_simplex(w - grad / lip)
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            w = u_next + ((t - 1.0) / t_next) * (u_next - u)
            u, t = u_next, t_next
        gu = gram @ u
        sq = float(u @ gu)
        if sq - float(gu.min()) <= tol * max(1.0, sq):
            break
        polished = _polish_min_norm(P, gram, u, tol)
        if polished is not None:
            return polished
    polished = _polish_min_norm(P, gram, u, tol)
    return polished if polished is not None else u


def min_enclosing_sphere(vector_set: UnitVectorSet) -> SphereRegion:
    """Smallest ball containing every member of the set.

    For unit vectors the optimal center is the minimum-norm point of
    their convex hull (the minimax objective expands to ||t||^2 -
    2*min_i <t, a_i> + 1, whose Lagrange dual is the min-norm problem).
    """
    P = vector_set.vectors
    u = _min_norm_point_hull(P)
    center = P.T @ u
    radius = float(np.max(np.linalg.norm(P - center, axis=1)))
    return SphereRegion(t=center, eps=radius)


def min_enclosing_dome(vector_set: UnitVectorSet) -> DomeRegion:
    """Smallest dome containing the set, via the enclosing-sphere center.

    The optimal axis is the normalized sphere center and the optimal
    offset the smallest inner product with it.  When the sphere center
    sits at the origin (the set surrounds it) the axis is undefined;
    DegenerateDomeError then carries a fallback dome that still contains
    the set, with a nonpositive delta.
    """
    sphere = min_enclosing_sphere(vector_set)
    P = vector_set.vectors
    norm = float(np.linalg.norm(sphere.t))
    if norm <= 1e-9:
        mean = P.mean(axis=0)
        mean_norm = float(np.linalg.norm(mean))
        t_hint = mean / mean_norm if mean_norm > 1e-12 else P[0].copy()
        raise DegenerateDomeError(t_hint, float((P @ t_hint).min()))
    axis = sphere.t / norm
    delta = float((P @ axis).min())
    return DomeRegion(t=axis, delta=delta)
