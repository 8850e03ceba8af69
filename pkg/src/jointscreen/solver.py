"""FISTA solver, dual points, duality gap, and GAP safe spheres.

Each accelerated proximal-gradient iterate yields a feasible dual point by
rescaling the residual; the duality gap of that primal/dual pair gives a
ball of radius sqrt(2*gap)/lam around the dual point that is guaranteed to
contain the dual optimum.  Screening procedures consume these balls.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .core import (
    DimensionMismatchError,
    Dictionary,
    PrimalPoint,
    Problem,
    dual_objective,
    primal_objective,
)

DUAL_FEAS_TOL = 1e-12
GAP_CLAMP = 1e-12


class DivergenceError(RuntimeError):
    """Iterates became non-finite; the step size is too large."""


class ConvergenceError(RuntimeError):
    """The gap tolerance was not reached within the iteration budget."""

    def __init__(self, gap: float, iterations: int, result: "SolveResult"):
        self.gap = gap
        self.iterations = iterations
        self.result = result
        super().__init__(
            f"gap {gap:.3e} > tolerance after {iterations} iterations"
        )


class InfeasibleDualError(ValueError):
    """theta violates <a_i, theta> <= 1 beyond tolerance."""


class NegativeGapError(RuntimeError):
    """Gap below -1e-12: the primal/dual pair is inconsistent."""


@dataclass(frozen=True, eq=False)
class DualPoint:
    """A point of the dual polytope {theta : <a_i, theta> <= 1}."""

    theta: np.ndarray


@dataclass(frozen=True, eq=False)
class SafeSphere:
    """Ball {theta : ||theta - center|| <= 1 - tau} containing the dual optimum."""

    center: np.ndarray
    tau: float

    def __post_init__(self):
        if self.tau > 1.0:
            raise ValueError(f"tau = {self.tau!r} > 1 gives a negative radius")
        object.__setattr__(self, "center", np.ascontiguousarray(self.center, dtype=float))
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def radius(self) -> float:
        return 1.0 - self.tau

    def contains(self, theta, slack: float = 0.0) -> bool:
        theta = np.asarray(getattr(theta, "theta", theta), dtype=float)
        return float(np.linalg.norm(theta - self.center)) <= self.radius + slack


@dataclass(frozen=True, eq=False)
class SolverState:
    """One FISTA iterate; `residual` caches y - A x."""

    x: np.ndarray
    x_prev: np.ndarray
    momentum: float
    iteration: int
    step_size: float
    residual: np.ndarray


_spectral_cache: "weakref.WeakKeyDictionary[Dictionary, float]" = weakref.WeakKeyDictionary()


def spectral_norm_estimate(dictionary: Dictionary, iterations: int = 100) -> float:
    """Estimate ||A||_2 by power iteration on A^T A (cached per dictionary)."""
    cached = _spectral_cache.get(dictionary)
    if cached is not None:
        return cached
    A = dictionary.atoms
    rng = np.random.default_rng(0)
    v = rng.standard_normal(dictionary.n)
    v /= np.linalg.norm(v)
    sigma_sq = 1.0
    for _ in range(iterations):
        w = A.T @ (A @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break
        sigma_sq = float(v @ w)
        v = w / norm
    estimate = math.sqrt(max(sigma_sq, 1.0))  # unit columns give ||A||_2 >= 1
    _spectral_cache[dictionary] = estimate
    return estimate


def default_step_size(dictionary: Dictionary) -> float:
    # 1.01 inflation guards against an under-converged power iteration
    sigma = 1.01 * spectral_norm_estimate(dictionary)
    return 1.0 / (sigma * sigma)


def initial_state(problem: Problem, x0=None, step_size: float | None = None) -> SolverState:
    x = np.zeros(problem.n) if x0 is None else np.asarray(getattr(x0, "x", x0), dtype=float).copy()
    if x.shape[0] != problem.n:
        raise DimensionMismatchError(f"x0 has length {x.shape[0]}, expected {problem.n}")
    if step_size is None:
        step_size = default_step_size(problem.dictionary)
    residual = problem.observation.y - problem.dictionary.atoms @ x
    return SolverState(
        x=x, x_prev=x.copy(), momentum=1.0, iteration=0,
        step_size=step_size, residual=residual,
    )


def nonneg_soft_threshold(v: np.ndarray, threshold: float) -> np.ndarray:
    """Proximal map of threshold*sum(x) over the nonnegative orthant."""
    return np.maximum(0.0, v - threshold)


def fista_step(state: SolverState, problem: Problem) -> SolverState:
    """One accelerated proximal-gradient step.

    Extrapolates from the previous two iterates with the usual momentum
    schedule t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2, takes a gradient step
    on 0.5*||y - A z||^2 and applies the nonnegative soft threshold.
    Requires step_size <= 1/||A||_2^2 for the descent guarantees to hold.

    When the extrapolation direction opposes the actual step the
    returned momentum resets to 1 (adaptive restart); without this the
    gap stalls orders of magnitude above tolerance on coherent
    dictionaries.  The iterate itself is unaffected.
    """
    A = problem.dictionary.atoms
    y = problem.observation.y
    s = state.step_size
    t = state.momentum
    t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is detected below
        z = state.x + ((t - 1.0) / t_next) * (state.x - state.x_prev)
        grad_residual = y - A @ z
        v = z + s * (A.T @ grad_residual)
        x_next = nonneg_soft_threshold(v, problem.lam * s)
        if not np.all(np.isfinite(x_next)):
            raise DivergenceError(
                f"non-finite iterate at iteration {state.iteration + 1}; "
                f"step size {s!r} exceeds 1/||A||_2^2?"
            )
        if float((z - x_next) @ (x_next - state.x)) > 0.0:
            t_next = 1.0
        residual = y - A @ x_next
    return SolverState(
        x=x_next,
        x_prev=state.x,
        momentum=t_next,
        iteration=state.iteration + 1,
        step_size=s,
        residual=residual,
    )


def is_dual_feasible(dictionary: Dictionary, theta, tol: float = DUAL_FEAS_TOL) -> bool:
    theta = np.asarray(getattr(theta, "theta", theta), dtype=float)
    return float((dictionary.atoms.T @ theta).max()) <= 1.0 + tol


def dual_feasible_point(problem: Problem, x) -> DualPoint:
    """Rescale the residual y - A x into the dual polytope.

    theta = r / lam when max_i <a_i, r> <= lam (exact at the optimum,
    where y = lam*theta + A x), otherwise r / max_i <a_i, r>.
    """
    xv = np.asarray(getattr(x, "x", x), dtype=float)
    if xv.shape[0] != problem.n:
        raise DimensionMismatchError(f"x has length {xv.shape[0]}, expected {problem.n}")
    r = problem.observation.y - problem.dictionary.atoms @ xv
    top = float((problem.dictionary.atoms.T @ r).max())
    return DualPoint(r / max(problem.lam, top))


def duality_gap(problem: Problem, x, theta) -> float:
    """Primal minus dual objective; nonnegative for any feasible pair.

    Tiny negative values (>= -1e-12, pure roundoff) are clamped to zero;
    anything more negative raises NegativeGapError since it indicates a
    bug rather than noise.  Infeasible theta is rejected.
    """
    tv = np.asarray(getattr(theta, "theta", theta), dtype=float)
    if not is_dual_feasible(problem.dictionary, tv):
        top = float((problem.dictionary.atoms.T @ tv).max())
        raise InfeasibleDualError(f"max_i <a_i, theta> = {top!r} > 1")
    gap = primal_objective(problem, x) - dual_objective(problem, tv)
    return _clamp_gap(gap)


def _clamp_gap(gap: float) -> float:
    if gap < -GAP_CLAMP:
        raise NegativeGapError(f"gap = {gap!r} < -{GAP_CLAMP}")
    return max(gap, 0.0)


def gap_safe_sphere(problem: Problem, x, theta) -> SafeSphere:
    """Safe sphere centered on theta with radius sqrt(2*gap)/lam."""
    tv = np.asarray(getattr(theta, "theta", theta), dtype=float)
    gap = duality_gap(problem, x, tv)
    radius = math.sqrt(2.0 * gap) / problem.lam
    return SafeSphere(center=tv.copy(), tau=1.0 - radius)


@dataclass(frozen=True, eq=False)
class SolveResult:
    x: PrimalPoint
    theta: DualPoint
    gap: float
    iterations: int
    sphere: SafeSphere


def _dual_gap_sphere(problem: Problem, x: np.ndarray, residual: np.ndarray):
    """Fused theta/gap/sphere evaluation reusing one A^T r product."""
    lam = problem.lam
    corr = problem.dictionary.atoms.T @ residual
    scale = max(lam, float(corr.max()))
    theta = residual / scale
    y = problem.observation.y
    primal = 0.5 * float(residual @ residual) + lam * float(x.sum())
    d = y - lam * theta
    dual = 0.5 * float(y @ y) - 0.5 * float(d @ d)
    gap = _clamp_gap(primal - dual)
    radius = math.sqrt(2.0 * gap) / lam
    return theta, gap, SafeSphere(center=theta, tau=1.0 - radius)


Callback = Callable[[SolverState, SafeSphere], Optional[np.ndarray]]


def solve(
    problem: Problem,
    gap_tolerance: float = 1e-8,
    max_iters: int = 10_000,
    callback: Callback | None = None,
    x0=None,
) -> SolveResult:
    """Run FISTA until the duality gap falls below `gap_tolerance`.

    The callback is invoked once per iteration (including the initial
    state, iteration 0) with the current SolverState and the GAP safe
    sphere for that iterate.  A callback may return a boolean mask of
    atoms certified to be zero in the solution; those coordinates are
    pinned to zero for the rest of the run, which does not change the
    optimum.  Callbacks must not mutate the state.

    Raises ConvergenceError (carrying the partial SolveResult) when the
    budget is exhausted, DivergenceError on non-finite iterates.
    """
    if not (gap_tolerance > 0):
        raise ValueError(f"gap_tolerance must be positive, got {gap_tolerance}")
    state = initial_state(problem, x0=x0)
    A = problem.dictionary.atoms
    y = problem.observation.y
    frozen = np.zeros(problem.n, dtype=bool)
    while True:
        theta, gap, sphere = _dual_gap_sphere(problem, state.x, state.residual)
        if callback is not None:
            fb = callback(state, sphere)
            if fb is not None:
                fb = np.asarray(getattr(fb, "screened", fb), dtype=bool)
                new = fb & ~frozen
                if new.any():
                    frozen |= new
                    if state.x[new].any() or state.x_prev[new].any():
                        x = np.where(frozen, 0.0, state.x)
                        state = replace(
                            state,
                            x=x,
                            x_prev=np.where(frozen, 0.0, state.x_prev),
                            residual=y - A @ x,
                        )
                        theta, gap, sphere = _dual_gap_sphere(problem, state.x, state.residual)
        if gap <= gap_tolerance:
            return SolveResult(
                x=PrimalPoint(state.x),
                theta=DualPoint(theta),
                gap=gap,
                iterations=state.iteration,
                sphere=sphere,
            )
        if state.iteration >= max_iters:
            result = SolveResult(
                x=PrimalPoint(state.x),
                theta=DualPoint(theta),
                gap=gap,
                iterations=state.iteration,
                sphere=sphere,
            )
            raise ConvergenceError(gap, state.iteration, result)
        state = fista_step(state, problem)
        if frozen.any() and state.x[frozen].any():
            x = np.where(frozen, 0.0, state.x)
            state = replace(state, x=x, residual=y - A @ x)
