"""Problem data for the nonnegative LASSO: dictionary, observation, objectives.

The primal problem is

    min_{x >= 0}  0.5 * ||y - A x||^2 + lam * sum(x),

over a dictionary A whose columns (the "atoms") all have unit Euclidean
norm.  Its dual runs over the polytope {theta : <a_i, theta> <= 1 for all i}
with objective 0.5*||y||^2 - 0.5*||y - lam*theta||^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIT_NORM_TOL = 1e-12


class DimensionMismatchError(ValueError):
    """Operands have incompatible shapes."""


class ZeroColumnError(ValueError):
    """A dictionary column has zero norm and cannot be normalized."""

    def __init__(self, column: int):
        self.column = column
        super().__init__(f"column {column} has zero norm")


class LambdaMaxUndefinedError(ValueError):
    """max_i <a_i, y> <= 0: the solution is x = 0 for every lam > 0."""


def _as_vector(v) -> np.ndarray:
    arr = np.asarray(getattr(v, "x", getattr(v, "theta", getattr(v, "y", v))), dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-d vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Dictionary:
    """An m x n matrix of unit-norm atoms, immutable after construction."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim != 2:
            raise DimensionMismatchError(f"atoms must be 2-d, got shape {atoms.shape}")
        if atoms.shape[0] < 1 or atoms.shape[1] < 1:
            raise ValueError("dictionary must have at least one row and one column")
        # column access is the hot path
        atoms = np.asfortranarray(atoms)
        norms = np.linalg.norm(atoms, axis=0)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_TOL)
        if bad.size:
            raise ValueError(
                f"column {bad[0]} has norm {norms[bad[0]]!r}, expected 1 within {UNIT_NORM_TOL}"
            )
        atoms.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    @property
    def n(self) -> int:
        return self.atoms.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.atoms[:, i]


@dataclass(frozen=True, eq=False)
class Observation:
    """The observed vector y, length m."""

    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1:
            raise DimensionMismatchError(f"observation must be 1-d, got shape {y.shape}")
        y = y.copy()
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True, eq=False)
class Problem:
    """A dictionary/observation pair with regularization weight lam > 0."""

    dictionary: Dictionary
    observation: Observation
    lam: float

    def __post_init__(self):
        if self.observation.m != self.dictionary.m:
            raise DimensionMismatchError(
                f"observation length {self.observation.m} != dictionary rows {self.dictionary.m}"
            )
        if not (self.lam > 0):
            raise ValueError(f"lam must be positive, got {self.lam}")

    @property
    def m(self) -> int:
        return self.dictionary.m

    @property
    def n(self) -> int:
        return self.dictionary.n


@dataclass(frozen=True, eq=False)
class PrimalPoint:
    """A nonnegative candidate solution x."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1:
            raise DimensionMismatchError(f"primal point must be 1-d, got shape {x.shape}")
        if x.size and x.min() < 0:
            raise ValueError(f"primal point has negative entry {x.min()!r}")
        x = x.copy()
        x.flags.writeable = False
        object.__setattr__(self, "x", x)


def unit_normalize(raw) -> Dictionary:
    """Scale each column of `raw` to unit norm and wrap it as a Dictionary.

    Column order is preserved.  Raises ZeroColumnError (carrying the index
    of the first offending column) if any column is identically zero.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-d matrix, got shape {raw.shape}")
    norms = np.linalg.norm(raw, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroColumnError(int(zero[0]))
    return Dictionary(raw / norms)


def primal_objective(problem: Problem, x) -> float:
    """0.5*||y - A x||^2 + lam*sum(x) for a nonnegative x."""
    xv = _as_vector(x)
    if xv.shape[0] != problem.n:
        raise DimensionMismatchError(f"x has length {xv.shape[0]}, expected {problem.n}")
    r = problem.observation.y - problem.dictionary.atoms @ xv
    return 0.5 * float(r @ r) + problem.lam * float(xv.sum())


def dual_objective(problem: Problem, theta) -> float:
    """0.5*||y||^2 - 0.5*||y - lam*theta||^2; feasibility is not checked."""
    tv = _as_vector(theta)
    if tv.shape[0] != problem.m:
        raise DimensionMismatchError(f"theta has length {tv.shape[0]}, expected {problem.m}")
    y = problem.observation.y
    d = y - problem.lam * tv
    return 0.5 * float(y @ y) - 0.5 * float(d @ d)


def max_correlation(dictionary: Dictionary, observation: Observation) -> float:
    """Signed maximum of <a_i, y> over all atoms."""
    if observation.m != dictionary.m:
        raise DimensionMismatchError(
            f"observation length {observation.m} != dictionary rows {dictionary.m}"
        )
    return float((dictionary.atoms.T @ observation.y).max())


def lambda_max(dictionary: Dictionary, observation: Observation) -> float:
    """Smallest lam at which the solution becomes identically zero.

    For the nonnegative problem this is max_i <a_i, y>; a nonpositive
    maximum means x = 0 solves the problem for every lam > 0, which is
    reported as LambdaMaxUndefinedError.
    """
    mx = max_correlation(dictionary, observation)
    if mx <= 0:
        raise LambdaMaxUndefinedError(
            f"max_i <a_i, y> = {mx!r} <= 0; x = 0 is optimal for every lam > 0"
        )
    return mx


def lambda_max_abs(dictionary: Dictionary, observation: Observation) -> float:
    """The unsigned variant ||A^T y||_inf = max_i |<a_i, y>|."""
    if observation.m != dictionary.m:
        raise DimensionMismatchError(
            f"observation length {observation.m} != dictionary rows {dictionary.m}"
        )
    corr = dictionary.atoms.T @ observation.y
    return float(np.abs(corr).max()) if corr.size else 0.0
