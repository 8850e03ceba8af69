"""Safe screening tests: per-atom, joint sphere/dome, and sorted-index forms.

Given a safe sphere (center c, parameter tau), the per-atom test screens
atom i when <a_i, c> < tau.  The joint tests replace the per-atom scan
with a single inner product <t, c> per region: a ball of atoms around t
passes when <t, c> < tau - eps*||c||, a dome when <t, c> < tau and its
offset exceeds the threshold delta_{t,c}.  Precomputing and sorting the
per-atom distances ||a_i - t|| and inner products <t, a_i> turns either
test into one inner product plus a binary search, so screening L regions
costs O(L*m + L*log2(n)) instead of the O(m*n) of the per-atom scan.

All inequalities are strict: an atom exactly at a threshold is never
screened.  `inner_product_count` tracks dictionary-scale inner products
(<a_i, c> or <t, c>), the quantity whose count the joint procedure
reduces from n to L.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .core import DimensionMismatchError, Dictionary, UNIT_NORM_TOL
from .regions import DomeRegion, SphereRegion
from .solver import SafeSphere

try:
    from ._kernels import mark_dome_prefixes, mark_sphere_prefixes

    _HAVE_KERNELS = True
except ImportError:  # numba unavailable: the numpy fallback below is used
    _HAVE_KERNELS = False

logger = logging.getLogger(__name__)


class DomeGateError(ValueError):
    """delta_threshold requires <t, c> < tau and it does not hold."""


class CenterNormError(ValueError):
    """tau > ||c||: not a safe sphere of the kind Lemma-3 geometry needs."""


@dataclass(eq=False)
class ScreenMask:
    """Accumulating set of screened atoms plus an inner-product counter."""

    screened: np.ndarray
    inner_product_count: int = 0

    def __post_init__(self):
        if not (isinstance(self.screened, np.ndarray) and self.screened.dtype == np.bool_):
            self.screened = np.asarray(self.screened, dtype=bool)

    @classmethod
    def empty(cls, n: int) -> "ScreenMask":
        return cls(np.zeros(n, dtype=bool))

    @property
    def count(self) -> int:
        return int(self.screened.sum())

    def union_with(self, other: "ScreenMask") -> "ScreenMask":
        """Widen this mask in place; counters add."""
        self.screened |= other.screened
        self.inner_product_count += other.inner_product_count
        return self

    def copy(self) -> "ScreenMask":
        return ScreenMask(self.screened.copy(), self.inner_product_count)


@dataclass(frozen=True, eq=False)
class GroupIndex:
    """Sorted per-atom distances and inner products for one test vector.

    `sorted_distances` is ascending, `sorted_inner` descending;
    `distance_order` / `inner_order` are the matching atom permutations.
    """

    dictionary: Dictionary
    t: np.ndarray
    sorted_distances: np.ndarray
    distance_order: np.ndarray
    sorted_inner: np.ndarray
    inner_order: np.ndarray
    _neg_sorted_inner: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self._neg_sorted_inner is None:
            object.__setattr__(self, "_neg_sorted_inner", -self.sorted_inner)


def build_group_index(dictionary: Dictionary, t) -> GroupIndex:
    """Precompute and sort ||a_i - t|| and <t, a_i> for all atoms."""
    t = np.asarray(t, dtype=float)
    if t.shape[0] != dictionary.m or t.ndim != 1:
        raise DimensionMismatchError(f"t has shape {t.shape}, expected ({dictionary.m},)")
    norm = float(np.linalg.norm(t))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"test vector must be unit norm, got ||t|| = {norm!r}")
    distances = np.linalg.norm(dictionary.atoms - t[:, None], axis=0)
    inner = dictionary.atoms.T @ t
    dist_order = np.argsort(distances, kind="stable")
    inner_order = np.argsort(-inner, kind="stable")
    return GroupIndex(
        dictionary=dictionary,
        t=t,
        sorted_distances=distances[dist_order],
        distance_order=dist_order,
        sorted_inner=inner[inner_order],
        inner_order=inner_order,
    )


class GroupIndexSet:
    """A stack of GroupIndex objects over one dictionary, for batched tests.

    Stacking the sorted arrays lets all L binary searches run as one
    vectorized bisection, which is what makes the measured cost of a
    joint invocation scale with L rather than n.
    """

    def __init__(self, indices: Sequence[GroupIndex]):
        indices = list(indices)
        if not indices:
            raise ValueError("need at least one group index")
        dictionary = indices[0].dictionary
        for idx in indices[1:]:
            if idx.dictionary is not dictionary:
                raise ValueError("group indices were built over different dictionaries")
        self.dictionary = dictionary
        self.indices = indices
        self.T = np.ascontiguousarray([idx.t for idx in indices])
        self.dist_sorted = np.ascontiguousarray([idx.sorted_distances for idx in indices])
        self.dist_order = np.ascontiguousarray(
            [idx.distance_order for idx in indices], dtype=np.int32
        )
        self.neg_inner_sorted = np.ascontiguousarray(
            [idx._neg_sorted_inner for idx in indices]
        )
        self.inner_order = np.ascontiguousarray(
            [idx.inner_order for idx in indices], dtype=np.int32
        )
        n = dictionary.n
        rank_dtype = np.int16 if n < 2**15 else np.int32
        cols = np.arange(n, dtype=rank_dtype)
        self.dist_rank = np.empty((len(indices), n), dtype=rank_dtype)
        self.inner_rank = np.empty((len(indices), n), dtype=rank_dtype)
        for row, idx in enumerate(indices):
            self.dist_rank[row, idx.distance_order] = cols
            self.inner_rank[row, idx.inner_order] = cols

    def __len__(self) -> int:
        return len(self.indices)


def standard_screen(dictionary: Dictionary, sphere: SafeSphere) -> ScreenMask:
    """Per-atom test: screen atom i when <a_i, c> < tau.  Costs n inner products."""
    c = sphere.center
    if c.shape[0] != dictionary.m:
        raise DimensionMismatchError(
            f"sphere center has length {c.shape[0]}, expected {dictionary.m}"
        )
    corr = dictionary.atoms.T @ c
    return ScreenMask(corr < sphere.tau, inner_product_count=dictionary.n)


def joint_sphere_test(region: SphereRegion, sphere: SafeSphere) -> bool:
    """True when every atom within eps of t is safely screened."""
    c = sphere.center
    if c.shape != region.t.shape:
        raise DimensionMismatchError("region and sphere live in different dimensions")
    return float(region.t @ c) < sphere.tau - region.eps * float(np.linalg.norm(c))


def joint_dome_test(region: DomeRegion, sphere: SafeSphere) -> bool:
    """True when every unit-ball vector of the dome is safely screened.

    Requires tau <= ||c||, which holds for genuine safe spheres below
    lambda_max; otherwise the test conservatively reports False and logs
    a diagnostic.
    """
    c = sphere.center
    if c.shape != region.t.shape:
        raise DimensionMismatchError("region and sphere live in different dimensions")
    norm_c = float(np.linalg.norm(c))
    tau = sphere.tau
    if tau > norm_c:
        logger.debug(
            "joint dome test skipped: tau=%r > ||c||=%r (screening nothing)", tau, norm_c
        )
        return False
    tc = float(region.t @ c)
    if not (tc < tau):
        return False
    return region.delta > _delta_threshold_value(norm_c, tc, tau)


def _delta_threshold_value(norm_c: float, tc: float, tau: float) -> float:
    sq = norm_c * norm_c
    head = math.sqrt(max(0.0, sq - tc * tc))
    tail = math.sqrt(max(0.0, sq - tau * tau))
    return min(1.0, (tc * tau + head * tail) / sq)


def eps_threshold(t, sphere: SafeSphere) -> float:
    """Largest ball radius around t that still passes the joint sphere test.

    (tau - <t, c>) / ||c||; negative when <t, c> >= tau (nothing can be
    screened).  A zero center degenerates to +inf for tau > 0 (the whole
    dictionary is screened) and -inf otherwise.
    """
    t = np.asarray(t, dtype=float)
    c = sphere.center
    if c.shape != t.shape:
        raise DimensionMismatchError("t and sphere center have different lengths")
    norm_c = float(np.linalg.norm(c))
    if norm_c == 0.0:
        return math.inf if sphere.tau > 0 else -math.inf
    return (sphere.tau - float(t @ c)) / norm_c


def delta_threshold(t, sphere: SafeSphere) -> float:
    """Tight dome-offset threshold delta_{t,c} solving max<a,c> = tau.

    Atoms with <t, a_i> strictly above it are screened.  Raises
    CenterNormError when tau > ||c|| and DomeGateError when the gate
    <t, c> < tau fails; the two preconditions are signalled separately.
    """
    t = np.asarray(t, dtype=float)
    c = sphere.center
    if c.shape != t.shape:
        raise DimensionMismatchError("t and sphere center have different lengths")
    norm_c = float(np.linalg.norm(c))
    tau = sphere.tau
    if tau > norm_c:
        raise CenterNormError(f"tau = {tau!r} > ||c|| = {norm_c!r}")
    tc = float(t @ c)
    if not (tc < tau):
        raise DomeGateError(f"<t, c> = {tc!r} >= tau = {tau!r}")
    return _delta_threshold_value(norm_c, tc, tau)


def screen_by_sphere_index(index: GroupIndex, sphere: SafeSphere, mask: ScreenMask) -> ScreenMask:
    """Mark every atom with ||a_i - t|| strictly below eps_{t,c}.

    One inner product plus a binary search on the precomputed distances.
    """
    threshold = eps_threshold(index.t, sphere)
    mask.inner_product_count += 1
    pos = int(np.searchsorted(index.sorted_distances, threshold, side="left"))
    if pos:
        mask.screened[index.distance_order[:pos]] = True
    return mask


def screen_by_dome_index(index: GroupIndex, sphere: SafeSphere, mask: ScreenMask) -> ScreenMask:
    """Mark every atom with <t, a_i> strictly above delta_{t,c}.

    Screens nothing when the gate <t, c> < tau fails or tau > ||c||.
    """
    c = sphere.center
    tc = float(index.t @ c)
    mask.inner_product_count += 1
    norm_c = float(np.linalg.norm(c))
    tau = sphere.tau
    if tau > norm_c:
        logger.debug(
            "dome index screen skipped: tau=%r > ||c||=%r (screening nothing)", tau, norm_c
        )
        return mask
    if not (tc < tau):
        return mask
    threshold = _delta_threshold_value(norm_c, tc, tau)
    pos = int(np.searchsorted(index._neg_sorted_inner, -threshold, side="left"))
    if pos:
        mask.screened[index.inner_order[:pos]] = True
    return mask


def _batched_searchsorted(rows: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Per-row side='left' searchsorted over a 2-d array of sorted rows."""
    count, n = rows.shape
    lo = np.zeros(count, dtype=np.int64)
    hi = np.full(count, n, dtype=np.int64)
    row_ids = np.arange(count)
    for _ in range(int(math.ceil(math.log2(max(n, 2)))) + 1):
        if not np.any(lo < hi):
            break
        mid = (lo + hi) >> 1
        probe = rows[row_ids, np.minimum(mid, n - 1)]
        go_right = (probe < values) & (lo < hi)
        lo = np.where(go_right, mid + 1, lo)
        hi = np.where(go_right | (lo >= hi), hi, mid)
    return lo


def _mark_prefixes(mask: ScreenMask, order: np.ndarray, rank: np.ndarray, pos: np.ndarray):
    hit = np.flatnonzero(pos > 0)
    if hit.size == 0:
        return
    total = int(pos[hit].sum())
    if total > order.shape[1]:
        # bulk regime: one vectorized rank comparison beats many scatters
        np.logical_or(
            mask.screened, (rank < pos[:, None].astype(rank.dtype)).any(axis=0), out=mask.screened
        )
        return
    for row in hit:
        mask.screened[order[row, : pos[row]]] = True


IndexArg = Union[GroupIndexSet, Sequence[GroupIndex]]


def joint_screen_all(indices: IndexArg, sphere: SafeSphere, mode: str) -> ScreenMask:
    """Apply the sorted-index test for every region; union of the masks.

    `mode` is "sphere" or "dome".  Costs exactly one inner product per
    region (L in total).  Passing a prebuilt GroupIndexSet avoids
    restacking the sorted arrays on every call.
    """
    if mode not in ("sphere", "dome"):
        raise ValueError(f"mode must be 'sphere' or 'dome', got {mode!r}")
    if not isinstance(indices, GroupIndexSet):
        indices = list(indices)
        if not indices:
            return ScreenMask.empty(0)
        indices = GroupIndexSet(indices)
    dictionary = indices.dictionary
    c = sphere.center
    if c.shape[0] != dictionary.m:
        raise DimensionMismatchError(
            f"sphere center has length {c.shape[0]}, expected {dictionary.m}"
        )
    count = len(indices)
    tau = sphere.tau
    if _HAVE_KERNELS:
        # sqrt(c@c) is bit-identical to np.linalg.norm for 1-d float64
        norm_c = math.sqrt(float(c @ c))
        out = np.zeros(dictionary.n, dtype=bool)
        if mode == "sphere":
            mark_sphere_prefixes(
                indices.T, c, tau, norm_c, indices.dist_sorted, indices.dist_order, out
            )
        elif tau > norm_c:
            logger.debug(
                "joint dome screen skipped: tau=%r > ||c||=%r (screening nothing)",
                tau, norm_c,
            )
        else:
            mark_dome_prefixes(
                indices.T, c, tau, norm_c, indices.neg_inner_sorted, indices.inner_order, out
            )
        return ScreenMask(out, count)
    mask = ScreenMask.empty(dictionary.n)
    mask.inner_product_count += count
    norm_c = float(np.linalg.norm(c))
    tc = indices.T @ c
    if mode == "sphere":
        if norm_c == 0.0:
            thresholds = np.full(count, math.inf if tau > 0 else -math.inf)
        else:
            thresholds = (tau - tc) / norm_c
        pos = _batched_searchsorted(indices.dist_sorted, thresholds)
        _mark_prefixes(mask, indices.dist_order, indices.dist_rank, pos)
    else:
        if tau > norm_c:
            logger.debug(
                "joint dome screen skipped: tau=%r > ||c||=%r (screening nothing)", tau, norm_c
            )
            return mask
        live = tc < tau
        if np.any(live):
            sq = norm_c * norm_c
            head = np.sqrt(np.maximum(0.0, sq - tc * tc))
            tail = math.sqrt(max(0.0, sq - tau * tau))
            thresholds = np.minimum(1.0, (tc * tau + head * tail) / sq)
            pos = _batched_searchsorted(indices.neg_inner_sorted, -thresholds)
            pos[~live] = 0
            _mark_prefixes(mask, indices.inner_order, indices.inner_rank, pos)
    return mask
