"""Clustered-dictionary benchmark: data generation, detection grids, outputs.

The synthetic instance follows the clustered design: L seed atoms drawn
from a zero-mean Gaussian with covariance I/m and normalized, each seed
surrounded by satellites whose inner product with it is at least the
configured coherence, and an observation formed from a small random
subset of columns with standard normal coefficients.

For a decreasing grid of lam values, FISTA runs with a per-iteration
callback that builds the GAP safe sphere and applies the configured
screening procedures; the proportion of the true zeros of the converged
solution that each procedure has identified is recorded on a
(log10-iteration x lam) grid, together with inner-product counters.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import core, oracle, screening, solver
from .core import Dictionary, Observation, Problem

MODES = ("standard", "sphere", "dome", "hybrid")
ZERO_TOL = 1e-7


@dataclass(frozen=True)
class ExperimentConfig:
    m: int = 100
    n: int = 2000
    clusters: int = 100
    atoms_per_cluster: int = 20
    seed_coherence: float = 0.9
    sparsity: int = 10
    lambda_decades: float = 1.5
    lambda_grid_points: int = 30
    max_iters_per_lambda: int = 10_000
    gap_tolerance: float = 1e-8
    reference_gap_tolerance: float = 1e-12
    rng_seed: int = 0
    mode: str = "dome"
    buckets_per_decade: int = 8

    def __post_init__(self):
        if self.clusters * self.atoms_per_cluster != self.n:
            raise ValueError(
                f"clusters*atoms_per_cluster = {self.clusters * self.atoms_per_cluster} != n = {self.n}"
            )
        if not (0.0 < self.seed_coherence < 1.0):
            raise ValueError(f"seed_coherence must lie in (0, 1), got {self.seed_coherence}")
        if not (0 <= self.sparsity <= self.n):
            raise ValueError(f"sparsity must lie in [0, n], got {self.sparsity}")
        if self.lambda_grid_points < 1:
            raise ValueError("lambda_grid_points must be >= 1")
        if not (self.lambda_decades > 0):
            raise ValueError("lambda_decades must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


def _stream_rng(config: ExperimentConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng([config.rng_seed, stream])


def generate_clustered_dictionary(config: ExperimentConfig):
    """Build the clustered dictionary; returns (Dictionary, seeds as rows).

    Each cluster holds its seed plus satellites cos(phi)*seed +
    sin(phi)*u with u a random unit vector orthogonal to the seed and
    cos(phi) uniform on [coherence, 1], which pins <atom, seed> >=
    coherence exactly and keeps unit norms.
    """
    rng = _stream_rng(config, 0)
    m, L, per = config.m, config.clusters, config.atoms_per_cluster
    seeds = rng.normal(0.0, 1.0 / math.sqrt(m), size=(L, m))
    seeds /= np.linalg.norm(seeds, axis=1, keepdims=True)
    atoms = np.empty((m, config.n), order="F")
    for cluster in range(L):
        seed = seeds[cluster]
        base = cluster * per
        atoms[:, base] = seed
        if per == 1:
            continue
        k = per - 1
        cosines = rng.uniform(config.seed_coherence, 1.0, size=k)
        g = rng.standard_normal((k, m))
        g -= np.outer(g @ seed, seed)
        norms = np.linalg.norm(g, axis=1)
        while np.any(norms < 1e-12):  # essentially impossible, but stay exact
            bad = norms < 1e-12
            g[bad] = rng.standard_normal((int(bad.sum()), m))
            g[bad] -= np.outer(g[bad] @ seed, seed)
            norms = np.linalg.norm(g, axis=1)
        u = g / norms[:, None]
        sines = np.sqrt(1.0 - cosines**2)
        block = cosines[:, None] * seed + sines[:, None] * u
        block /= np.linalg.norm(block, axis=1, keepdims=True)
        atoms[:, base + 1 : base + per] = block.T
    return Dictionary(atoms), seeds


def generate_observation(dictionary: Dictionary, config: ExperimentConfig, coefficients=None):
    """y = A x_true with a random support of `sparsity` columns.

    Coefficients are standard normal unless given explicitly (handy for
    deterministic tests).  Returns (Observation, sorted support indices).
    """
    rng = _stream_rng(config, 1)
    k = config.sparsity
    support = np.sort(rng.choice(dictionary.n, size=k, replace=False)) if k else np.array([], dtype=int)
    if coefficients is None:
        coefficients = rng.standard_normal(k)
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape[0] != k:
        raise ValueError(f"expected {k} coefficients, got {coefficients.shape[0]}")
    y = dictionary.atoms[:, support] @ coefficients if k else np.zeros(dictionary.m)
    return Observation(y), support


def lambda_grid(lam_max: float, decades: float, points: int) -> np.ndarray:
    """Geometric grid from lam_max down to 10^(-decades) * lam_max."""
    if points == 1:
        return np.array([lam_max])
    exponents = -decades * np.arange(points) / (points - 1)
    return lam_max * 10.0**exponents


class DetectionGrid:
    """Detection rates on a (log10-iteration bucket) x (lam index) grid.

    Rows bucket the iteration count at `buckets_per_decade` cells per
    decade of log10(iteration + 1); columns follow the lam grid.  Each
    filled cell keeps the latest iteration that landed in its bucket,
    the detection rate at that point, the number of screened atoms, and
    the cumulative inner products spent on screening for that lam.
    """

    def __init__(self, mode, lambdas, lam_max, max_iters, buckets_per_decade=8):
        self.mode = mode
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.lam_max = float(lam_max)
        self.buckets_per_decade = int(buckets_per_decade)
        self.n_cols = self.lambdas.size
        self.n_rows = self.row_of(max_iters) + 1
        with np.errstate(divide="ignore"):
            ratios = -np.log10(self.lambdas / self.lam_max) if self.n_cols else np.array([])
        self.neg_log10_ratios = np.where(np.abs(ratios) < 1e-15, 0.0, ratios)
        shape = (self.n_rows, self.n_cols)
        self.rate = np.full(shape, np.nan)
        self.iteration = np.full(shape, -1, dtype=np.int64)
        self.screened_count = np.zeros(shape, dtype=np.int64)
        self.inner_products = np.zeros(shape, dtype=np.int64)
        self.true_zero_count = np.zeros(self.n_cols, dtype=np.int64)

    def row_of(self, iteration: int) -> int:
        return int(math.floor(math.log10(iteration + 1) * self.buckets_per_decade))

    def record(self, col, iteration, rate, screened_count, true_zero_count, inner_products):
        if not (0.0 <= rate <= 1.0):
            raise ValueError(f"detection rate {rate!r} outside [0, 1]")
        row = self.row_of(iteration)
        self.rate[row, col] = rate
        self.iteration[row, col] = iteration
        self.screened_count[row, col] = screened_count
        self.inner_products[row, col] = inner_products
        self.true_zero_count[col] = true_zero_count

    @property
    def filled(self) -> np.ndarray:
        return self.iteration >= 0

    def rows(self):
        """Cells as CSV-ready dicts, lam-major then iteration-ascending."""
        for col in range(self.n_cols):
            for row in range(self.n_rows):
                if self.iteration[row, col] < 0:
                    continue
                yield {
                    "mode": self.mode,
                    "lambda": float(self.lambdas[col]),
                    "neg_log10_lambda_ratio": float(self.neg_log10_ratios[col]),
                    "iteration": int(self.iteration[row, col]),
                    "detection_rate": float(self.rate[row, col]),
                    "screened_count": int(self.screened_count[row, col]),
                    "true_zero_count": int(self.true_zero_count[col]),
                    "inner_products": int(self.inner_products[row, col]),
                }


@dataclass(eq=False)
class ExperimentResult:
    config: ExperimentConfig
    modes: tuple
    lam_max: float
    lambdas: np.ndarray
    grids: dict
    lemma3_min_margin: float = math.inf
    safety_violations: int = 0
    dominance_violations: int = 0
    unconverged: list = field(default_factory=list)
    reference_failures: list = field(default_factory=list)


def _hybrid_screen(dictionary, index_set, sphere, accumulated):
    """Joint dome pass, then the per-atom test on the surviving atoms only."""
    fresh = screening.joint_screen_all(index_set, sphere, "dome")
    survivors = np.flatnonzero(~(accumulated.screened | fresh.screened))
    if survivors.size:
        corr = dictionary.atoms[:, survivors].T @ sphere.center
        fresh.screened[survivors[corr < sphere.tau]] = True
        fresh.inner_product_count += survivors.size
    return fresh


def run_experiment(config: ExperimentConfig, modes=None) -> ExperimentResult:
    """Run the lam-path benchmark; one shared solver trajectory per lam.

    Screening is measured on the side rather than fed back into the
    solver so that every mode sees the identical sphere sequence and the
    per-cell dominance comparison is exact.  Solver or reference
    non-convergence is recorded per lam and the experiment continues.
    """
    modes = tuple(dict.fromkeys(modes)) if modes is not None else (config.mode,)
    for mode in modes:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
    dictionary, seeds = generate_clustered_dictionary(config)
    observation, _support = generate_observation(dictionary, config)
    lam_max = core.lambda_max(dictionary, observation)
    lambdas = lambda_grid(lam_max, config.lambda_decades, config.lambda_grid_points)
    needs_index = any(m in ("sphere", "dome", "hybrid") for m in modes)
    index_set = None
    if needs_index:
        index_set = screening.GroupIndexSet(
            [screening.build_group_index(dictionary, t) for t in seeds]
        )
    result = ExperimentResult(
        config=config,
        modes=modes,
        lam_max=lam_max,
        lambdas=lambdas,
        grids={
            mode: DetectionGrid(
                mode, lambdas, lam_max, config.max_iters_per_lambda, config.buckets_per_decade
            )
            for mode in modes
        },
    )
    warm = None
    ref_warm = None
    for col, lam in enumerate(lambdas):
        problem = Problem(dictionary, observation, float(lam))
        try:
            x_ref = oracle.reference_solve(
                problem, config.reference_gap_tolerance, x0=ref_warm
            )
        except solver.ConvergenceError as err:
            result.reference_failures.append((float(lam), err.gap))
            ref_warm = err.result.x.x
            continue
        ref_warm = x_ref.x
        zeros_ref = x_ref.x == 0.0
        not_zero = x_ref.x > ZERO_TOL
        zero_count = int(zeros_ref.sum())
        accumulated = {mode: screening.ScreenMask.empty(dictionary.n) for mode in modes}
        audit_lemma3 = lam < lam_max

        def callback(state, sphere, col=col, accumulated=accumulated, audit=audit_lemma3,
                     zeros_ref=zeros_ref, zero_count=zero_count):
            if audit:
                margin = float(np.linalg.norm(sphere.center)) + 1e-12 - sphere.tau
                if margin < result.lemma3_min_margin:
                    result.lemma3_min_margin = margin
            fresh = {}
            for mode in modes:
                if mode == "standard":
                    fresh[mode] = screening.standard_screen(dictionary, sphere)
                elif mode == "hybrid":
                    fresh[mode] = _hybrid_screen(dictionary, index_set, sphere, accumulated[mode])
                else:
                    fresh[mode] = screening.joint_screen_all(index_set, sphere, mode)
            if "standard" in fresh:
                std = fresh["standard"].screened
                for mode in ("sphere", "dome"):
                    if mode in fresh and np.any(fresh[mode].screened & ~std):
                        result.dominance_violations += 1
            for mode in modes:
                acc = accumulated[mode].union_with(fresh[mode])
                if zero_count:
                    rate = int(np.count_nonzero(acc.screened & zeros_ref)) / zero_count
                    result.grids[mode].record(
                        col, state.iteration, rate, acc.count, zero_count,
                        acc.inner_product_count,
                    )
            return None

        try:
            solved = solver.solve(
                problem,
                gap_tolerance=config.gap_tolerance,
                max_iters=config.max_iters_per_lambda,
                callback=callback,
                x0=warm,
            )
            warm = solved.x.x
        except solver.ConvergenceError as err:
            result.unconverged.append((float(lam), err.gap))
            warm = err.result.x.x
        for mode in modes:
            result.safety_violations += int(
                np.count_nonzero(accumulated[mode].screened & not_zero)
            )
    return result


CSV_COLUMNS = (
    "mode",
    "lambda",
    "neg_log10_lambda_ratio",
    "iteration",
    "detection_rate",
    "screened_count",
    "true_zero_count",
    "inner_products",
)


def emit_csv(grid: DetectionGrid, path) -> None:
    """Write the grid as UTF-8 CSV with a header row and '.' decimals."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in grid.rows():
            writer.writerow(
                [
                    row["mode"],
                    repr(row["lambda"]),
                    repr(row["neg_log10_lambda_ratio"]),
                    row["iteration"],
                    repr(row["detection_rate"]),
                    row["screened_count"],
                    row["true_zero_count"],
                    row["inner_products"],
                ]
            )


def load_detection_csv(path):
    """Parse an emit_csv file back into a list of cell dicts."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for rec in reader:
            out.append(
                {
                    "mode": rec["mode"],
                    "lambda": float(rec["lambda"]),
                    "neg_log10_lambda_ratio": float(rec["neg_log10_lambda_ratio"]),
                    "iteration": int(rec["iteration"]),
                    "detection_rate": float(rec["detection_rate"]),
                    "screened_count": int(rec["screened_count"]),
                    "true_zero_count": int(rec["true_zero_count"]),
                    "inner_products": int(rec["inner_products"]),
                }
            )
    return out


_VIRIDIS = (
    (0.000, (68, 1, 84)),
    (0.125, (72, 40, 120)),
    (0.250, (62, 74, 137)),
    (0.375, (49, 104, 142)),
    (0.500, (38, 130, 142)),
    (0.625, (31, 158, 137)),
    (0.750, (53, 183, 121)),
    (0.875, (109, 205, 89)),
    (1.000, (253, 231, 37)),
)


def rate_color(v: float) -> str:
    """Viridis-like hex color for a rate in [0, 1]."""
    v = min(1.0, max(0.0, float(v)))
    for (lo, c_lo), (hi, c_hi) in zip(_VIRIDIS, _VIRIDIS[1:]):
        if v <= hi:
            w = 0.0 if hi == lo else (v - lo) / (hi - lo)
            rgb = tuple(round(a + w * (b - a)) for a, b in zip(c_lo, c_hi))
            return "#{:02x}{:02x}{:02x}".format(*rgb)
    return "#{:02x}{:02x}{:02x}".format(*_VIRIDIS[-1][1])


def emit_heatmap(grid: DetectionGrid, path) -> None:
    """Render the grid as a static SVG heatmap.

    Horizontal axis: -log10(lambda / lambda_max), increasing rightward.
    Vertical axis: log10 of the iteration count, increasing upward.
    Unfilled cells are light gray.  Cells carry id="c{row}_{col}".
    """
    cell_w, cell_h = 16, 12
    left, top, right, bottom = 74, 30, 18, 52
    n_rows, n_cols = max(grid.n_rows, 1), max(grid.n_cols, 1)
    width = left + n_cols * cell_w + right
    height = top + n_rows * cell_h + bottom
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="18" font-family="sans-serif" font-size="13">'
        f"detection rate ({grid.mode})</text>",
    ]
    for row in range(grid.n_rows):
        y = top + (grid.n_rows - 1 - row) * cell_h
        for col in range(grid.n_cols):
            x = left + col * cell_w
            if grid.iteration[row, col] >= 0:
                fill = rate_color(grid.rate[row, col])
            else:
                fill = "#f0f0f0"
            parts.append(
                f'<rect id="c{row}_{col}" x="{x}" y="{y}" width="{cell_w}" '
                f'height="{cell_h}" fill="{fill}"/>'
            )
    axis_y = top + grid.n_rows * cell_h
    parts.append(
        f'<text x="{left + n_cols * cell_w / 2:.1f}" y="{axis_y + 34}" '
        'font-family="sans-serif" font-size="12" text-anchor="middle">'
        "-log10(lambda / lambda_max)</text>"
    )
    parts.append(
        f'<text x="16" y="{top + n_rows * cell_h / 2:.1f}" font-family="sans-serif" '
        f'font-size="12" text-anchor="middle" transform="rotate(-90 16 {top + n_rows * cell_h / 2:.1f})">'
        "log10(iterations)</text>"
    )
    if grid.n_cols:
        ticks = sorted({0, grid.n_cols // 2, grid.n_cols - 1})
        for col in ticks:
            x = left + col * cell_w + cell_w / 2
            parts.append(
                f'<text x="{x:.1f}" y="{axis_y + 16}" font-family="sans-serif" '
                f'font-size="10" text-anchor="middle">{grid.neg_log10_ratios[col]:.2f}</text>'
            )
    for decade in range(0, 1 + grid.n_rows // max(grid.buckets_per_decade, 1)):
        row = decade * grid.buckets_per_decade
        if row >= grid.n_rows:
            break
        y = top + (grid.n_rows - 1 - row) * cell_h + cell_h / 2
        parts.append(
            f'<text x="{left - 8}" y="{y:.1f}" font-family="sans-serif" font-size="10" '
            f'text-anchor="end">{decade}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
