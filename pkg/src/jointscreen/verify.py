"""Self-check suite behind the `verify` CLI subcommand.

Each check pits a library code path against an independent brute-force
reference at desk scale and reports pass/fail with a short detail
string.  `deep=True` switches to acceptance-grade sample counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import core, oracle, regions, screening, solver
from .core import Observation, Problem, unit_normalize
from .harness import ExperimentConfig, generate_clustered_dictionary, generate_observation
from .oracle import OracleConfig
from .regions import DomeRegion, SphereRegion, UnitVectorSet
from .solver import SafeSphere


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_sphere(rng, m):
    center = rng.normal(size=m)
    tau = rng.uniform(-0.5, 1.0) * min(1.0, float(np.linalg.norm(center)))
    return SafeSphere(center=center, tau=tau)


def check_region_maxima(rng, pairs=40, samples=200_000, tol=2e-3) -> CheckResult:
    worst = 0.0
    for k in range(pairs):
        m = int(rng.choice([2, 3, 5]))
        c = rng.normal(size=m) * rng.uniform(0.2, 1.5)
        t = rng.normal(size=m)
        t /= np.linalg.norm(t)
        cfg = OracleConfig(sample_count=samples, seed=1000 + k)
        if k % 2 == 0:
            region = SphereRegion(t=t * rng.uniform(0.2, 1.2), eps=float(rng.uniform(0.0, 1.0)))
            closed = regions.sphere_region_max(region, c)
        else:
            region = DomeRegion(t=t, delta=float(rng.uniform(-1.0, 1.0)))
            closed = regions.dome_region_max(region, c)
        brute = oracle.region_max_bruteforce(region, c, cfg)
        if brute > closed + 1e-12:
            return CheckResult(
                "region-maxima", False, f"sampled max {brute!r} exceeds closed form {closed!r}"
            )
        worst = max(worst, closed - brute)
    ok = worst <= tol
    return CheckResult("region-maxima", ok, f"worst closed-minus-sampled gap {worst:.2e} (tol {tol:g})")


def check_threshold_tightness(rng, cases=100, tol=1e-9) -> CheckResult:
    worst = 0.0
    for _ in range(cases):
        m = int(rng.choice([2, 3, 5]))
        t = rng.normal(size=m)
        t /= np.linalg.norm(t)
        c = rng.normal(size=m) * rng.uniform(0.3, 1.5)
        norm_c = float(np.linalg.norm(c))
        sphere = SafeSphere(center=c, tau=float(rng.uniform(-0.3, 1.0)) * min(1.0, norm_c))
        eps_star = screening.eps_threshold(t, sphere)
        lo, hi = eps_star - 1.0, eps_star + 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if float(t @ c) < sphere.tau - mid * norm_c:
                lo = mid
            else:
                hi = mid
        worst = max(worst, abs(0.5 * (lo + hi) - eps_star))
        tc = float(t @ c)
        if tc < sphere.tau and sphere.tau <= norm_c:
            delta_star = screening.delta_threshold(t, sphere)
            lo, hi = -1.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if regions.dome_region_max(DomeRegion(t=t, delta=mid), c) < sphere.tau:
                    hi = mid
                else:
                    lo = mid
            worst = max(worst, abs(0.5 * (lo + hi) - delta_star))
    ok = worst <= tol
    return CheckResult("threshold-tightness", ok, f"worst flip-point error {worst:.2e} (tol {tol:g})")


def check_dome_in_sphere(rng, sets=50, samples=20_000, tol=1e-9) -> CheckResult:
    worst = 0.0
    for k in range(sets):
        m = int(rng.choice([2, 3, 5, 10]))
        size = int(rng.integers(2, 21))
        axis = rng.normal(size=m)
        axis /= np.linalg.norm(axis)
        spread = rng.uniform(0.05, 0.9)
        vecs = axis + spread * rng.normal(size=(size, m))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        uset = UnitVectorSet(vecs)
        sphere = regions.min_enclosing_sphere(uset)
        sampler = np.random.default_rng([17, k])
        try:
            dome = regions.min_enclosing_dome(uset)
        except regions.DegenerateDomeError as err:
            dome = DomeRegion(t=err.t_hint, delta=err.delta)
            points = oracle.sample_dome(dome, samples, sampler, surface_only=False)
            excess = float(np.linalg.norm(points, axis=1).max()) - 1.0
            worst = max(worst, excess)
            continue
        points = oracle.sample_dome(dome, samples, sampler, surface_only=False)
        dist = np.linalg.norm(points - sphere.t, axis=1)
        worst = max(worst, float(dist.max()) - sphere.eps)
    ok = worst <= tol
    return CheckResult("dome-inside-sphere", ok, f"worst containment excess {worst:.2e} (tol {tol:g})")


def check_concave_envelope(rng, grid=10_000, a_count=20) -> CheckResult:
    xi = np.linspace(-1.0, 1.0, grid)
    worst_increase = -math.inf
    for _ in range(a_count):
        a = float(rng.uniform(-0.999, 0.999))
        vals = np.array([regions.concave_aux_g(a, x) for x in xi])
        worst_increase = max(worst_increase, float(np.diff(vals).max()))
        inner = xi[(xi >= a + 1e-3) & (xi <= 1.0 - 1e-3)]
        if inner.size >= 2:
            seg = np.array([regions.concave_aux_g(a, x) for x in inner])
            if not np.all(np.diff(seg) < 0):
                return CheckResult("concave-envelope", False, f"g not strictly decreasing for a={a!r}")
        h = 1e-4
        mid = xi[(xi > -0.999) & (xi < 0.999)][:: max(1, grid // 200)]
        f = lambda x: a * x + math.sqrt(1 - a * a) * math.sqrt(1 - x * x)
        curv = np.array([f(x + h) + f(x - h) - 2 * f(x) for x in mid])
        if curv.max() > 1e-10:
            return CheckResult("concave-envelope", False, f"f not concave for a={a!r}")
    ok = worst_increase <= 1e-12
    return CheckResult("concave-envelope", ok, f"max forward difference of g {worst_increase:.2e}")


def check_index_equivalence(rng, instances=30) -> CheckResult:
    for k in range(instances):
        m = int(rng.integers(3, 12))
        n = int(rng.integers(5, 60))
        dictionary = unit_normalize(rng.normal(size=(m, n)))
        t = dictionary.column(int(rng.integers(n))).copy()
        sphere = _random_sphere(rng, m)
        index = screening.build_group_index(dictionary, t)
        fast = screening.screen_by_sphere_index(index, sphere, screening.ScreenMask.empty(n))
        naive = oracle.exhaustive_sphere_region_screen(dictionary, t, sphere)
        if not np.array_equal(fast.screened, naive.screened):
            return CheckResult("sorted-index-equivalence", False, f"sphere mismatch on instance {k}")
        fast = screening.screen_by_dome_index(index, sphere, screening.ScreenMask.empty(n))
        naive = oracle.exhaustive_dome_region_screen(dictionary, t, sphere)
        if not np.array_equal(fast.screened, naive.screened):
            return CheckResult("sorted-index-equivalence", False, f"dome mismatch on instance {k}")
    return CheckResult("sorted-index-equivalence", True, f"{instances} random instances matched")


def check_screening_safety(rng, instances=5, lambdas=5) -> CheckResult:
    violations = 0
    spheres = 0
    for k in range(instances):
        m, n, s = 15, 60, 4
        dictionary = unit_normalize(rng.normal(size=(m, n)))
        support = rng.choice(n, size=s, replace=False)
        y = dictionary.atoms[:, support] @ rng.standard_normal(s)
        observation = Observation(y)
        try:
            lam_top = core.lambda_max(dictionary, observation)
        except core.LambdaMaxUndefinedError:
            continue
        seeds = [dictionary.column(int(i)).copy() for i in rng.choice(n, size=6, replace=False)]
        indices = screening.GroupIndexSet(
            [screening.build_group_index(dictionary, t) for t in seeds]
        )
        for frac in np.logspace(0, -1.5, lambdas):
            problem = Problem(dictionary, observation, float(frac * lam_top))
            union = screening.ScreenMask.empty(n)

            def callback(state, sphere):
                union.union_with(screening.standard_screen(dictionary, sphere))
                union.union_with(screening.joint_screen_all(indices, sphere, "sphere"))
                union.union_with(screening.joint_screen_all(indices, sphere, "dome"))
                return None

            try:
                solver.solve(problem, gap_tolerance=1e-10, max_iters=5000, callback=callback)
            except solver.ConvergenceError:
                pass
            x_ref = oracle.reference_solve(problem, 1e-12)
            violations += int(np.count_nonzero(union.screened & (x_ref.x > 1e-7)))
            spheres += 1
    ok = violations == 0
    return CheckResult("screening-safety", ok, f"{violations} violations over {spheres} solves")


def check_complexity_counters(rng) -> CheckResult:
    config = ExperimentConfig(
        m=20, n=120, clusters=12, atoms_per_cluster=10, sparsity=4,
        lambda_grid_points=3, rng_seed=7,
    )
    dictionary, seeds = generate_clustered_dictionary(config)
    observation, _ = generate_observation(dictionary, config)
    lam_top = core.lambda_max(dictionary, observation)
    problem = Problem(dictionary, observation, 0.5 * lam_top)
    res = solver.solve(problem, gap_tolerance=1e-8, max_iters=5000)
    indices = screening.GroupIndexSet(
        [screening.build_group_index(dictionary, t) for t in seeds]
    )
    std = screening.standard_screen(dictionary, res.sphere)
    joint = screening.joint_screen_all(indices, res.sphere, "dome")
    ok = std.inner_product_count == config.n and joint.inner_product_count == config.clusters
    return CheckResult(
        "complexity-counters",
        ok,
        f"standard={std.inner_product_count} (n={config.n}), "
        f"joint={joint.inner_product_count} (L={config.clusters})",
    )


def run_verification(deep: bool = False, seed: int = 0):
    rng = np.random.default_rng(seed)
    if deep:
        checks = [
            check_region_maxima(rng, pairs=120, samples=1_000_000, tol=1e-3),
            check_threshold_tightness(rng, cases=500),
            check_dome_in_sphere(rng, sets=200, samples=100_000),
            check_concave_envelope(rng, a_count=100),
            check_index_equivalence(rng, instances=100),
            check_screening_safety(rng, instances=10),
            check_complexity_counters(rng),
        ]
    else:
        checks = [
            check_region_maxima(rng),
            check_threshold_tightness(rng),
            check_dome_in_sphere(rng),
            check_concave_envelope(rng),
            check_index_equivalence(rng),
            check_screening_safety(rng),
            check_complexity_counters(rng),
        ]
    return checks
