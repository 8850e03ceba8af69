"""Command-line interface.

Subcommands:
  generate  write a clustered dictionary/observation instance to disk
  solve     solve one lam and print the support and certified gap
  bench     run the lam-path screening benchmark (CSV + SVG per mode)
  verify    run the brute-force self-check suite

Exit codes: 0 success, 1 usage error, 2 verification failure,
3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import core, data_io, harness, solver, verify
from .core import Problem
from .harness import ExperimentConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2
EXIT_NONCONVERGED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


_FLAG_TO_FIELD = {
    "m": "m",
    "n": "n",
    "clusters": "clusters",
    "coherence": "seed_coherence",
    "sparsity": "sparsity",
    "decades": "lambda_decades",
    "grid_points": "lambda_grid_points",
    "mode": "mode",
    "seed": "rng_seed",
    "max_iters": "max_iters_per_lambda",
    "gap_tol": "gap_tolerance",
}


def _add_config_flags(parser):
    parser.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    parser.add_argument("--m", type=int, help="observation dimension")
    parser.add_argument("--n", type=int, help="number of atoms")
    parser.add_argument("--clusters", type=int, help="number of clusters L")
    parser.add_argument("--coherence", type=float, help="minimum inner product with the cluster seed")
    parser.add_argument("--sparsity", type=int, help="number of active columns in the observation")
    parser.add_argument("--decades", type=float, help="lam path length in decades below lambda_max")
    parser.add_argument("--grid-points", dest="grid_points", type=int, help="number of lam values")
    parser.add_argument("--mode", choices=harness.MODES, help="screening mode")
    parser.add_argument("--seed", type=int, help="RNG seed")
    parser.add_argument("--max-iters", dest="max_iters", type=int, help="iteration budget per lam")
    parser.add_argument("--gap-tol", dest="gap_tol", type=float, help="duality-gap stopping tolerance")


def build_config(args, parser) -> ExperimentConfig:
    """Defaults, overridden by --config JSON, overridden by explicit flags."""
    valid = {f.name for f in fields(ExperimentConfig)}
    data = {}
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            parser.error(f"--config: {err}")
        if not isinstance(loaded, dict):
            parser.error("--config: expected a JSON object")
        unknown = set(loaded) - valid
        if unknown:
            parser.error(f"--config: unknown fields {sorted(unknown)}")
        data.update(loaded)
    for flag, field_name in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[field_name] = value
    if "atoms_per_cluster" not in data:
        n = data.get("n", ExperimentConfig.n)
        clusters = data.get("clusters", ExperimentConfig.clusters)
        if n % clusters:
            parser.error(f"n = {n} is not divisible by clusters = {clusters}")
        data["atoms_per_cluster"] = n // clusters
    try:
        return ExperimentConfig(**data)
    except (TypeError, ValueError) as err:
        parser.error(str(err))


def _cmd_generate(args, parser) -> int:
    config = build_config(args, parser)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dictionary, seeds = harness.generate_clustered_dictionary(config)
    observation, support = harness.generate_observation(dictionary, config)
    formats = {"csv": (False, ".csv"), "binary": (True, ".bin")}
    chosen = list(formats.items()) if args.format == "both" else [(args.format, formats[args.format])]
    for _, (binary, ext) in chosen:
        data_io.save_dictionary(out_dir / f"dictionary{ext}", dictionary, binary=binary)
        data_io.save_observation(out_dir / f"observation{ext}", observation, binary=binary)
        (data_io.save_matrix_binary if binary else data_io.save_matrix_csv)(
            out_dir / f"seeds{ext}", seeds.T
        )
    meta = {
        "m": config.m,
        "n": config.n,
        "clusters": config.clusters,
        "support": [int(i) for i in support],
        "lambda_max": core.lambda_max(dictionary, observation),
        "rng_seed": config.rng_seed,
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    print(f"wrote dictionary ({config.m}x{config.n}), observation, seeds to {out_dir}")
    return EXIT_OK


def _cmd_solve(args, parser) -> int:
    dictionary = data_io.load_dictionary(args.dictionary)
    observation = data_io.load_observation(args.observation)
    if (args.lam is None) == (args.lam_ratio is None):
        parser.error("provide exactly one of --lam / --lam-ratio")
    lam = args.lam if args.lam is not None else args.lam_ratio * core.lambda_max(dictionary, observation)
    problem = Problem(dictionary, observation, lam)
    trace_rows = []

    def callback(state, sphere):
        if args.trace:
            trace_rows.append(
                (state.iteration, solver.duality_gap(problem, state.x, sphere.center),
                 core.primal_objective(problem, state.x))
            )
        return None

    try:
        result = solver.solve(
            problem,
            gap_tolerance=args.gap_tol,
            max_iters=args.max_iters,
            callback=callback if args.trace else None,
        )
    except solver.ConvergenceError as err:
        print(f"did not converge: gap {err.gap:.3e} after {err.iterations} iterations", file=sys.stderr)
        return EXIT_NONCONVERGED
    finally:
        if args.trace:
            with open(args.trace, "w", encoding="utf-8") as fh:
                fh.write("iteration,gap,objective\n")
                for it, gap, obj in trace_rows:
                    fh.write(f"{it},{gap!r},{obj!r}\n")
    support = np.flatnonzero(result.x.x > 0)
    print(f"lam = {float(lam)!r}")
    print(f"converged in {result.iterations} iterations, gap = {result.gap:.3e}")
    print(f"support ({support.size} atoms): {' '.join(map(str, support))}")
    for i in support:
        print(f"  x[{i}] = {float(result.x.x[i])!r}")
    return EXIT_OK


def _cmd_bench(args, parser) -> int:
    config = build_config(args, parser)
    modes = tuple(dict.fromkeys(args.modes.split(","))) if args.modes else (config.mode,)
    for mode in modes:
        if mode not in harness.MODES:
            parser.error(f"unknown mode {mode!r} (valid: {', '.join(harness.MODES)})")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = harness.run_experiment(config, modes=modes)
    for mode in modes:
        grid = result.grids[mode]
        harness.emit_csv(grid, out_dir / f"detection_{mode}.csv")
        harness.emit_heatmap(grid, out_dir / f"heatmap_{mode}.svg")
    summary = {
        "lambda_max": result.lam_max,
        "modes": list(modes),
        "safety_violations": result.safety_violations,
        "dominance_violations": result.dominance_violations,
        "lemma3_min_margin": None
        if result.lemma3_min_margin == float("inf")
        else result.lemma3_min_margin,
        "unconverged": [{"lambda": lam, "gap": gap} for lam, gap in result.unconverged],
        "reference_failures": [
            {"lambda": lam, "gap": gap} for lam, gap in result.reference_failures
        ],
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {', '.join(f'detection_{m}.csv / heatmap_{m}.svg' for m in modes)} to {out_dir}")
    if result.safety_violations or result.dominance_violations:
        print(
            f"AUDIT FAILURE: {result.safety_violations} safety, "
            f"{result.dominance_violations} dominance violations",
            file=sys.stderr,
        )
        return EXIT_VERIFY
    if result.unconverged or result.reference_failures:
        for lam, gap in result.unconverged + result.reference_failures:
            print(f"non-converged at lam={lam!r} (gap {gap:.3e})", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _cmd_verify(args, parser) -> int:
    checks = verify.run_verification(deep=args.deep, seed=args.seed if args.seed is not None else 0)
    failed = 0
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        failed += not check.passed
        print(f"{status}  {check.name}: {check.detail}")
    if failed:
        print(f"{failed} of {len(checks)} checks failed", file=sys.stderr)
        return EXIT_VERIFY
    print(f"all {len(checks)} checks passed")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _Parser(prog="jointscreen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_gen = sub.add_parser("generate", help="write a synthetic instance to disk")
    _add_config_flags(p_gen)
    p_gen.add_argument("--out-dir", required=True, help="output directory")
    p_gen.add_argument("--format", choices=("csv", "binary", "both"), default="both")
    p_gen.set_defaults(func=_cmd_generate)

    p_solve = sub.add_parser("solve", help="solve a single lam and print the support")
    p_solve.add_argument("--dictionary", required=True, help="dictionary file (.csv or .bin)")
    p_solve.add_argument("--observation", required=True, help="observation file (.csv or .bin)")
    p_solve.add_argument("--lam", type=float, help="regularization weight")
    p_solve.add_argument("--lam-ratio", dest="lam_ratio", type=float,
                         help="lam as a fraction of lambda_max")
    p_solve.add_argument("--gap-tol", dest="gap_tol", type=float, default=1e-8)
    p_solve.add_argument("--max-iters", dest="max_iters", type=int, default=10_000)
    p_solve.add_argument("--trace", help="write per-iteration (iteration,gap,objective) CSV here")
    p_solve.set_defaults(func=_cmd_solve)

    p_bench = sub.add_parser("bench", help="run the lam-path screening benchmark")
    _add_config_flags(p_bench)
    p_bench.add_argument("--out-dir", required=True, help="output directory")
    p_bench.add_argument("--modes", help="comma-separated list overriding --mode, e.g. standard,dome")
    p_bench.set_defaults(func=_cmd_bench)

    p_verify = sub.add_parser("verify", help="run the brute-force self-check suite")
    p_verify.add_argument("--deep", action="store_true", help="acceptance-grade sample counts")
    p_verify.add_argument("--seed", type=int, help="RNG seed for the checks")
    p_verify.set_defaults(func=_cmd_verify)

    args = parser.parse_args(argv)
    return args.func(args, parser)


if __name__ == "__main__":
    sys.exit(main())
