"""MF vs single-fidelity R2 sweep on a built-in benchmark.

    python3 scripts/benchmark_study.py piston --out results/piston
    python3 scripts/benchmark_study.py ebola --grid 50 60 70 80 90 100 --cv leave_two_out
"""
import argparse
import logging

from nargpas import benchmarks
from nargpas.harness import StudyConfig, run_study
from nargpas.pipeline import PipelineConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("benchmark", choices=sorted(benchmarks.BENCHMARKS))
    p.add_argument("--grid", type=int, nargs="+", default=[50, 60, 70, 80, 90, 100])
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--n-lf-extra", type=int, default=100)
    p.add_argument("--reducer", choices=["AS", "NLL"], default="AS")
    p.add_argument("--test-size", type=int, default=1000)
    p.add_argument("--cv", choices=["none", "leave_one_out", "leave_two_out"], default="none")
    p.add_argument("--reversed", action="store_true", help="also train the swapped-fidelity model")
    p.add_argument("--out", default=None)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = StudyConfig(benchmark=args.benchmark, grid=args.grid, outer_restarts=args.restarts,
                      test_size=args.test_size, cv=args.cv, reversed=args.reversed,
                      pipeline=PipelineConfig(reducer=args.reducer, n_lf_extra=args.n_lf_extra),
                      output_dir=args.out)
    result = run_study(cfg)
    models = ["MF", "HF", "LF"] + (["MF_reversed"] if args.reversed else [])
    print("n_hf  " + "  ".join(f"{m:>12}" for m in models))
    for v in args.grid:
        row = [result.aggregate(m, v)["mean"] for m in models]
        print(f"{v:<5} " + "  ".join(f"{x:12.4f}" if x is not None else f"{'failed':>12}" for x in row))


if __name__ == "__main__":
    main()
