"""Compare the standard ordering (reduced surface below the data) with the
swapped ordering on the 2D paraboloid, where both should be usable."""
import argparse

from nargpas.harness import StudyConfig, run_study
from nargpas.pipeline import PipelineConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--grid", type=int, nargs="+", default=[10, 20, 40])
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--out", default=None)
    args = p.parse_args()
    cfg = StudyConfig(benchmark="paraboloid", grid=args.grid, outer_restarts=args.restarts, test_size=500,
                      reversed=True, pipeline=PipelineConfig(n_lf_extra=50, n_fictitious=100),
                      output_dir=args.out)
    result = run_study(cfg)
    for v in args.grid:
        a, b = result.aggregate("MF", v), result.aggregate("MF_reversed", v)
        print(f"n_hf={v:<4} standard {a['mean']:.4f} [{a['min']:.4f}, {a['max']:.4f}]  "
              f"swapped {b['mean']:.4f} [{b['min']:.4f}, {b['max']:.4f}]")


if __name__ == "__main__":
    main()
