"""Active subspace vs nonlinear level-set reduction: inactive-direction
sensitivity and reduced-surface R2 on a held-out set."""
import argparse

import numpy as np

from nargpas import benchmarks, gp
from nargpas.active_subspace import as_response_surface
from nargpas.harness import r2_score
from nargpas.nll import NllConfig, inactive_sensitivity, nll_response_surface, train_nll
from nargpas.sampling import SamplerSpec, sample


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("benchmark", nargs="?", default="paraboloid", choices=sorted(benchmarks.BENCHMARKS))
    p.add_argument("-n", type=int, default=100)
    p.add_argument("--epochs", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    bench = benchmarks.get(args.benchmark)
    train = bench.dataset(sample(SamplerSpec("lhs", args.n, bench.box, args.seed)))
    test = bench.dataset(sample(SamplerSpec("lhs", 1000, bench.box, args.seed + 1)))

    reducer, as_model = as_response_surface(train, active_dim=1, box=bench.box)
    r2_as = r2_score(test.outputs, gp.predict(as_model, reducer.transform(test.inputs), full_cov=False)[0])

    net = train_nll(train, NllConfig(epochs=args.epochs, seed=args.seed), box=bench.box)
    nll_reducer, nll_model = nll_response_surface(net, train, box=bench.box)
    r2_nll = r2_score(test.outputs,
                      gp.predict(nll_model, nll_reducer.transform(test.inputs), full_cov=False)[0])
    unit = train.normalized(bench.box)
    print(f"active subspace   R2 {r2_as:.4f}")
    print(f"level-set network R2 {r2_nll:.4f}  inactive sensitivity "
          f"{inactive_sensitivity(net, unit.inputs, unit.gradients):.3e}")
    print("eigenvalues:", np.array2string(reducer.decomposition.eigenvalues, precision=3))


if __name__ == "__main__":
    main()
