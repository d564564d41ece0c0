"""Design-of-experiments generators over a Box."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .core import Box

KINDS = ("lhs", "sobol", "uniform")


@dataclass(frozen=True, eq=False)
class SamplerSpec:
    kind: str
    n: int
    box: Box
    seed: int | None = 0
    sobol_skip: int = 1

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ValueError(f"sampler kind must be one of {KINDS}")
        if self.n < 1 or self.sobol_skip < 0:
            raise ValueError("need n >= 1 and sobol_skip >= 0")
        object.__setattr__(self, "kind", kind)


def latin_hypercube(n: int, m: int, rng) -> np.ndarray:
    """One point per stratum [i/n, (i+1)/n) in every coordinate, strata
    permuted independently per coordinate, uniformly jittered within."""
    u = np.empty((n, m))
    for j in range(m):
        u[:, j] = (rng.permutation(n) + rng.uniform(size=n)) / n
    # a jitter of exactly 1.0 - eps can round onto the next stratum edge
    return np.minimum(u, np.nextafter((np.floor(u * n) + 1) / n, 0))


def sobol(n: int, m: int, skip: int = 1) -> np.ndarray:
    """Unscrambled Sobol points (Joe-Kuo direction numbers), dropping the first ``skip``."""
    eng = qmc.Sobol(d=m, scramble=False)
    if skip:
        eng.fast_forward(skip)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return eng.random(n)


def sample(spec: SamplerSpec) -> np.ndarray:
    m = spec.box.dim
    if spec.kind == "sobol":
        u = sobol(spec.n, m, spec.sobol_skip)
    else:
        rng = np.random.default_rng(spec.seed)
        u = latin_hypercube(spec.n, m, rng) if spec.kind == "lhs" else rng.uniform(size=(spec.n, m))
    return np.clip(spec.box.from_unit(u), spec.box.lower, spec.box.upper)
