"""Nonlinear autoregressive multi-fidelity GP (NARGP).

Level 1 is a plain RBF-ARD GP on ``x``. Every level ``q > 1`` is a GP on the
augmented input ``(x, f_{q-1}(x))`` with the composite kernel. Training uses
the stored lower-fidelity outputs at the nested inputs; prediction propagates
the lower-level posterior by Monte Carlo.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import gp
from .core import Box, Dataset, HierarchyError, match_rows
from .gp import GpModel


class LevelFitError(gp.FitError):
    def __init__(self, level: int, cause: gp.FitError):
        self.level = level
        super().__init__(f"level {level}: {cause}", cause.diagnostics)


@dataclass(frozen=True, eq=False)
class MfModel:
    levels: tuple[GpModel, ...]
    mc_samples: int = 200
    seed: int = 0
    box: Box | None = None

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise ValueError("need at least one level")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be positive")
        m = self.levels[0].dim
        for q, lvl in enumerate(self.levels[1:], start=2):
            if lvl.family != "nargp" or lvl.dim != m + 1:
                raise ValueError(f"level {q} must be an autoregressive GP on {m + 1} inputs")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def dim(self) -> int:
        return self.levels[0].dim

    def with_mc_samples(self, mc_samples: int, seed: int | None = None) -> MfModel:
        return MfModel(self.levels, mc_samples, self.seed if seed is None else seed, self.box)

    def predict(self, test_inputs):
        mean, var, _ = predict_mc(self, test_inputs)
        return mean, var

    def to_dict(self) -> dict:
        return {
            "levels": [lvl.to_dict() for lvl in self.levels],
            "mc_samples": self.mc_samples,
            "seed": self.seed,
            "box": None if self.box is None else self.box.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> MfModel:
        box = None if d.get("box") is None else Box.from_dict(d["box"])
        return cls(tuple(GpModel.from_dict(x) for x in d["levels"]), d["mc_samples"], d["seed"], box)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> MfModel:
        return cls.from_dict(json.loads(text))


def _per_level(value, p: int, name: str) -> list:
    if isinstance(value, (list, tuple)):
        if len(value) != p:
            raise ValueError(f"{name} needs one entry per level ({p})")
        return list(value)
    return [value] * p


def augmented_inputs(datasets: Sequence[Dataset]) -> list[np.ndarray]:
    """Training inputs of each level, the previous-level outputs appended for q > 1.

    Raises HierarchyError naming the first high-fidelity row absent from the
    level below.
    """
    out = [np.asarray(datasets[0].inputs)]
    for q in range(1, len(datasets)):
        low, high = datasets[q - 1], datasets[q]
        idx = match_rows(low.inputs, high.inputs)
        missing = np.flatnonzero(idx < 0)
        if missing.size:
            raise HierarchyError(int(missing[0]), level=q + 1)
        out.append(np.hstack([high.inputs, low.outputs[idx][:, None]]))
    return out


def train(datasets: Sequence[Dataset], noise="zero", restarts=10, seed: int = 0,
          mc_samples: int = 200, box: Box | None = None) -> MfModel:
    """Fit every level by maximum likelihood, low fidelity first.

    ``noise`` and ``restarts`` are a single value or one per level. With ``box``
    the inputs are mapped to [-1, 1]^m before training (and at prediction).
    """
    datasets = list(datasets)
    if len(datasets) < 2:
        raise ValueError("a multi-fidelity model needs at least two datasets")
    m = datasets[0].dim
    if any(d.dim != m for d in datasets):
        raise ValueError("all fidelity levels must share the input dimension")
    if box is not None:
        datasets = [d.normalized(box) for d in datasets]
    p = len(datasets)
    noise = _per_level(noise, p, "noise")
    restarts = _per_level(restarts, p, "restarts")
    inputs = augmented_inputs(datasets)
    seeds = np.random.SeedSequence(seed).generate_state(p)
    levels = []
    for q in range(p):
        family = "rbf" if q == 0 else "nargp"
        try:
            levels.append(gp.fit(inputs[q], datasets[q].outputs, family=family, noise=noise[q],
                                 n_restarts=restarts[q], seed=int(seeds[q])))
        except gp.FitError as exc:
            raise LevelFitError(q + 1, exc) from exc
    return MfModel(tuple(levels), mc_samples, seed, box)


def _propagate(model: MfModel, test_inputs, top: int, mc_samples: int, seed):
    """Recursive Monte Carlo up to level ``top`` (1-based).

    Returns the particle-wise conditional means and variances of level ``top``
    (mc_samples x T each) and the generator positioned after the draws.
    """
    X = np.atleast_2d(np.asarray(test_inputs, dtype=float))
    if X.shape[1] != model.dim:
        raise ValueError(f"test inputs have {X.shape[1]} columns, model expects {model.dim}")
    if model.box is not None:
        X = model.box.to_reference(X)
    rng = np.random.default_rng(seed)
    m1, v1 = gp.predict(model.levels[0], X, full_cov=False)
    means = np.tile(m1, (mc_samples, 1))
    variances = np.tile(v1, (mc_samples, 1))
    for q in range(1, top):
        draws = means + np.sqrt(variances) * rng.standard_normal(means.shape)
        for s in range(mc_samples):
            aug = np.hstack([X, draws[s][:, None]])
            means[s], variances[s] = gp.predict(model.levels[q], aug, full_cov=False)
    return means, variances, rng


def _moments(means, variances):
    # law of total variance over particles
    return means.mean(0), variances.mean(0) + means.var(0)


def predict_mc(model: MfModel, test_inputs, mc_samples: int | None = None, seed=None):
    """Top-level predictive moments and samples (mc_samples x T).

    Each particle draws the lower-level posterior independently per test point
    and is pushed through the next level's Gaussian posterior. The returned
    mean and variance are the particle averages of the top-level conditional
    moments plus the spread of the conditional means.
    """
    S = model.mc_samples if mc_samples is None else mc_samples
    seed = model.seed if seed is None else seed
    means, variances, rng = _propagate(model, test_inputs, model.n_levels, S, seed)
    samples = means + np.sqrt(variances) * rng.standard_normal(means.shape)
    mean, var = _moments(means, variances)
    return mean, var, samples


def predict_level(model: MfModel, q: int, test_inputs, mc_samples: int | None = None, seed=None):
    """Predictive mean and variance at fidelity ``q`` (1-based)."""
    if not 1 <= q <= model.n_levels:
        raise ValueError(f"level {q} outside 1..{model.n_levels}")
    if q == 1:
        X = np.atleast_2d(np.asarray(test_inputs, dtype=float))
        if model.box is not None:
            X = model.box.to_reference(X)
        return gp.predict(model.levels[0], X, full_cov=False)
    S = model.mc_samples if mc_samples is None else mc_samples
    seed = model.seed if seed is None else seed
    means, variances, _ = _propagate(model, test_inputs, q, S, seed)
    return _moments(means, variances)
