"""Multi-fidelity response surfaces whose low-fidelity level is synthesised
from the high-fidelity data through a reduced-input GP surrogate."""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import gp, nargp
from .active_subspace import LinearReducer, active_subspace, estimate_gradients
from .core import Box, Dataset
from .gp import GpModel
from .nargp import MfModel
from .nll import NllConfig, NllReducer, train_nll
from .sampling import SamplerSpec, sample

log = logging.getLogger(__name__)

REDUCERS = ("AS", "NLL")


class PipelineError(RuntimeError):
    def __init__(self, step: int, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")


@dataclass
class PipelineConfig:
    reducer: str = "AS"
    n_lf_extra: int = 100
    lf_sampler: str = "uniform"
    noise_lf: str = "zero"
    noise_hf: str = "zero"
    # a noiseless reduced surface reproduces y^H at the HF inputs, which leaves
    # the top level nothing to learn beyond the identity in f_L
    noise_surface: str = "free"
    restarts_surface: int = 10
    restarts_mf: int = 20
    mc_samples: int = 200
    seed: int = 0
    active_dim: int | None = None
    k_neighbors: int | None = None
    box: Box | None = None
    nll: NllConfig = field(default_factory=NllConfig)
    n_fictitious: int = 200

    def __post_init__(self):
        self.reducer = self.reducer.upper()
        if self.reducer not in REDUCERS:
            raise ValueError(f"reducer must be one of {REDUCERS}")
        if self.n_lf_extra < 0 or self.n_fictitious < 0:
            raise ValueError("sample counts must be nonnegative")
        for policy in (self.noise_lf, self.noise_hf, self.noise_surface):
            if policy not in gp.NOISE_POLICIES:
                raise ValueError(f"noise policy must be one of {gp.NOISE_POLICIES}")
        if min(self.restarts_surface, self.restarts_mf, self.mc_samples) < 1:
            raise ValueError("restarts and mc_samples must be positive")
        if isinstance(self.box, dict):
            self.box = Box.from_dict(self.box)
        if isinstance(self.nll, dict):
            self.nll = NllConfig(**self.nll)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["box"] = None if self.box is None else self.box.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> PipelineConfig:
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> PipelineConfig:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ResponseSurface:
    """A GP on reduced coordinates; predicts from full raw inputs."""

    reducer: LinearReducer | NllReducer
    gp: GpModel

    def predict(self, x):
        return gp.predict(self.gp, self.reducer.transform(x), full_cov=False)

    def to_dict(self) -> dict:
        return {"reducer": self.reducer.to_dict(), "gp": self.gp.to_dict()}

    @classmethod
    def from_dict(cls, d) -> ResponseSurface:
        r = d["reducer"]
        reducer = LinearReducer.from_dict(r) if r["kind"] == "AS" else NllReducer.from_dict(r)
        return cls(reducer, GpModel.from_dict(d["gp"]))


@dataclass(frozen=True, eq=False)
class Design:
    """Everything produced by one run: reduced surrogate, datasets, MF model."""

    surface: ResponseSurface
    low: Dataset
    high: Dataset
    model: MfModel


def _seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def fit_surface(hf: Dataset, config: PipelineConfig, seed: int) -> ResponseSurface:
    """Reduce the input space with the HF gradients (step 1) and fit the
    reduced GP (step 2)."""
    s_red, s_gp = _seeds(seed, 2)
    try:
        if config.reducer == "AS":
            dec = active_subspace(hf, config.box, config.active_dim, config.k_neighbors)
            r = dec.active_dim
            if r >= hf.dim:
                raise ValueError(f"active dimension {r} gives no reduction of {hf.dim} inputs")
            reducer = LinearReducer(dec.W1, config.box, dec)
        else:
            data = hf
            if not data.has_gradients:
                if config.box is not None:
                    g = estimate_gradients(hf.normalized(config.box), config.k_neighbors)
                    g = g / (0.5 * (config.box.upper - config.box.lower))
                else:
                    g = estimate_gradients(hf, config.k_neighbors)
                data = Dataset(hf.inputs, hf.outputs, g)
            nll_cfg = NllConfig(**{**asdict(config.nll), "seed": s_red})
            reducer = NllReducer(train_nll(data, nll_cfg, box=config.box), config.box)
    except Exception as exc:
        raise PipelineError(1, exc) from exc
    try:
        surf = gp.fit(reducer.transform(hf.inputs), hf.outputs, noise=config.noise_surface,
                      n_restarts=config.restarts_surface, seed=s_gp)
    except Exception as exc:
        raise PipelineError(2, exc) from exc
    return ResponseSurface(reducer, surf)


def sample_extra(n: int, box: Box | None, hf: Dataset, kind: str, seed: int) -> np.ndarray:
    if n == 0:
        return np.empty((0, hf.dim))
    if box is None:
        box = Box(hf.inputs.min(0), hf.inputs.max(0))
    return sample(SamplerSpec(kind, n, box, seed))


def build_lowfidelity(hf: Dataset, surface: ResponseSurface, extra_inputs) -> Dataset:
    """S^L: HF inputs followed by the extra inputs, outputs predicted by the surface."""
    extra = np.asarray(extra_inputs, dtype=float).reshape(-1, hf.dim)
    box = getattr(surface.reducer, "box", None)
    if box is not None and extra.size and not np.all(box.contains(extra)):
        warnings.warn("extra low-fidelity inputs outside the box; the reducer extrapolates",
                      RuntimeWarning, stacklevel=2)
    inputs = np.vstack([hf.inputs, extra])
    mean, _ = surface.predict(inputs)
    return Dataset(inputs, mean)


def design_nargp(hf: Dataset, config: PipelineConfig) -> Design:
    """Reduce, fit the reduced surface, synthesise S^L, train LF and HF levels."""
    s_surf, s_extra, s_mf = _seeds(config.seed, 3)
    surface = fit_surface(hf, config, s_surf)
    try:
        extra = sample_extra(config.n_lf_extra, config.box, hf, config.lf_sampler, s_extra)
        low = build_lowfidelity(hf, surface, extra)
    except Exception as exc:
        raise PipelineError(3, exc) from exc
    try:
        model = nargp.train([low, hf], noise=[config.noise_lf, config.noise_hf],
                            restarts=config.restarts_mf, seed=s_mf,
                            mc_samples=config.mc_samples, box=config.box)
    except nargp.LevelFitError as exc:
        raise PipelineError(3 + exc.level, exc) from exc
    except Exception as exc:
        raise PipelineError(4, exc) from exc
    return Design(surface, low, hf, model)


def run_nargp_as(hf: Dataset, config: PipelineConfig) -> MfModel:
    return design_nargp(hf, config).model


def design_reversed(hf: Dataset, config: PipelineConfig, surface: ResponseSurface | None = None,
                    hf_gp: GpModel | None = None) -> Design:
    """Fidelities swapped: the reduced surface is the top level.

    Both levels share ``n_fictitious`` uniform inputs; the top level holds the
    reduced-surface values at HF inputs plus those points, the bottom level the
    HF outputs plus full-space HF-GP predictions at the shared and extra inputs.
    """
    s_surf, s_fict, s_extra, s_hf, s_mf = _seeds(config.seed, 5)
    box = config.box
    data = hf.normalized(box) if box is not None else hf
    if surface is None:
        surface = fit_surface(hf, config, s_surf)
    if hf_gp is None:
        hf_gp = gp.fit(data.inputs, data.outputs, noise=config.noise_hf,
                       n_restarts=config.restarts_surface, seed=s_hf)
    fict = sample_extra(config.n_fictitious, box, hf, "uniform", s_fict)
    extra = sample_extra(config.n_lf_extra, box, hf, config.lf_sampler, s_extra)

    def hf_predict(x):
        x = box.to_reference(x) if box is not None else x
        return gp.predict(hf_gp, x, full_cov=False)[0]

    top_inputs = np.vstack([hf.inputs, fict])
    top = Dataset(top_inputs, surface.predict(top_inputs)[0])
    shared_extra = np.vstack([fict, extra])
    bottom = Dataset(np.vstack([hf.inputs, shared_extra]),
                     np.concatenate([hf.outputs, hf_predict(shared_extra)]))
    model = nargp.train([bottom, top], noise=[config.noise_hf, config.noise_lf],
                        restarts=config.restarts_mf, seed=s_mf,
                        mc_samples=config.mc_samples, box=box)
    return Design(surface, bottom, top, model)


def run_reversed(hf: Dataset, config: PipelineConfig) -> MfModel:
    return design_reversed(hf, config).model
