"""Exact zero-mean Gaussian-process regression.

Hyperparameters are optimised in log space by L-BFGS with analytic gradients
of the log marginal likelihood, restarted from random initialisations.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .core import match_rows
from .kernels import (
    KernelParams,
    cross_matrix,
    diag,
    family_of,
    gram,
    gram_with_gradients,
    params_from_dict,
    params_from_log,
)

log = logging.getLogger(__name__)

JITTER = 1e-8
MAX_JITTER = 1e-2
NOISE_POLICIES = ("zero", "free")


class FactorizationError(np.linalg.LinAlgError):
    pass


class FitError(RuntimeError):
    def __init__(self, message: str, diagnostics: list[dict]):
        super().__init__(message)
        self.diagnostics = diagnostics


def cholesky_jitter(K: np.ndarray, base: float = JITTER) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K + jitter*mean(diag)*I``, escalating the
    relative jitter tenfold on failure. Returns (L, relative jitter used)."""
    scale = float(np.mean(np.diag(K)))
    if not np.isfinite(scale) or scale <= 0:
        raise FactorizationError("matrix has a nonpositive diagonal")
    c = base
    while c <= MAX_JITTER * (1 + 1e-12):
        try:
            L = linalg.cholesky(K + c * scale * np.eye(K.shape[0]), lower=True, check_finite=False)
            if np.all(np.isfinite(L)):
                return L, c
        except linalg.LinAlgError:
            pass
        c *= 10.0
    raise FactorizationError(f"not positive definite with relative jitter up to {MAX_JITTER:g}")


@dataclass(frozen=True, eq=False)
class GpModel:
    train_inputs: np.ndarray
    train_outputs: np.ndarray
    kernel_params: KernelParams
    noise_variance: float
    jitter: float
    chol: np.ndarray
    alpha: np.ndarray
    seed: int | None = None
    diagnostics: list = field(default_factory=list, repr=False)

    @property
    def family(self) -> str:
        return family_of(self.kernel_params)

    @property
    def dim(self) -> int:
        return self.train_inputs.shape[1]

    @property
    def jitter_value(self) -> float:
        return self.jitter * float(np.mean(diag(self.train_inputs, self.kernel_params)))

    def covariance(self) -> np.ndarray:
        """The factorised matrix K + (noise + jitter) I."""
        K = gram(self.train_inputs, self.kernel_params)
        return K + (self.noise_variance + self.jitter_value) * np.eye(K.shape[0])

    def log_marginal_likelihood(self) -> float:
        return log_marginal_likelihood(self)

    def predict(self, test_inputs, full_cov: bool = True):
        return predict(self, test_inputs, full_cov=full_cov)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": self.kernel_params.to_dict(),
            "noise_variance": self.noise_variance,
            "jitter": self.jitter,
            "train_inputs": self.train_inputs.tolist(),
            "train_outputs": self.train_outputs.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> GpModel:
        params = params_from_dict(d["family"], d["params"])
        return condition(
            np.array(d["train_inputs"], dtype=float),
            np.array(d["train_outputs"], dtype=float),
            params,
            noise_variance=d["noise_variance"],
            jitter=d["jitter"],
            seed=d.get("seed"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> GpModel:
        return cls.from_dict(json.loads(text))


def condition(inputs, outputs, params: KernelParams, noise_variance: float = 0.0,
              jitter: float = JITTER, seed=None, diagnostics=None) -> GpModel:
    """Factorise the training covariance for fixed hyperparameters."""
    X = np.array(inputs, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.array(outputs, dtype=float).reshape(-1)
    if X.shape[0] != y.size:
        raise ValueError("inputs and outputs differ in length")
    if noise_variance < 0:
        raise ValueError("noise variance must be nonnegative")
    K = gram(X, params)
    scale = float(np.mean(np.diag(K)))
    c, L = jitter, None
    while c <= MAX_JITTER * (1 + 1e-12):
        try:
            L = linalg.cholesky(K + (noise_variance + c * scale) * np.eye(y.size), lower=True,
                                check_finite=False)
            break
        except linalg.LinAlgError:
            c *= 10.0
    if L is None:
        raise FactorizationError(f"training covariance not factorizable with jitter up to {MAX_JITTER:g}")
    alpha = linalg.cho_solve((L, True), y, check_finite=False)
    for a in (X, y, L, alpha):
        a.setflags(write=False)
    return GpModel(X, y, params, float(noise_variance), float(c), L, alpha, seed, diagnostics or [])


def log_marginal_likelihood(model: GpModel) -> float:
    y, L = model.train_outputs, model.chol
    return float(
        -0.5 * y @ model.alpha - np.sum(np.log(np.diag(L))) - 0.5 * y.size * np.log(2 * np.pi)
    )


def lml_and_gradient(theta, X, y, family: str, free_noise: bool, jitter: float = JITTER):
    """Log marginal likelihood and its gradient w.r.t. the log-parameter vector
    ``theta`` (kernel log-params, then log noise variance if free).

    The jitter is held at ``jitter * mean(diag K)`` and differentiated with it.
    """
    theta = np.asarray(theta, dtype=float)
    n_k = theta.size - int(free_noise)
    params = params_from_log(family, theta[:n_k])
    noise = float(np.exp(theta[n_k])) if free_noise else 0.0
    K, dK = gram_with_gradients(X, params)
    N = y.size
    scale = float(np.mean(np.diag(K)))
    C = K + (noise + jitter * scale) * np.eye(N)
    L = linalg.cholesky(C, lower=True, check_finite=False)
    alpha = linalg.cho_solve((L, True), y, check_finite=False)
    lml = -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * N * np.log(2 * np.pi)
    Cinv = linalg.cho_solve((L, True), np.eye(N), check_finite=False)
    W = np.outer(alpha, alpha) - Cinv
    grad = 0.5 * np.einsum("ij,pij->p", W, dK)
    grad += 0.5 * np.trace(W) * jitter * np.einsum("pii->p", dK) / N
    if free_noise:
        grad = np.append(grad, 0.5 * np.trace(W) * noise)
    return float(lml), grad


def _initial_theta(rng, X, y, family: str, free_noise: bool) -> np.ndarray:
    span = np.ptp(X, axis=0)
    span = np.where(span > 0, span, 1.0)
    var = float(np.var(y))
    if var <= 0:
        var = float(np.mean(y**2)) or 1.0
    logls = np.log(span) + rng.uniform(np.log(0.1), np.log(10.0), size=span.size)
    if family == "rbf":
        theta = np.concatenate([[np.log(var)], logls])
    else:
        m = X.shape[1] - 1
        theta = np.concatenate([
            [np.log(var)], logls[:m],
            [0.0], logls[m:],
            [np.log(var)], np.log(span[:m]) + rng.uniform(np.log(0.1), np.log(10.0), size=m),
        ])
    if free_noise:
        theta = np.append(theta, np.log(var) + rng.uniform(np.log(1e-6), np.log(1e-1)))
    return theta


def fit(inputs, outputs, family: str = "rbf", noise: str = "zero", n_restarts: int = 10,
        seed: int = 0, max_iter: int = 200, gtol: float = 1e-6) -> GpModel:
    """Maximum-likelihood GP; best of ``n_restarts`` L-BFGS runs.

    For ``family="nargp"`` the inputs are augmented rows ``(x, f_prev(x))``.
    """
    if noise not in NOISE_POLICIES:
        raise ValueError(f"noise policy must be one of {NOISE_POLICIES}")
    if n_restarts < 1:
        raise ValueError("n_restarts must be >= 1")
    X = np.array(inputs, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.array(outputs, dtype=float).reshape(-1)
    if X.shape[0] != y.size or y.size < 1:
        raise ValueError("need N >= 1 matching inputs and outputs")
    if family == "nargp" and X.shape[1] < 2:
        raise ValueError("autoregressive kernel needs augmented inputs (x, f_prev)")
    free = noise == "free"
    rng = np.random.default_rng(seed)

    def objective(theta):
        try:
            v, g = lml_and_gradient(theta, X, y, family, free)
        except (linalg.LinAlgError, ValueError, FloatingPointError):
            return 1e25, np.zeros_like(theta)
        if not (np.isfinite(v) and np.all(np.isfinite(g))):
            return 1e25, np.zeros_like(theta)
        return -v, -g

    best, best_val, diagnostics = None, -np.inf, []
    for r in range(n_restarts):
        theta0 = _initial_theta(rng, X, y, family, free)
        with np.errstate(all="ignore"):
            res = optimize.minimize(objective, theta0, jac=True, method="L-BFGS-B",
                                    options={"maxiter": max_iter, "gtol": gtol})
        val = -float(res.fun)
        ok = bool(np.isfinite(val) and res.fun < 1e24)
        diagnostics.append({"restart": r, "lml": val if ok else None, "converged": bool(res.success),
                            "iterations": int(res.nit), "message": str(res.message)})
        if ok and val > best_val:
            best, best_val = res.x, val
    if best is None:
        raise FitError(f"all {n_restarts} restarts failed", diagnostics)
    n_k = best.size - int(free)
    params = params_from_log(family, best[:n_k])
    noise_var = float(np.exp(best[n_k])) if free else 0.0
    log.debug("fit %s N=%d best lml %.6g", family, y.size, best_val)
    return condition(X, y, params, noise_var, seed=seed, diagnostics=diagnostics)


def _cross(model: GpModel, Xs) -> np.ndarray:
    Xs = np.asarray(Xs, dtype=float)
    if Xs.ndim == 1:
        Xs = Xs[:, None] if model.dim == 1 else Xs[None, :]
    if Xs.shape[1] != model.dim:
        raise ValueError(f"test inputs have {Xs.shape[1]} columns, model expects {model.dim}")
    return Xs


def predict(model: GpModel, test_inputs, full_cov: bool = True):
    """Posterior mean and covariance (or variance vector when ``full_cov`` is False)
    of the latent function.

    The diagonal jitter acts as a nugget of the latent kernel: a test point that
    coincides exactly with a training input sees it in its cross-covariance, so
    noiseless models interpolate their data to round-off.
    """
    Xs = _cross(model, test_inputs)
    Ks = cross_matrix(Xs, model.train_inputs, model.kernel_params)
    hit = match_rows(model.train_inputs, Xs)
    rows = np.flatnonzero(hit >= 0)
    nugget = model.jitter_value
    if rows.size:
        Ks[rows, hit[rows]] += nugget
    mean = Ks @ model.alpha
    V = linalg.solve_triangular(model.chol, Ks.T, lower=True, check_finite=False)
    if full_cov:
        cov = gram(Xs, model.kernel_params)
        cov[rows, rows] += nugget
        cov -= V.T @ V
        return mean, 0.5 * (cov + cov.T)
    prior = diag(Xs, model.kernel_params)
    prior[rows] += nugget
    var = prior - np.einsum("ij,ij->j", V, V)
    return mean, np.maximum(var, 0.0)


def sample_posterior(model: GpModel, test_inputs, n_samples: int, seed=None) -> np.ndarray:
    mean, cov = predict(model, test_inputs)
    return sample_gaussian(mean, cov, n_samples, seed)


def sample_gaussian(mean, cov, n_samples: int, seed=None) -> np.ndarray:
    """Draws of N(mean, cov) as an (n_samples x T) matrix."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    mean = np.asarray(mean, dtype=float)
    z = rng.standard_normal((n_samples, mean.size))
    if np.max(np.abs(np.diag(cov)), initial=0.0) == 0.0:
        return np.tile(mean, (n_samples, 1))
    L, _ = cholesky_jitter(cov)
    return mean + z @ L.T
