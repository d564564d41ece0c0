"""RBF-ARD covariance and the nonlinear autoregressive composite kernel.

Every kernel works on plain coordinate matrices. The composite kernel acts on
*augmented* inputs whose last column holds the previous-level output, i.e.
rows ``(x_1, ..., x_m, f_prev(x))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class RbfArdParams:
    variance: float
    lengthscales: np.ndarray

    def __post_init__(self):
        ls = np.array(np.atleast_1d(self.lengthscales), dtype=float)
        ls.setflags(write=False)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "variance", float(self.variance))
        if not (self.variance > 0 and np.all(ls > 0)):
            raise ValueError("RBF hyperparameters must be positive")

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    @property
    def n_params(self) -> int:
        return 1 + self.dim

    def to_log(self) -> np.ndarray:
        return np.concatenate([[np.log(self.variance)], np.log(self.lengthscales)])

    @classmethod
    def from_log(cls, theta) -> RbfArdParams:
        theta = np.asarray(theta, dtype=float)
        return cls(np.exp(theta[0]), np.exp(theta[1:]))

    def to_dict(self) -> dict:
        return {"variance": self.variance, "lengthscales": self.lengthscales.tolist()}

    @classmethod
    def from_dict(cls, d) -> RbfArdParams:
        return cls(d["variance"], np.array(d["lengthscales"], dtype=float))


@dataclass(frozen=True, eq=False)
class NargpKernelParams:
    """Hyperparameters of ``k_rho(x,x') * k_f(f,f') + k_delta(x,x')``."""

    rho: RbfArdParams
    f: RbfArdParams
    delta: RbfArdParams

    def __post_init__(self):
        if self.f.dim != 1:
            raise ValueError("the previous-output kernel takes exactly one coordinate")
        if self.rho.dim != self.delta.dim:
            raise ValueError("rho and delta kernels must share the spatial dimension")

    @property
    def dim(self) -> int:
        """Augmented input dimension (m + 1)."""
        return self.rho.dim + 1

    @property
    def n_params(self) -> int:
        return self.rho.n_params + self.f.n_params + self.delta.n_params

    def to_log(self) -> np.ndarray:
        return np.concatenate([self.rho.to_log(), self.f.to_log(), self.delta.to_log()])

    @classmethod
    def from_log(cls, theta) -> NargpKernelParams:
        theta = np.asarray(theta, dtype=float)
        m = (theta.size - 4) // 2
        return cls(
            RbfArdParams.from_log(theta[: m + 1]),
            RbfArdParams.from_log(theta[m + 1 : m + 3]),
            RbfArdParams.from_log(theta[m + 3 :]),
        )

    def to_dict(self) -> dict:
        return {"rho": self.rho.to_dict(), "f": self.f.to_dict(), "delta": self.delta.to_dict()}

    @classmethod
    def from_dict(cls, d) -> NargpKernelParams:
        return cls(*(RbfArdParams.from_dict(d[k]) for k in ("rho", "f", "delta")))


KernelParams = RbfArdParams | NargpKernelParams


def family_of(params: KernelParams) -> str:
    return "nargp" if isinstance(params, NargpKernelParams) else "rbf"


def params_from_log(family: str, theta) -> KernelParams:
    if family == "rbf":
        return RbfArdParams.from_log(theta)
    if family == "nargp":
        return NargpKernelParams.from_log(theta)
    raise ValueError(f"unknown kernel family {family!r}")


def params_from_dict(family: str, d) -> KernelParams:
    return RbfArdParams.from_dict(d) if family == "rbf" else NargpKernelParams.from_dict(d)


def rbf_ard(a, b, params: RbfArdParams) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape or a.size != params.dim:
        raise ValueError(f"dimension mismatch: {a.size}, {b.size}, {params.dim} lengthscales")
    r = (a - b) / params.lengthscales
    return float(params.variance * np.exp(-0.5 * np.dot(r, r)))


def nargp_kernel(a, fa: float, b, fb: float, params: NargpKernelParams) -> float:
    return rbf_ard(a, b, params.rho) * rbf_ard([fa], [fb], params.f) + rbf_ard(a, b, params.delta)


def _sqdist(A: np.ndarray, B: np.ndarray, ls: np.ndarray) -> np.ndarray:
    A = A / ls
    B = B / ls
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def _rbf_matrix(A, B, p: RbfArdParams) -> np.ndarray:
    return p.variance * np.exp(-0.5 * _sqdist(A, B, p.lengthscales))


def _check(A: np.ndarray, params: KernelParams) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.shape[1] != params.dim:
        raise ValueError(f"points have {A.shape[1]} columns, kernel expects {params.dim}")
    return A


def cross_matrix(A, B, params: KernelParams) -> np.ndarray:
    """Kernel matrix between point sets A (n x d) and B (k x d)."""
    A = _check(A, params)
    B = _check(B, params)
    if isinstance(params, RbfArdParams):
        return _rbf_matrix(A, B, params)
    return (
        _rbf_matrix(A[:, :-1], B[:, :-1], params.rho) * _rbf_matrix(A[:, -1:], B[:, -1:], params.f)
        + _rbf_matrix(A[:, :-1], B[:, :-1], params.delta)
    )


def gram(points, params: KernelParams, fvals=None) -> np.ndarray:
    """Symmetric Gram matrix. For the composite kernel pass the previous-level
    outputs as ``fvals`` or supply already augmented points."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if isinstance(params, NargpKernelParams):
        if fvals is not None:
            fv = np.asarray(fvals, dtype=float).reshape(-1, 1)
            if fv.shape[0] != P.shape[0]:
                raise ValueError("fvals length does not match number of points")
            P = np.hstack([P, fv])
    elif fvals is not None:
        raise ValueError("fvals only apply to the autoregressive kernel")
    K = cross_matrix(P, P, params)
    return 0.5 * (K + K.T)


def diag(points, params: KernelParams) -> np.ndarray:
    n = np.asarray(points).shape[0]
    if isinstance(params, RbfArdParams):
        return np.full(n, params.variance)
    return np.full(n, params.rho.variance * params.f.variance + params.delta.variance)


def _rbf_with_grads(X: np.ndarray, p: RbfArdParams) -> tuple[np.ndarray, np.ndarray]:
    diff2 = (X[:, None, :] - X[None, :, :]) ** 2 / p.lengthscales**2
    K = p.variance * np.exp(-0.5 * diff2.sum(-1))
    grads = np.empty((p.n_params,) + K.shape)
    grads[0] = K
    grads[1:] = K[None] * np.moveaxis(diff2, -1, 0)
    return K, grads


def gram_with_gradients(X, params: KernelParams) -> tuple[np.ndarray, np.ndarray]:
    """Gram matrix and its derivatives w.r.t. each log-hyperparameter (P x N x N),
    ordered as in ``params.to_log()``."""
    X = _check(X, params)
    if isinstance(params, RbfArdParams):
        return _rbf_with_grads(X, params)
    Kr, Gr = _rbf_with_grads(X[:, :-1], params.rho)
    Kf, Gf = _rbf_with_grads(X[:, -1:], params.f)
    Kd, Gd = _rbf_with_grads(X[:, :-1], params.delta)
    grads = np.concatenate([Gr * Kf[None], Gf * Kr[None], Gd], axis=0)
    return Kr * Kf + Kd, grads
