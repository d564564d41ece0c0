"""Linear parameter-space reduction with active subspaces."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import gp
from .core import Box, Dataset
from .gp import GpModel

DEGENERATE_GAP = 1e-12


@dataclass(frozen=True, eq=False)
class AsDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    active_dim: int
    degenerate: bool = False

    @property
    def W1(self) -> np.ndarray:
        return self.eigenvectors[:, : self.active_dim]

    @property
    def W2(self) -> np.ndarray:
        return self.eigenvectors[:, self.active_dim :]

    def with_active_dim(self, r: int) -> AsDecomposition:
        if not 1 <= r <= self.eigenvalues.size:
            raise ValueError(f"active dimension {r} outside 1..{self.eigenvalues.size}")
        return AsDecomposition(self.eigenvalues, self.eigenvectors, r, self.degenerate)


def gradient_covariance(gradients) -> np.ndarray:
    """Uncentered gradient covariance (1/N) sum_i g_i g_i^T."""
    G = np.atleast_2d(np.asarray(gradients, dtype=float))
    if G.shape[0] == 0:
        raise ValueError("empty gradient set")
    C = G.T @ G / G.shape[0]
    return 0.5 * (C + C.T)


def decompose(cov, active_dim: int | None = None) -> AsDecomposition:
    """Eigendecomposition sorted descending; active dimension at the largest
    spectral gap (smallest r on ties) unless ``active_dim`` is given."""
    C = np.asarray(cov, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("covariance must be square")
    if np.max(np.abs(C - C.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(C))):
        raise ValueError("covariance is not symmetric")
    evals, evecs = np.linalg.eigh(0.5 * (C + C.T))
    order = np.argsort(evals)[::-1]
    evals = np.maximum(evals[order], 0.0)
    evecs = evecs[:, order]
    # sign convention: largest-magnitude entry of every eigenvector positive
    pivot = np.argmax(np.abs(evecs), axis=0)
    evecs = evecs * np.sign(evecs[pivot, np.arange(evecs.shape[1])])
    m = evals.size
    degenerate = False
    if m == 1:
        r = 1
    else:
        gaps = evals[:-1] - evals[1:]
        r = int(np.argmax(gaps)) + 1
        if gaps[r - 1] <= DEGENERATE_GAP * max(evals[0], np.finfo(float).tiny):
            r, degenerate = 1, True
    dec = AsDecomposition(evals, evecs, r, degenerate)
    return dec if active_dim is None else dec.with_active_dim(active_dim)


def bound_terms(dec: AsDecomposition, r: int | None = None) -> tuple[float, float]:
    """Square roots of the active and inactive eigenvalue masses."""
    r = dec.active_dim if r is None else r
    return float(np.sqrt(dec.eigenvalues[:r].sum())), float(np.sqrt(dec.eigenvalues[r:].sum()))


def estimate_gradients(dataset: Dataset, k_neighbors: int | None = None) -> np.ndarray:
    """Per-sample gradients from local linear least squares on the k nearest
    neighbours (the sample itself included)."""
    X, y = dataset.inputs, dataset.outputs
    N, m = X.shape
    if N < m + 1:
        raise ValueError(f"need at least m + 1 = {m + 1} samples, got {N}")
    k = min(N, 2 * m + 1) if k_neighbors is None else int(k_neighbors)
    if not m + 1 <= k <= N:
        raise ValueError(f"k_neighbors must lie in [{m + 1}, {N}]")
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    grads = np.empty((N, m))
    for i in range(N):
        nb = np.argsort(d2[i], kind="stable")[:k]
        A = np.hstack([np.ones((k, 1)), X[nb] - X[i]])
        if np.linalg.matrix_rank(A) < m + 1:
            raise np.linalg.LinAlgError(f"degenerate neighbourhood around sample {i}")
        coef, *_ = np.linalg.lstsq(A, y[nb], rcond=None)
        grads[i] = coef[1:]
    return grads


@dataclass(frozen=True, eq=False)
class LinearReducer:
    """x -> W1^T x, applied in [-1, 1] coordinates when a box is attached."""

    W1: np.ndarray
    box: Box | None = None
    decomposition: AsDecomposition | None = None

    kind = "AS"

    @property
    def active_dim(self) -> int:
        return self.W1.shape[1]

    def transform(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.box is not None:
            x = self.box.to_reference(x)
        return x @ self.W1

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "W1": self.W1.tolist(), "box": None if self.box is None else self.box.to_dict()}
        if self.decomposition is not None:
            d["eigenvalues"] = self.decomposition.eigenvalues.tolist()
        return d

    @classmethod
    def from_dict(cls, d) -> LinearReducer:
        box = None if d.get("box") is None else Box.from_dict(d["box"])
        return cls(np.array(d["W1"], dtype=float), box)


def active_subspace(dataset: Dataset, box: Box | None = None, active_dim: int | None = None,
                    k_neighbors: int | None = None) -> AsDecomposition:
    data = dataset.normalized(box) if box is not None else dataset
    G = data.gradients if data.has_gradients else estimate_gradients(data, k_neighbors)
    return decompose(gradient_covariance(G), active_dim)


def as_response_surface(dataset: Dataset, active_dim: int | None = None, box: Box | None = None,
                        noise: str = "zero", n_restarts: int = 10, seed: int = 0,
                        k_neighbors: int | None = None) -> tuple[LinearReducer, GpModel]:
    """Active subspace of the (normalised) data and a GP on the active coordinates."""
    m = dataset.dim
    dec = active_subspace(dataset, box, active_dim, k_neighbors)
    r = dec.active_dim
    if r >= m:
        raise ValueError(f"active dimension {r} gives no reduction of {m} inputs")
    if len(dataset) < r + 2:
        raise ValueError(f"need at least r + 2 = {r + 2} samples")
    reducer = LinearReducer(dec.W1, box, dec)
    surface = gp.fit(reducer.transform(dataset.inputs), dataset.outputs, noise=noise,
                     n_restarts=n_restarts, seed=seed)
    return reducer, surface


def write_summary_csv(reducer, dataset: Dataset, path) -> None:
    """Sufficient-summary-plot data: first active coordinate against output."""
    z = reducer.transform(dataset.inputs)[:, 0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["active_coordinate", "output"])
        for a, b in zip(z, dataset.outputs):
            w.writerow([format(float(a), ".17g"), format(float(b), ".17g")])
