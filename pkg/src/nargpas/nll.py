"""Nonlinear level-set learning with a reversible residual network.

Each layer applies two shears of the split state (u, v)::

    u <- u + h K1^T tanh(K1 v + b1)
    v <- v - h K2^T tanh(K2 u + b2)

The second shear reads the freshly updated ``u``, so the inverse is explicit
(undo the v-shear first, then the u-shear) and the map is volume preserving.
Odd input dimensions are padded with one constant zero coordinate.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from . import gp
from .core import Box, Dataset
from .gp import GpModel

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training loss became NaN at epoch {epoch}")


@dataclass(frozen=True, eq=False)
class RevNet:
    dim: int
    h: float
    K1: np.ndarray  # (layers, width, half)
    b1: np.ndarray  # (layers, width)
    K2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for name in ("K1", "b1", "K2", "b2"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.K1.shape != self.K2.shape or self.K1.shape[2] != self.half:
            raise ValueError("weight shapes do not match the partition")

    @property
    def padded(self) -> bool:
        return self.dim % 2 == 1

    @property
    def half(self) -> int:
        return (self.dim + 1) // 2

    @property
    def n_layers(self) -> int:
        return self.K1.shape[0]

    @classmethod
    def random(cls, dim: int, n_layers: int = 10, h: float = 0.25, width: int | None = None,
               seed=None) -> RevNet:
        rng = np.random.default_rng(seed)
        half = (dim + 1) // 2
        width = 2 * half if width is None else width
        scale = 1.0 / np.sqrt(dim)
        return cls(dim, h,
                   rng.normal(0.0, scale, (n_layers, width, half)), np.zeros((n_layers, width)),
                   rng.normal(0.0, scale, (n_layers, width, half)), np.zeros((n_layers, width)))

    @classmethod
    def identity(cls, dim: int, n_layers: int = 1) -> RevNet:
        half = (dim + 1) // 2
        z = np.zeros((n_layers, 2 * half, half))
        return cls(dim, 0.25, z, np.zeros((n_layers, 2 * half)), z, np.zeros((n_layers, 2 * half)))

    def _pad(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} coordinates, got {x.shape[1]}")
        if self.padded:
            x = np.hstack([x, np.zeros((x.shape[0], 1))])
        return x

    def forward(self, x) -> np.ndarray:
        """Transformed coordinates, padded width (2 * half) columns."""
        single = np.ndim(x) == 1
        z = self._pad(x)
        u, v = z[:, : self.half].copy(), z[:, self.half :].copy()
        for n in range(self.n_layers):
            u += self.h * np.tanh(v @ self.K1[n].T + self.b1[n]) @ self.K1[n]
            v -= self.h * np.tanh(u @ self.K2[n].T + self.b2[n]) @ self.K2[n]
        out = np.hstack([u, v])
        return out[0] if single else out

    def inverse(self, z) -> np.ndarray:
        single = np.ndim(z) == 1
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if z.shape[1] != 2 * self.half:
            raise ValueError(f"expected {2 * self.half} transformed coordinates, got {z.shape[1]}")
        u, v = z[:, : self.half].copy(), z[:, self.half :].copy()
        for n in reversed(range(self.n_layers)):
            v += self.h * np.tanh(u @ self.K2[n].T + self.b2[n]) @ self.K2[n]
            u -= self.h * np.tanh(v @ self.K1[n].T + self.b1[n]) @ self.K1[n]
        x = np.hstack([u, v])[:, : self.dim]
        return x[0] if single else x

    def jacobian(self, x) -> np.ndarray:
        """Forward Jacobians d forward / d x_padded, shape (N, 2h, 2h)."""
        z = self._pad(x)
        N, M, H = z.shape[0], 2 * self.half, self.half
        u, v = z[:, :H].copy(), z[:, H:].copy()
        J = np.tile(np.eye(M), (N, 1, 1))
        for n in range(self.n_layers):
            K = self.K1[n]
            s = 1.0 - np.tanh(v @ K.T + self.b1[n]) ** 2
            B = self.h * np.einsum("wi,nw,wj->nij", K, s, K)
            J[:, :H] += B @ J[:, H:]
            u += self.h * np.tanh(v @ K.T + self.b1[n]) @ K
            K = self.K2[n]
            s = 1.0 - np.tanh(u @ K.T + self.b2[n]) ** 2
            B = self.h * np.einsum("wi,nw,wj->nij", K, s, K)
            J[:, H:] -= B @ J[:, :H]
            v -= self.h * np.tanh(u @ K.T + self.b2[n]) @ K
        return J

    def to_dict(self) -> dict:
        return {"dim": self.dim, "h": self.h, "layers": self.n_layers, "padded": self.padded,
                "partition": [self.half, self.half],
                "K1": self.K1.tolist(), "b1": self.b1.tolist(),
                "K2": self.K2.tolist(), "b2": self.b2.tolist()}

    @classmethod
    def from_dict(cls, d) -> RevNet:
        return cls(d["dim"], d["h"], np.array(d["K1"]), np.array(d["b1"]),
                   np.array(d["K2"]), np.array(d["b2"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> RevNet:
        return cls.from_dict(json.loads(text))


def transformed_gradients(net: RevNet, inputs, padded_gradients) -> np.ndarray:
    """Gradients of f o g^{-1} at g(x), i.e. J(x)^{-T} grad f(x), without forming J."""
    z = net._pad(inputs)
    H = net.half
    u, v = z[:, :H].copy(), z[:, H:].copy()
    su, sv = padded_gradients[:, :H].copy(), padded_gradients[:, H:].copy()
    for n in range(net.n_layers):
        K = net.K1[n]
        a = np.tanh(v @ K.T + net.b1[n])
        sv -= net.h * ((1 - a**2) * (su @ K.T)) @ K
        u += net.h * a @ K
        K = net.K2[n]
        a = np.tanh(u @ K.T + net.b2[n])
        su += net.h * ((1 - a**2) * (sv @ K.T)) @ K
        v -= net.h * a @ K
    return np.hstack([su, sv])


def _padded_gradients(net: RevNet, gradients: np.ndarray) -> np.ndarray:
    G = np.asarray(gradients, dtype=float)
    if net.padded:
        G = np.hstack([G, np.zeros((G.shape[0], 1))])
    return G


def inactive_sensitivity(net: RevNet, inputs, gradients) -> float:
    """Mean over samples of sum_{j>1} ((J^{-T} grad f)_j)^2 / |grad f|^2.

    Samples with vanishing gradient contribute zero.
    """
    G = _padded_gradients(net, gradients)
    s = transformed_gradients(net, inputs, G)
    norm2 = (G**2).sum(1)
    ok = norm2 > 0
    ratio = np.zeros(G.shape[0])
    ratio[ok] = (s[ok, 1:] ** 2).sum(1) / norm2[ok]
    return float(ratio.mean())


@dataclass
class NllConfig:
    layers: int = 10
    epochs: int = 20000
    lr: float = 0.03
    h: float = 0.25
    width: int | None = None
    seed: int = 0


def train_nll(dataset: Dataset, config: NllConfig | None = None, box: Box | None = None,
              **overrides) -> RevNet:
    """Fit a RevNet minimising the normalised inactive sensitivity with
    full-batch Adam; returns the best weights seen."""
    import torch

    config = config or NllConfig()
    if overrides:
        config = NllConfig(**{**config.__dict__, **overrides})
    if not dataset.has_gradients:
        raise ValueError("level-set learning needs gradient samples")
    if len(dataset) < 2:
        raise ValueError("need at least two samples")
    data = dataset.normalized(box) if box is not None else dataset
    net0 = RevNet.random(data.dim, config.layers, config.h, config.width, config.seed)
    torch.manual_seed(config.seed)
    dt = torch.float64
    H = net0.half
    Z = torch.tensor(net0._pad(data.inputs), dtype=dt)
    G = torch.tensor(_padded_gradients(net0, data.gradients), dtype=dt)
    norm2 = (G**2).sum(1)
    ok = norm2 > 0
    inv_norm = torch.where(ok, 1.0 / torch.where(ok, norm2, torch.ones_like(norm2)), torch.zeros_like(norm2))
    weights = [torch.tensor(a, dtype=dt, requires_grad=True) for a in (net0.K1, net0.b1, net0.K2, net0.b2)]
    K1, b1, K2, b2 = weights
    h = config.h

    def loss_fn():
        # J^{-T} g is pushed through the layers in forward order: every shear
        # [[I, B], [0, I]] has B symmetric, so its inverse transpose is a shear too.
        u, v, su, sv = Z[:, :H], Z[:, H:], G[:, :H], G[:, H:]
        for n in range(config.layers):
            a = torch.tanh(v @ K1[n].T + b1[n])
            sv = sv - h * ((1 - a**2) * (su @ K1[n].T)) @ K1[n]
            u = u + h * a @ K1[n]
            a = torch.tanh(u @ K2[n].T + b2[n])
            su = su + h * ((1 - a**2) * (sv @ K2[n].T)) @ K2[n]
            v = v - h * a @ K2[n]
        s = torch.cat([su, sv], dim=1)
        return ((s[:, 1:] ** 2).sum(1) * inv_norm).mean()

    opt = torch.optim.Adam(weights, lr=config.lr)
    best_loss, best = np.inf, [w.detach().clone() for w in weights]
    for epoch in range(config.epochs):
        opt.zero_grad()
        loss = loss_fn()
        value = loss.item()
        if not np.isfinite(value):
            raise DivergenceError(epoch)
        if value < best_loss:
            best_loss, best = value, [w.detach().clone() for w in weights]
        if value == 0.0:
            break
        loss.backward()
        opt.step()
    final = float(loss_fn().detach())
    if np.isfinite(final) and final < best_loss:
        best_loss, best = final, [w.detach().clone() for w in weights]
    log.debug("nll training: best loss %.4g", best_loss)
    return RevNet(net0.dim, config.h, *(w.numpy() for w in best))


@dataclass(frozen=True, eq=False)
class NllReducer:
    """x -> first ``n_active`` coordinates of the RevNet image (forward only)."""

    net: RevNet
    box: Box | None = None
    n_active: int = 1

    kind = "NLL"

    @property
    def active_dim(self) -> int:
        return self.n_active

    def transform(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.box is not None:
            x = self.box.to_reference(x)
        return self.net.forward(x)[:, : self.n_active]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "net": self.net.to_dict(), "n_active": self.n_active,
                "box": None if self.box is None else self.box.to_dict()}

    @classmethod
    def from_dict(cls, d) -> NllReducer:
        box = None if d.get("box") is None else Box.from_dict(d["box"])
        return cls(RevNet.from_dict(d["net"]), box, d.get("n_active", 1))


def nll_response_surface(net: RevNet, dataset: Dataset, box: Box | None = None, noise: str = "zero",
                         n_restarts: int = 10, seed: int = 0) -> tuple[NllReducer, GpModel]:
    reducer = NllReducer(net, box)
    surface = gp.fit(reducer.transform(dataset.inputs), dataset.outputs, noise=noise,
                     n_restarts=n_restarts, seed=seed)
    return reducer, surface
