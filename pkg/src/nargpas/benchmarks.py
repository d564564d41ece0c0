"""Closed-form test functions with analytic gradients.

Parameter ranges:

* piston: Ben-Ari & Steinberg (2007), as used in the ``active_subspaces``
  repository (Constantine) and the Virtual Library of Simulation Experiments.
* Ebola R0: Diaz, Constantine, Kalmbach, Jones & Pankavich (2018), Liberia
  parameter ranges as distributed with the ``ATHENA`` tutorials.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Box, Dataset

GRAVITY_TERM = 19.62


def _rows(x, m: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != m:
        raise ValueError(f"expected {m} parameters, got {x.shape[1]}")
    return x


def _squeeze(v, x):
    return v[0] if np.ndim(x) == 1 else v


# --- Ebola basic reproduction number -------------------------------------

EBOLA_NAMES = ("beta1", "beta2", "beta3", "rho1", "gamma1", "gamma2", "omega", "psi")
EBOLA_BOX = Box(
    np.array([0.1, 0.1, 0.05, 0.41, 0.0276, 0.081, 0.25, 0.0833]),
    np.array([0.4, 0.4, 0.2, 1.0, 0.1702, 0.21, 0.5, 0.7]),
)


def ebola_r0(params):
    """R0 = (b1 + b2 r1 g1 / w + b3 psi / g2) / (g1 + psi)."""
    x = _rows(params, 8)
    b1, b2, b3, r1, g1, g2, w, psi = x.T
    den = g1 + psi
    if np.any(g2 == 0) or np.any(w == 0) or np.any(den == 0):
        raise ZeroDivisionError("gamma2, omega and gamma1 + psi must be nonzero")
    return _squeeze((b1 + b2 * r1 * g1 / w + b3 * psi / g2) / den, params)


def ebola_r0_grad(params):
    x = _rows(params, 8)
    b1, b2, b3, r1, g1, g2, w, psi = x.T
    den = g1 + psi
    num = b1 + b2 * r1 * g1 / w + b3 * psi / g2
    g = np.column_stack([
        1.0 / den,
        r1 * g1 / (w * den),
        psi / (g2 * den),
        b2 * g1 / (w * den),
        b2 * r1 / (w * den) - num / den**2,
        -b3 * psi / (g2**2 * den),
        -b2 * r1 * g1 / (w**2 * den),
        b3 / (g2 * den) - num / den**2,
    ])
    return _squeeze(g, params)


# --- piston cycle time -----------------------------------------------------

PISTON_NAMES = ("M", "S", "V0", "k", "P0", "Ta", "T0")
PISTON_BOX = Box(
    np.array([30.0, 0.005, 0.002, 1000.0, 90000.0, 290.0, 340.0]),
    np.array([60.0, 0.020, 0.010, 5000.0, 110000.0, 296.0, 360.0]),
)


def _piston_parts(x):
    M, S, V0, k, P0, Ta, T0 = x.T
    A = P0 * S + GRAVITY_TERM * M - k * V0 / S
    disc = A**2 + 4.0 * k * P0 * V0 * Ta / T0
    if np.any(disc < 0):
        raise ValueError("negative discriminant: inputs outside the physical range")
    D = np.sqrt(disc)
    V = S / (2.0 * k) * (D - A)
    Q = k + S**2 * P0 * V0 * Ta / (T0 * V**2)
    C = 2.0 * np.pi * np.sqrt(M / Q)
    return M, S, V0, k, P0, Ta, T0, A, D, V, Q, C


def piston_cycle_time(params):
    """Cycle time C = 2 pi sqrt(M / (k + S^2 P0 V0 Ta / (T0 V^2)))."""
    return _squeeze(_piston_parts(_rows(params, 7))[-1], params)


def piston_grad(params):
    x = _rows(params, 7)
    M, S, V0, k, P0, Ta, T0, A, D, V, Q, C = _piston_parts(x)
    n = x.shape[0]
    e = np.eye(7)
    one = np.ones(n)

    def unit(j):
        return np.outer(one, e[j])

    # forward-mode: each d* is an (n, 7) Jacobian row block
    dA = (unit(4) * S[:, None] + unit(1) * P0[:, None] + GRAVITY_TERM * unit(0)
          - (unit(3) * (V0 / S)[:, None] + unit(2) * (k / S)[:, None] - unit(1) * (k * V0 / S**2)[:, None]))
    E = k * P0 * V0 * Ta / T0
    dE = E[:, None] * (unit(3) / k[:, None] + unit(4) / P0[:, None] + unit(2) / V0[:, None]
                       + unit(5) / Ta[:, None] - unit(6) / T0[:, None])
    dD = (A[:, None] * dA + 2.0 * dE) / D[:, None]
    pref = S / (2.0 * k)
    dpref = pref[:, None] * (unit(1) / S[:, None] - unit(3) / k[:, None])
    dV = dpref * (D - A)[:, None] + pref[:, None] * (dD - dA)
    G = S**2 * P0 * V0 * Ta / T0
    dG = G[:, None] * (2.0 * unit(1) / S[:, None] + unit(4) / P0[:, None] + unit(2) / V0[:, None]
                       + unit(5) / Ta[:, None] - unit(6) / T0[:, None])
    dQ = unit(3) + dG / (V**2)[:, None] - (2.0 * G / V**3)[:, None] * dV
    dC = C[:, None] * (0.5 * unit(0) / M[:, None] - 0.5 * dQ / Q[:, None])
    return _squeeze(dC, params)


# --- hyperbolic paraboloid --------------------------------------------------

PARABOLOID_BOX = Box(np.zeros(2), np.ones(2))


def paraboloid(x):
    xr = _rows(x, 2)
    return _squeeze(xr[:, 0] ** 2 - xr[:, 1] ** 2, x)


def paraboloid_grad(x):
    xr = _rows(x, 2)
    return _squeeze(np.column_stack([2.0 * xr[:, 0], -2.0 * xr[:, 1]]), x)


@dataclass(frozen=True)
class Benchmark:
    name: str
    box: Box
    evaluate: Callable
    gradient: Callable
    names: tuple = ()

    @property
    def dim(self) -> int:
        return self.box.dim

    def dataset(self, inputs, with_gradients: bool = True) -> Dataset:
        X = np.atleast_2d(inputs)
        y = np.atleast_1d(self.evaluate(X))
        g = np.atleast_2d(self.gradient(X)) if with_gradients else None
        return Dataset(X, y, g)


BENCHMARKS = {
    "piston": Benchmark("piston", PISTON_BOX, piston_cycle_time, piston_grad, PISTON_NAMES),
    "ebola": Benchmark("ebola", EBOLA_BOX, ebola_r0, ebola_r0_grad, EBOLA_NAMES),
    "paraboloid": Benchmark("paraboloid", PARABOLOID_BOX, paraboloid, paraboloid_grad, ("x1", "x2")),
}


def get(name: str) -> Benchmark:
    try:
        return BENCHMARKS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None
