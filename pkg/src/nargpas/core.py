"""Dataset containers, parameter boxes and the CSV dataset format."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class HierarchyError(ValueError):
    """A higher-fidelity input row is missing from the lower-fidelity design."""

    def __init__(self, row: int, level: int | None = None):
        self.row = row
        self.level = level
        where = f" (level {level})" if level is not None else ""
        super().__init__(f"high-fidelity input row {row}{where} is not present in the lower-fidelity inputs")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(self.lower))
        up = _frozen(np.atleast_1d(self.upper))
        if lo.shape != up.shape or lo.ndim != 1:
            raise ValueError("box bounds must be vectors of equal length")
        if not np.all(lo < up):
            raise ValueError("box requires lower < upper in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def unit(cls, m: int) -> Box:
        return cls(np.zeros(m), np.ones(m))

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.atleast_2d(x)
        span = self.upper - self.lower
        return np.all((x >= self.lower - tol * span) & (x <= self.upper + tol * span), axis=1)

    def to_reference(self, x) -> np.ndarray:
        """Map raw inputs affinely onto [-1, 1]^m."""
        return 2.0 * (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower) - 1.0

    def from_reference(self, z) -> np.ndarray:
        return self.lower + 0.5 * (np.asarray(z, dtype=float) + 1.0) * (self.upper - self.lower)

    def from_unit(self, u) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * (self.upper - self.lower)

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Box:
        return cls(np.array(d["lower"]), np.array(d["upper"]))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs, scalar outputs and (optionally) gradients for one fidelity level."""

    inputs: np.ndarray
    outputs: np.ndarray
    gradients: np.ndarray | None = None

    def __post_init__(self):
        x = np.array(self.inputs, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.array(self.outputs, dtype=float).reshape(-1)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError("inputs must be an N x m matrix with N, m >= 1")
        if y.shape[0] != x.shape[0]:
            raise ValueError(f"{x.shape[0]} input rows but {y.shape[0]} outputs")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset entries must be finite")
        object.__setattr__(self, "inputs", _frozen(x))
        object.__setattr__(self, "outputs", _frozen(y))
        if self.gradients is not None:
            g = np.array(self.gradients, dtype=float)
            if g.shape != x.shape:
                raise ValueError(f"gradients shape {g.shape} differs from inputs shape {x.shape}")
            if not np.all(np.isfinite(g)):
                raise ValueError("gradients must be finite")
            object.__setattr__(self, "gradients", _frozen(g))

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def has_gradients(self) -> bool:
        return self.gradients is not None

    def subset(self, idx) -> Dataset:
        g = None if self.gradients is None else self.gradients[idx]
        return Dataset(self.inputs[idx], self.outputs[idx], g)

    def normalized(self, box: Box) -> Dataset:
        """Same samples in [-1, 1]^m coordinates; gradients follow the chain rule."""
        if box.dim != self.dim:
            raise ValueError("box dimension does not match dataset")
        g = None
        if self.gradients is not None:
            g = self.gradients * 0.5 * (box.upper - box.lower)
        return Dataset(box.to_reference(self.inputs), self.outputs, g)

    def to_csv(self, path) -> None:
        write_csv(self, path)

    @classmethod
    def from_csv(cls, path) -> Dataset:
        return read_csv(path)


@dataclass(frozen=True, eq=False)
class FidelityPair:
    low: Dataset
    high: Dataset

    def __post_init__(self):
        if not validate_hierarchy(self.low, self.high):
            raise HierarchyError(first_missing_row(self.low.inputs, self.high.inputs))


def _row_lookup(rows: np.ndarray) -> dict[bytes, int]:
    # +0.0 folds negative zero so that -0.0 == 0.0 holds as for floats
    rows = np.ascontiguousarray(rows + 0.0)
    table: dict[bytes, int] = {}
    for i, r in enumerate(rows):
        table.setdefault(r.tobytes(), i)
    return table


def match_rows(low_inputs: np.ndarray, high_inputs: np.ndarray) -> np.ndarray:
    """Index into ``low_inputs`` of every high row (exact equality), -1 when absent."""
    low_inputs = np.atleast_2d(np.asarray(low_inputs, dtype=float))
    high_inputs = np.atleast_2d(np.asarray(high_inputs, dtype=float))
    if low_inputs.shape[1] != high_inputs.shape[1]:
        raise ValueError(f"dimension mismatch: {low_inputs.shape[1]} vs {high_inputs.shape[1]}")
    table = _row_lookup(low_inputs)
    high = np.ascontiguousarray(high_inputs + 0.0)
    return np.array([table.get(r.tobytes(), -1) for r in high], dtype=int)


def first_missing_row(low_inputs, high_inputs) -> int:
    idx = match_rows(low_inputs, high_inputs)
    missing = np.flatnonzero(idx < 0)
    return int(missing[0]) if missing.size else -1


def validate_hierarchy(low: Dataset, high: Dataset) -> bool:
    """True iff every high-fidelity input row appears among the low-fidelity rows."""
    return bool(np.all(match_rows(low.inputs, high.inputs) >= 0))


def write_csv(data: Dataset, path) -> None:
    m = data.dim
    header = [f"x{j + 1}" for j in range(m)] + ["y"]
    cols = [data.inputs, data.outputs[:, None]]
    if data.gradients is not None:
        header += [f"g{j + 1}" for j in range(m)]
        cols.append(data.gradients)
    table = np.hstack(cols)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in table:
            w.writerow([format(float(v), ".17g") for v in row])


def write_inputs_csv(inputs: np.ndarray, path) -> None:
    """Design matrix only (header ``x1..xm``)."""
    inputs = np.atleast_2d(inputs)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(inputs.shape[1])])
        for row in inputs:
            w.writerow([format(float(v), ".17g") for v in row])


def _read_table(path) -> tuple[list[str], np.ndarray]:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    table = np.array([[float(v) for v in r] for r in body], dtype=float)
    if table.size == 0:
        table = table.reshape(0, len(header))
    if table.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    return header, table


def read_inputs_csv(path) -> np.ndarray:
    header, table = _read_table(path)
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    if not xcols:
        raise ValueError(f"{path}: no x columns")
    return table[:, xcols]


def read_csv(path) -> Dataset:
    header, table = _read_table(path)
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    gcols = [i for i, h in enumerate(header) if h.startswith("g")]
    if "y" not in header or not xcols:
        raise ValueError(f"{path}: header must be x1..xm,y[,g1..gm]")
    if gcols and len(gcols) != len(xcols):
        raise ValueError(f"{path}: {len(gcols)} gradient columns for {len(xcols)} inputs")
    y = table[:, header.index("y")]
    g = table[:, gcols] if gcols else None
    return Dataset(table[:, xcols], y, g)
