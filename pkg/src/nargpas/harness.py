"""Experiment orchestration: R² sweeps over outer restarts, re-scoring
cross-validation, correlation tables and CSV/JSON reports."""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import benchmarks, gp, nargp
from .core import Dataset, read_csv
from .pipeline import (
    PipelineConfig,
    build_lowfidelity,
    design_nargp,
    design_reversed,
    fit_surface,
    sample_extra,
)
from .sampling import SamplerSpec, sample

log = logging.getLogger(__name__)

SWEEPS = ("n_hf", "n_lf_extra")
CV_MODES = {"none": 0, "leave_one_out": 1, "leave_two_out": 2}
MAX_BATCHES = 10**6


def r2_score(y_true, y_pred) -> float:
    y = np.asarray(y_true, dtype=float).reshape(-1)
    p = np.asarray(y_pred, dtype=float).reshape(-1)
    if y.size != p.size:
        raise ValueError("y_true and y_pred differ in length")
    if y.size < 2:
        raise ValueError("R2 needs at least two points")
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise ValueError("R2 undefined for a constant target")
    return 1.0 - float(np.sum((y - p) ** 2)) / sst


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size != b.size:
        raise ValueError("length mismatch")
    if a.size < 2:
        raise ValueError("correlation needs at least two points")
    da, db = a - a.mean(), b - b.mean()
    den = math.sqrt(float(da @ da) * float(db @ db))
    if den == 0.0:
        raise ValueError("correlation undefined for a constant vector")
    return float(da @ db) / den


@dataclass(frozen=True)
class CorrelationData:
    reference: np.ndarray
    prediction: np.ndarray
    pearson: float

    def rows(self):
        return list(zip(self.reference.tolist(), self.prediction.tolist()))


def correlation_data(prediction, reference) -> CorrelationData:
    """(reference, prediction) pairs and their Pearson coefficient."""
    p = np.asarray(prediction, dtype=float).reshape(-1)
    r = np.asarray(reference, dtype=float).reshape(-1)
    if p.size != r.size:
        raise ValueError("prediction and reference differ in length")
    return CorrelationData(r, p, pearson(r, p))


# --- cross-validation by re-scoring -------------------------------------------

def check_batch_count(T: int, k_out: int) -> int:
    if T < k_out + 1:
        raise ValueError(f"test set of {T} points cannot leave {k_out} out")
    n = math.comb(T, k_out)
    if n > MAX_BATCHES:
        raise ValueError(f"C({T}, {k_out}) = {n} batches exceeds the limit of {MAX_BATCHES}")
    return n


def cv_batches(T: int, k_out: int) -> np.ndarray:
    """Indices left out by every batch, shape (C(T, k_out), k_out), lexicographic."""
    if k_out not in (1, 2):
        raise ValueError("k_out must be 1 or 2")
    n = check_batch_count(T, k_out)
    return np.array(list(itertools.combinations(range(T), k_out)), dtype=np.int64).reshape(n, k_out)


def batch_r2(y_true, y_pred, left_out: np.ndarray) -> np.ndarray:
    """R² of every batch (test set minus the ``left_out`` rows), from running sums."""
    y = np.asarray(y_true, dtype=float)
    e2 = (y - np.asarray(y_pred, dtype=float)) ** 2
    n = y.size - left_out.shape[1]
    sse = e2.sum() - e2[left_out].sum(1)
    # centre first so the sum-of-squares update does not cancel
    yc = y - y.mean()
    s1 = yc.sum() - yc[left_out].sum(1)
    s2 = (yc**2).sum() - (yc[left_out] ** 2).sum(1)
    sst = s2 - s1**2 / n
    with np.errstate(divide="ignore", invalid="ignore"):
        return 1.0 - sse / sst


def cv_scores(y_true, predictions: dict, k_out: int) -> dict:
    """Batch statistics per model plus the scores of every model on each
    model's lowest and highest batch."""
    y = np.asarray(y_true, dtype=float)
    left = cv_batches(y.size, k_out)
    scores = {name: batch_r2(y, p, left) for name, p in predictions.items()}
    out = {}
    for name, s in scores.items():
        lo, hi = int(np.argmin(s)), int(np.argmax(s))
        mean, std = float(s.mean()), float(s.std())
        half = 1.96 * std / math.sqrt(s.size)
        out[name] = {
            "k_out": k_out,
            "batches": int(s.size),
            "mean": mean,
            "std": std,
            "lower95": mean - half,
            "upper95": mean + half,
            "min": float(s[lo]),
            "max": float(s[hi]),
            "min_batch": left[lo].tolist(),
            "max_batch": left[hi].tolist(),
            "at_min_batch": {o: float(scores[o][lo]) for o in scores},
            "at_max_batch": {o: float(scores[o][hi]) for o in scores},
        }
    return out


# --- studies ------------------------------------------------------------------

@dataclass
class StudyConfig:
    benchmark: str | None = "piston"
    hf_csv: str | None = None
    # lower-fidelity CSVs of an external study, lowest fidelity first
    lower_csvs: list = field(default_factory=list)
    surrogate_level: bool = False
    sweep: str = "n_hf"
    grid: list = field(default_factory=lambda: [50, 60, 70, 80, 90, 100])
    n_hf: int = 100
    hf_sampler: str = "lhs"
    outer_restarts: int = 10
    seed_base: int = 0
    test_sampler: str = "lhs"
    test_size: int = 1000
    test_seed: int = 2**31 - 1
    test_csv: str | None = None
    cv: str = "none"
    reversed: bool = False
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    output_dir: str | None = None

    def __post_init__(self):
        if isinstance(self.pipeline, dict):
            self.pipeline = PipelineConfig.from_dict(self.pipeline)
        self.grid = [int(g) for g in self.grid]
        self.lower_csvs = list(self.lower_csvs)
        if not self.grid:
            raise ValueError("grid must be nonempty")
        if self.sweep not in SWEEPS:
            raise ValueError(f"sweep must be one of {SWEEPS}")
        if self.cv not in CV_MODES:
            raise ValueError(f"cv must be one of {sorted(CV_MODES)}")
        if self.outer_restarts < 1:
            raise ValueError("outer_restarts must be positive")
        if (self.benchmark is None) == (self.hf_csv is None):
            raise ValueError("give exactly one of benchmark and hf_csv")
        if self.benchmark is None and self.test_csv is None:
            raise ValueError("an external study needs test_csv")
        if self.test_csv is None and self.test_size < 2:
            raise ValueError("test size must be at least 2")
        if self.benchmark is not None:
            benchmarks.get(self.benchmark)
            if self.lower_csvs or self.surrogate_level:
                raise ValueError("lower_csvs and surrogate_level apply to external studies only")
        if min(self.grid) < 0 or (self.sweep == "n_hf" and min(self.grid) < 2):
            raise ValueError("grid values out of range")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pipeline"] = self.pipeline.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> StudyConfig:
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> StudyConfig:
        return cls.from_dict(json.loads(text))


@dataclass
class StudyResult:
    """Per-cell R² scores and aggregates. ``timings`` (seconds per cell and
    model) is kept out of the JSON so that reruns serialise identically."""

    config: dict
    cells: list
    aggregates: list
    cv: list = field(default_factory=list)
    correlations: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config": self.config, "cells": self.cells, "aggregates": self.aggregates,
                "cv": self.cv, "correlations": [{k: v for k, v in c.items() if k != "rows"}
                                                for c in self.correlations]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def r2(self, model: str, grid_value: int) -> list:
        return [c["r2"][model] for c in self.cells if c["grid_value"] == grid_value]

    def aggregate(self, model: str, grid_value: int) -> dict:
        for a in self.aggregates:
            if a["model"] == model and a["grid_value"] == grid_value:
                return a
        raise KeyError((model, grid_value))

    def write(self, directory) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        (out / "study_result.json").write_text(self.to_json() + "\n", encoding="utf-8")
        (out / "timings.json").write_text(json.dumps(self.timings, indent=2, sort_keys=True) + "\n",
                                          encoding="utf-8")
        write_r2_sweep_csv(self, out / "r2_sweep.csv")
        write_correlations_csv(self, out / "correlations.csv")
        if self.cv:
            write_cv_csv(self, out / "cv_bounds.csv")


def _fmt(v) -> str:
    return "" if v is None else format(float(v), ".17g")


def write_r2_sweep_csv(result: StudyResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["grid_value", "model", "mean", "min", "max", "n_ok"])
        for a in result.aggregates:
            w.writerow([a["grid_value"], a["model"], _fmt(a["mean"]), _fmt(a["min"]),
                        _fmt(a["max"]), a["n_ok"]])


def write_correlations_csv(result: StudyResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["grid_value", "restart", "pair", "reference", "prediction"])
        for c in result.correlations:
            for ref, pred in c["rows"]:
                w.writerow([c["grid_value"], c["restart"], c["pair"], _fmt(ref), _fmt(pred)])


def write_cv_csv(result: StudyResult, path) -> None:
    cols = ["k_out", "batches", "mean", "std", "lower95", "upper95", "min", "max"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["grid_value", "restart", "model", *cols])
        for entry in result.cv:
            for name, s in entry["scores"].items():
                w.writerow([entry["grid_value"], entry["restart"], name,
                            *(s[c] if c in ("k_out", "batches") else _fmt(s[c]) for c in cols)])


def _cell_seeds(seed_base: int, restart: int, grid_index: int) -> list[int]:
    # restart i uses seed_base + i; the grid index keys independent substreams
    ss = np.random.SeedSequence(seed_base + restart, spawn_key=(grid_index,))
    return [int(s) for s in ss.generate_state(3)]


def _test_set(config: StudyConfig) -> Dataset:
    if config.test_csv is not None:
        return read_csv(config.test_csv)
    bench = benchmarks.get(config.benchmark)
    X = sample(SamplerSpec(config.test_sampler, config.test_size, bench.box, config.test_seed))
    return bench.dataset(X, with_gradients=False)


def _hf_data(config: StudyConfig, n: int, seed: int, pool: Dataset | None) -> Dataset:
    if pool is None:
        bench = benchmarks.get(config.benchmark)
        return bench.dataset(sample(SamplerSpec(config.hf_sampler, n, bench.box, seed)))
    if n > len(pool):
        raise ValueError(f"requested {n} HF samples, the dataset holds {len(pool)}")
    idx = np.sort(np.random.default_rng(seed).permutation(len(pool))[:n])
    return pool.subset(idx)


def _box(config: StudyConfig, pool: Dataset | None):
    if config.pipeline.box is not None:
        return config.pipeline.box
    if pool is None:
        return benchmarks.get(config.benchmark).box
    return None


def _train_external(hf: Dataset, lower: list, pcfg: PipelineConfig, surrogate_level: bool, seed: int):
    s_surf, s_extra, s_mf = (int(s) for s in np.random.SeedSequence(seed).generate_state(3))
    datasets = list(lower) + [hf]
    surface = fit_surface(hf, pcfg, s_surf) if surrogate_level else None
    if surface is not None:
        base = datasets[0]
        extra = sample_extra(pcfg.n_lf_extra, pcfg.box, base, pcfg.lf_sampler, s_extra)
        datasets.insert(0, build_lowfidelity(Dataset(base.inputs, base.outputs), surface, extra))
    noise = [pcfg.noise_lf] * (len(datasets) - 1) + [pcfg.noise_hf]
    model = nargp.train(datasets, noise=noise, restarts=pcfg.restarts_mf, seed=s_mf,
                        mc_samples=pcfg.mc_samples, box=pcfg.box)
    return model, surface


def _predict_hf_gp(model: gp.GpModel, box, X):
    Z = box.to_reference(X) if box is not None else X
    return gp.predict(model, Z, full_cov=False)[0]


def _run_cell(config: StudyConfig, value: int, restart: int, grid_index: int, test: Dataset,
              pool: Dataset | None, lower: list):
    s_data, s_pipe, s_hf = _cell_seeds(config.seed_base, restart, grid_index)
    n_hf = value if config.sweep == "n_hf" else config.n_hf
    box = _box(config, pool)
    pcfg = PipelineConfig.from_dict({**config.pipeline.to_dict(), "seed": s_pipe, "box": box})
    if config.sweep == "n_lf_extra":
        pcfg.n_lf_extra = value
    preds, timings, extra = {}, {}, {}
    hf = _hf_data(config, n_hf, s_data, pool)

    t = time.perf_counter()
    if pool is not None and lower:
        model, surface = _train_external(hf, lower, pcfg, config.surrogate_level, s_pipe)
        if surface is None:
            surface = fit_surface(hf, pcfg, s_pipe)
    else:
        design = design_nargp(hf, pcfg)
        model, surface = design.model, design.surface
    preds["MF"] = model.predict(test.inputs)[0]
    timings["MF"] = time.perf_counter() - t
    extra["lf_level"] = nargp.predict_level(model, model.n_levels - 1, test.inputs)[0]

    t = time.perf_counter()
    preds["LF"] = surface.predict(test.inputs)[0]
    timings["LF"] = time.perf_counter() - t

    t = time.perf_counter()
    data = hf.normalized(box) if box is not None else hf
    hf_gp = gp.fit(data.inputs, data.outputs, noise=pcfg.noise_hf, n_restarts=pcfg.restarts_surface,
                   seed=s_hf)
    preds["HF"] = _predict_hf_gp(hf_gp, box, test.inputs)
    timings["HF"] = time.perf_counter() - t

    if config.reversed:
        t = time.perf_counter()
        rev = design_reversed(hf, pcfg, surface=surface, hf_gp=hf_gp)
        preds["MF_reversed"] = rev.model.predict(test.inputs)[0]
        timings["MF_reversed"] = time.perf_counter() - t
    return preds, timings, extra


def _aggregate(cells: list, grid: list, models: list) -> list:
    rows = []
    for v in grid:
        for name in models:
            vals = [c["r2"][name] for c in cells if c["grid_value"] == v and c["r2"].get(name) is not None]
            rows.append({
                "grid_value": v,
                "model": name,
                "mean": float(np.mean(vals)) if vals else None,
                "min": float(np.min(vals)) if vals else None,
                "max": float(np.max(vals)) if vals else None,
                "n_ok": len(vals),
            })
    return rows


def run_study(config: StudyConfig) -> StudyResult:
    """Train MF, HF and LF models for every grid value and outer restart and
    score them on a shared test set. Failures are recorded per cell."""
    test = _test_set(config)
    pool = None if config.hf_csv is None else read_csv(config.hf_csv)
    lower = [read_csv(p) for p in config.lower_csvs]
    k_out = CV_MODES[config.cv]
    models = ["MF", "HF", "LF"] + (["MF_reversed"] if config.reversed else [])
    cells, cv, correlations, timings = [], [], [], {}
    for gi, value in enumerate(config.grid):
        for i in range(config.outer_restarts):
            cell = {"grid_value": value, "restart": i, "seed": config.seed_base + i,
                    "r2": {m: None for m in models}, "error": None}
            try:
                preds, times, extra = _run_cell(config, value, i, gi, test, pool, lower)
            except Exception as exc:  # recorded, the sweep continues
                log.warning("cell %s/%d failed: %s", value, i, exc)
                cell["error"] = f"{type(exc).__name__}: {exc}"
                cells.append(cell)
                continue
            for name, p in preds.items():
                cell["r2"][name] = r2_score(test.outputs, p)
                timings[f"{value}/{i}/{name}"] = times[name]
            corr = correlation_data(preds["MF"], extra["lf_level"])
            correlations.append({"grid_value": value, "restart": i, "pair": "lf_level_vs_mf",
                                 "pearson": corr.pearson, "rows": corr.rows()})
            truth = correlation_data(preds["MF"], test.outputs)
            correlations.append({"grid_value": value, "restart": i, "pair": "truth_vs_mf",
                                 "pearson": truth.pearson, "rows": truth.rows()})
            if k_out:
                cv.append({"grid_value": value, "restart": i,
                           "scores": cv_scores(test.outputs, preds, k_out)})
            cells.append(cell)
    result = StudyResult(config.to_dict(), cells, _aggregate(cells, config.grid, models), cv,
                         correlations, timings)
    if config.output_dir is not None:
        result.write(config.output_dir)
    return result


def cross_validate(config: StudyConfig, k_out: int) -> StudyResult:
    """run_study with leave-``k_out``-out re-scoring of the trained models."""
    mode = {1: "leave_one_out", 2: "leave_two_out"}.get(k_out)
    if mode is None:
        raise ValueError("k_out must be 1 or 2")
    T = len(read_csv(config.test_csv)) if config.test_csv else config.test_size
    check_batch_count(T, k_out)
    return run_study(StudyConfig.from_dict({**config.to_dict(), "cv": mode}))
