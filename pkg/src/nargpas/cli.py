"""Command-line entry point.

Exit status: 0 on success, 2 for configuration or input errors, 3 for
numerical failures (factorisation, optimisation, divergence).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import benchmarks, gp, harness, nargp
from .active_subspace import LinearReducer, active_subspace, write_summary_csv
from .core import Box, HierarchyError, read_csv, read_inputs_csv, write_csv, write_inputs_csv
from .nll import DivergenceError, NllConfig, NllReducer, train_nll
from .pipeline import PipelineConfig, PipelineError, design_nargp, design_reversed
from .sampling import SamplerSpec, sample

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (np.linalg.LinAlgError, gp.FitError, DivergenceError, FloatingPointError)


class ConfigError(ValueError):
    pass


def _box_arg(args) -> Box | None:
    if getattr(args, "benchmark", None):
        return benchmarks.get(args.benchmark).box
    if getattr(args, "box", None):
        return Box.from_dict(json.loads(Path(args.box).read_text(encoding="utf-8")))
    return None


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def cmd_sample(args) -> None:
    box = _box_arg(args)
    if box is None:
        if args.dim is None:
            raise ConfigError("give --benchmark, --box or --dim")
        box = Box.unit(args.dim)
    X = sample(SamplerSpec(args.kind, args.n, box, args.seed, args.skip))
    write_inputs_csv(X, args.out)


def cmd_bench(args) -> None:
    bench = benchmarks.get(args.benchmark)
    if args.inputs:
        X = read_inputs_csv(args.inputs)
    else:
        X = sample(SamplerSpec(args.kind, args.n, bench.box, args.seed))
    write_csv(bench.dataset(X, with_gradients=not args.no_gradients), args.out)


def cmd_reduce(args) -> None:
    data = read_csv(args.data)
    box = _box_arg(args)
    if args.method.upper() == "AS":
        dec = active_subspace(data, box, args.active_dim, args.k_neighbors)
        reducer = LinearReducer(dec.W1, box, dec)
        print("eigenvalues:", " ".join(f"{v:.6g}" for v in dec.eigenvalues))
        print("active dimension:", dec.active_dim, "(degenerate)" if dec.degenerate else "")
    else:
        if not data.has_gradients:
            raise ConfigError("level-set learning needs a dataset with gradient columns")
        cfg = NllConfig(layers=args.layers, epochs=args.epochs, lr=args.lr, seed=args.seed)
        reducer = NllReducer(train_nll(data, cfg, box=box), box)
    write_summary_csv(reducer, data, args.out)
    if args.reducer_out:
        Path(args.reducer_out).write_text(json.dumps(reducer.to_dict()), encoding="utf-8")


def _pipeline_config(args) -> PipelineConfig:
    d = _load_json(args.config) if args.config else {}
    for key in ("reducer", "n_lf_extra", "seed", "mc_samples"):
        value = getattr(args, key, None)
        if value is not None:
            d[key] = value
    box = _box_arg(args)
    if box is not None:
        d["box"] = box.to_dict()
    try:
        return PipelineConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_train(args) -> None:
    hf = read_csv(args.data)
    config = _pipeline_config(args)
    design = design_reversed(hf, config) if args.reversed else design_nargp(hf, config)
    doc = {"kind": "mf", "config": config.to_dict(), "model": design.model.to_dict(),
           "surface": design.surface.to_dict()}
    Path(args.out).write_text(json.dumps(doc), encoding="utf-8")


def _load_model(path: str):
    doc = _load_json(path)
    kind = doc.get("kind")
    if kind == "mf":
        return nargp.MfModel.from_dict(doc["model"])
    if kind == "gp" or "family" in doc:
        return gp.GpModel.from_dict(doc.get("model", doc))
    raise ConfigError(f"{path} is not a model document")


def cmd_predict(args) -> None:
    model = _load_model(args.model)
    X = read_inputs_csv(args.inputs)
    if isinstance(model, nargp.MfModel):
        if args.mc_samples:
            model = model.with_mc_samples(args.mc_samples)
        mean, var = model.predict(X)
    else:
        mean, var = gp.predict(model, X, full_cov=False)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["mean", "variance"])
        for a, b in zip(mean, var):
            w.writerow([format(float(a), ".17g"), format(float(b), ".17g")])


def _study_config(path: str, out: str | None) -> harness.StudyConfig:
    d = _load_json(path)
    if out is not None:
        d["output_dir"] = out
    try:
        return harness.StudyConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_study(args) -> None:
    result = harness.run_study(_study_config(args.config, args.out))
    _summarise(result)


def cmd_cv(args) -> None:
    result = harness.cross_validate(_study_config(args.config, args.out), args.k_out)
    _summarise(result)
    for entry in result.cv:
        for name, s in entry["scores"].items():
            print(f"cv n={entry['grid_value']} restart={entry['restart']} {name}: "
                  f"mean {s['mean']:.4f} [{s['lower95']:.4f}, {s['upper95']:.4f}] "
                  f"min {s['min']:.4f} max {s['max']:.4f} ({s['batches']} batches)")


def _summarise(result: harness.StudyResult) -> None:
    for a in result.aggregates:
        if a["mean"] is None:
            print(f"{a['grid_value']:>6} {a['model']:<12} all cells failed")
        else:
            print(f"{a['grid_value']:>6} {a['model']:<12} mean {a['mean']:.4f} "
                  f"min {a['min']:.4f} max {a['max']:.4f}")
    failed = [c for c in result.cells if c["error"]]
    for c in failed:
        print(f"failed cell {c['grid_value']}/{c['restart']}: {c['error']}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nargpas", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="write a design of experiments as CSV")
    s.add_argument("--kind", choices=["lhs", "sobol", "uniform"], default="lhs")
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--benchmark")
    s.add_argument("--box", help="JSON file with lower/upper")
    s.add_argument("--dim", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--skip", type=int, default=1)
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("bench", help="evaluate a benchmark into a dataset CSV")
    s.add_argument("benchmark", choices=sorted(benchmarks.BENCHMARKS))
    s.add_argument("--inputs", help="input CSV; sampled when absent")
    s.add_argument("--kind", choices=["lhs", "sobol", "uniform"], default="lhs")
    s.add_argument("-n", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-gradients", action="store_true")
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("reduce", help="active subspace or level-set fit; summary-plot CSV")
    s.add_argument("data")
    s.add_argument("--method", choices=["AS", "NLL", "as", "nll"], default="AS")
    s.add_argument("--benchmark", help="use the benchmark box for normalisation")
    s.add_argument("--box")
    s.add_argument("--active-dim", type=int)
    s.add_argument("--k-neighbors", type=int)
    s.add_argument("--layers", type=int, default=10)
    s.add_argument("--epochs", type=int, default=20000)
    s.add_argument("--lr", type=float, default=0.03)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--reducer-out")
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("train", help="run the reduced-surface multi-fidelity pipeline")
    s.add_argument("data", help="high-fidelity dataset CSV (gradients optional)")
    s.add_argument("--config", help="PipelineConfig JSON")
    s.add_argument("--benchmark")
    s.add_argument("--box")
    s.add_argument("--reducer", choices=["AS", "NLL"])
    s.add_argument("--n-lf-extra", dest="n_lf_extra", type=int)
    s.add_argument("--mc-samples", dest="mc_samples", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--reversed", action="store_true")
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="predict with a saved model")
    s.add_argument("model")
    s.add_argument("inputs")
    s.add_argument("--mc-samples", type=int)
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("study", help="R2 sweep over outer restarts")
    s.add_argument("config", help="StudyConfig JSON")
    s.add_argument("-o", "--out", help="output directory")
    s.set_defaults(func=cmd_study)

    s = sub.add_parser("cv", help="leave-one-out / leave-two-out re-scoring")
    s.add_argument("config")
    s.add_argument("--k-out", type=int, choices=[1, 2], default=1)
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_cv)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        numeric = isinstance(exc.cause, NUMERIC_ERRORS)
        return EXIT_NUMERIC if numeric else EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, HierarchyError, ValueError, KeyError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
