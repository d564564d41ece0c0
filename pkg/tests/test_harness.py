import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nargpas import harness
from nargpas.core import Dataset, write_csv
from nargpas.pipeline import PipelineConfig, PipelineError

FAST = PipelineConfig(n_lf_extra=20, restarts_surface=2, restarts_mf=2, mc_samples=30)


def test_r2_examples():
    y = np.array([0.0, 1.0, 2.0])
    assert harness.r2_score(y, y) == 1.0
    assert harness.r2_score(y, np.full(3, y.mean())) == 0.0
    assert harness.r2_score(y, [0.0, 1.0, 1.0]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        harness.r2_score([1.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        harness.r2_score([1.0], [1.0])
    with pytest.raises(ValueError):
        harness.r2_score([1.0, 2.0], [1.0])


@given(st.integers(0, 10_000))
def test_r2_at_most_one(seed):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=10)
    assert harness.r2_score(y, rng.normal(size=10)) <= 1.0


def test_pearson_examples():
    r = np.array([1.0, 2.0, 4.0])
    assert harness.correlation_data(r, r).pearson == pytest.approx(1.0)
    assert harness.correlation_data(-r, r).pearson == pytest.approx(-1.0)
    p = np.array([2.0, 1.0, 5.0])
    # hand formula on deviations (-4/3, -1/3, 5/3) and (-2/3, -5/3, 7/3)
    num = (-4 / 3) * (-2 / 3) + (-1 / 3) * (-5 / 3) + (5 / 3) * (7 / 3)
    den = math.sqrt((16 / 9 + 1 / 9 + 25 / 9) * (4 / 9 + 25 / 9 + 49 / 9))
    c = harness.correlation_data(p, r)
    assert c.pearson == pytest.approx(num / den, rel=1e-14)
    assert c.rows() == [(1.0, 2.0), (2.0, 1.0), (4.0, 5.0)]
    with pytest.raises(ValueError):
        harness.correlation_data([1.0, 2.0], [1.0, 2.0, 3.0])


def test_cv_enumeration():
    assert harness.cv_batches(3, 1).tolist() == [[0], [1], [2]]
    assert harness.cv_batches(50, 1).shape == (50, 1)
    assert harness.cv_batches(50, 2).shape == (1225, 2)
    with pytest.raises(ValueError):
        harness.cv_batches(2, 2)
    with pytest.raises(ValueError):
        harness.cv_batches(2000, 2)
    with pytest.raises(ValueError):
        harness.cv_batches(10, 3)


@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_batch_r2_matches_direct(seed, k):
    rng = np.random.default_rng(seed)
    y, p = rng.normal(size=9), rng.normal(size=9)
    left = harness.cv_batches(9, k)
    fast = harness.batch_r2(y, p, left)
    for b, out in enumerate(left):
        keep = np.setdiff1d(np.arange(9), out)
        assert fast[b] == pytest.approx(harness.r2_score(y[keep], p[keep]), abs=1e-12)


def test_cv_scores_fields_and_degenerate_comparison():
    rng = np.random.default_rng(0)
    y = rng.normal(size=50)
    p = y + 0.1 * rng.normal(size=50)
    s = harness.cv_scores(y, {"MF": p, "HF": p.copy()}, 2)
    assert s["MF"]["batches"] == 1225
    for key in ("mean", "std", "lower95", "upper95", "min", "max"):
        assert s["MF"][key] == s["HF"][key]
    a = s["MF"]
    assert a["min"] <= a["lower95"] <= a["mean"] <= a["upper95"] <= a["max"]
    assert a["at_min_batch"]["HF"] == a["min"] and len(a["min_batch"]) == 2
    assert a["upper95"] - a["mean"] == pytest.approx(1.96 * a["std"] / math.sqrt(1225))


def test_cv_mean_consistency():
    # with identical predictions the leave-one-out batches average back to the full score
    rng = np.random.default_rng(1)
    y = rng.normal(size=40)
    p = y + 0.05 * rng.normal(size=40)
    s = harness.cv_scores(y, {"m": p}, 1)["m"]
    assert s["mean"] == pytest.approx(harness.r2_score(y, p), abs=5e-3)


def test_study_config_validation():
    with pytest.raises(ValueError):
        harness.StudyConfig(grid=[])
    with pytest.raises(ValueError):
        harness.StudyConfig(sweep="n_test")
    with pytest.raises(ValueError):
        harness.StudyConfig(cv="k_fold")
    with pytest.raises(ValueError):
        harness.StudyConfig(benchmark=None)
    with pytest.raises(KeyError):
        harness.StudyConfig(benchmark="borehole")
    cfg = harness.StudyConfig(benchmark="ebola", grid=[10], pipeline={"reducer": "AS"})
    assert harness.StudyConfig.from_json(cfg.to_json()).to_dict() == cfg.to_dict()


@pytest.fixture(scope="module")
def small_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    cfg = harness.StudyConfig(benchmark="paraboloid", grid=[20, 40], outer_restarts=2, test_size=60,
                              cv="leave_one_out", reversed=True, pipeline=FAST, output_dir=str(out))
    return cfg, harness.run_study(cfg), out


def test_study_shape_and_bounds(small_study):
    cfg, res, _ = small_study
    assert len(res.cells) == 4
    vals = [c["r2"][m] for c in res.cells for m in ("MF", "HF", "LF")]
    assert len(vals) == 12 and all(v <= 1.0 for v in vals)
    for a in res.aggregates:
        assert a["min"] <= a["mean"] <= a["max"]
        raw = res.r2(a["model"], a["grid_value"])
        assert a["mean"] == pytest.approx(np.mean(raw))
    assert res.aggregate("MF_reversed", 40)["n_ok"] == 2


def test_study_outputs(small_study):
    _, res, out = small_study
    for name in ("study_result.json", "timings.json", "r2_sweep.csv", "correlations.csv", "cv_bounds.csv"):
        assert (out / name).exists()
    doc = json.loads((out / "study_result.json").read_text())
    assert "timings" not in doc and len(doc["cv"]) == 4
    assert set(res.timings) >= {"20/0/MF", "40/1/HF"}
    header = (out / "r2_sweep.csv").read_text().splitlines()[0]
    assert header == "grid_value,model,mean,min,max,n_ok"
    lines = (out / "correlations.csv").read_text().splitlines()
    assert len(lines) == 1 + 4 * 2 * 60


def test_study_determinism(small_study):
    cfg, res, _ = small_study
    again = harness.run_study(harness.StudyConfig.from_dict({**cfg.to_dict(), "output_dir": None}))
    a, b = res.to_dict(), again.to_dict()
    a["config"]["output_dir"] = b["config"]["output_dir"] = None
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_failures_recorded_per_cell(monkeypatch):
    real = harness.design_nargp

    def flaky(hf, cfg):
        if len(hf.outputs) == 15:
            raise PipelineError(4, np.linalg.LinAlgError("forced"))
        return real(hf, cfg)

    monkeypatch.setattr(harness, "design_nargp", flaky)
    cfg = harness.StudyConfig(benchmark="paraboloid", grid=[15, 20], outer_restarts=1, test_size=30,
                              pipeline=FAST)
    res = harness.run_study(cfg)
    bad = [c for c in res.cells if c["grid_value"] == 15][0]
    assert "forced" in bad["error"] and bad["r2"]["MF"] is None
    assert res.aggregate("MF", 15)["n_ok"] == 0 and res.aggregate("MF", 20)["n_ok"] == 1


def test_lf_extra_sweep():
    cfg = harness.StudyConfig(benchmark="paraboloid", sweep="n_lf_extra", grid=[0, 10], n_hf=15,
                              outer_restarts=1, test_size=30, pipeline=FAST)
    res = harness.run_study(cfg)
    assert [c["error"] for c in res.cells] == [None, None]


def test_external_three_level_study(tmp_path):
    rng = np.random.default_rng(0)

    def truth(X):
        return np.sin(2 * X[:, 0] + X[:, 1])

    X = rng.uniform(-1, 1, (60, 2))
    mid_x = np.vstack([X, rng.uniform(-1, 1, (40, 2))])
    write_csv(Dataset(X, truth(X)), tmp_path / "hf.csv")
    write_csv(Dataset(mid_x, 0.8 * truth(mid_x) + 0.1), tmp_path / "mid.csv")
    T = rng.uniform(-1, 1, (30, 2))
    write_csv(Dataset(T, truth(T)), tmp_path / "test.csv")
    cfg = harness.StudyConfig(benchmark=None, hf_csv=str(tmp_path / "hf.csv"),
                              lower_csvs=[str(tmp_path / "mid.csv")], surrogate_level=True,
                              test_csv=str(tmp_path / "test.csv"), grid=[30], outer_restarts=1,
                              pipeline=FAST)
    res = harness.cross_validate(cfg, 2)
    cell = res.cells[0]
    assert cell["error"] is None and cell["r2"]["MF"] > 0.5
    assert res.cv[0]["scores"]["MF"]["batches"] == math.comb(30, 2)


def test_cross_validate_guard():
    cfg = harness.StudyConfig(benchmark="paraboloid", grid=[10], test_size=5000, outer_restarts=1)
    with pytest.raises(ValueError):
        harness.cross_validate(cfg, 2)
