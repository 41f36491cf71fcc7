"""Experiment orchestration: config validation, CSV contract, reproducibility."""

import json

import numpy as np
import pytest

from turbokal.runner import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    run_experiment,
    simulate_packet,
)

SMALL = dict(
    info_bytes=12,
    n_sc=8,
    mod_order=4,
    n_itr=2,
    n_packets=3,
    snr_db=(30.0,),
    seed=77,
)


def test_defaults_validate():
    ExperimentConfig().validate()


@pytest.mark.parametrize(
    "patch",
    [
        {"kind": "nonsense"},
        {"n_tx": 1},
        {"n_tx": 3, "n_rx": 2},
        {"mod_order": 8},
        {"n_itr": 0},
        {"n_packets": 0},
        {"estimators": ("proposed", "oracle")},
        {"snr_db": ()},
        {"workers": 0},
    ],
)
def test_validate_rejects(patch):
    with pytest.raises(ConfigError):
        ExperimentConfig(**patch).validate()


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown config keys.*n_iterations"):
        ExperimentConfig.from_dict({"n_iterations": 7})


def test_from_dict_coerces_lists():
    cfg = ExperimentConfig.from_dict(
        {"estimators": ["perfect"], "snr_db": [10.0, 12.0]}
    )
    assert cfg.estimators == ("perfect",)
    assert cfg.snr_db == (10.0, 12.0)


def test_from_yaml(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("kind: per-sweep\nsnr_db: [8, 10]\nestimators: [proposed]\n")
    cfg = ExperimentConfig.from_yaml(path)
    assert cfg.snr_db == (8, 10)


def test_threshold_default_depends_on_geometry():
    assert ExperimentConfig(n_tx=2).c_value == 2.5
    assert ExperimentConfig(n_tx=3, n_rx=3).c_value == 2.0
    assert ExperimentConfig(c=1.25).c_value == 1.25


def test_per_sweep_outputs_and_header(tmp_path):
    cfg = ExperimentConfig(estimators=("perfect", "proposed"), **SMALL)
    records = run_experiment(cfg, tmp_path)
    text = (tmp_path / "results.csv").read_text().splitlines()
    assert text[0] == ",".join(CSV_HEADER)
    assert len(text) == 1 + len(records)
    assert (tmp_path / "diag.csv").exists()
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["config"]["seed"] == 77
    per = [r for r in records if r.series == "per"]
    assert {r.estimator for r in per} == {"perfect", "proposed"}
    assert all(r.n_packets == 3 for r in per)
    perfect = next(r for r in per if r.estimator == "perfect")
    assert perfect.y == 0.0  # 30 dB, oracle channel: no packet losses


def test_reruns_are_byte_identical(tmp_path):
    cfg = ExperimentConfig(estimators=("proposed",), **SMALL)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    assert (tmp_path / "a/results.csv").read_bytes() == (
        tmp_path / "b/results.csv"
    ).read_bytes()
    assert (tmp_path / "a/diag.csv").read_bytes() == (
        tmp_path / "b/diag.csv"
    ).read_bytes()


def test_variants_share_realizations():
    base = dict(SMALL)
    solo = ExperimentConfig(estimators=("perfect",), **base)
    both = ExperimentConfig(estimators=("perfect", "proposed"), **base)
    res_solo = simulate_packet(solo, 0, 0)
    res_both = simulate_packet(both, 0, 0)
    assert res_solo["perfect"].bit_errors == res_both["perfect"].bit_errors
    np.testing.assert_array_equal(
        res_solo["perfect"].decoded[0], res_both["perfect"].decoded[0]
    )


def test_mse_openloop_records(tmp_path):
    cfg = ExperimentConfig(
        kind="mse-openloop", open_loop_nd=6, snr_db=(14.0,), seed=3, n_sc=16
    )
    records = run_experiment(cfg, tmp_path)
    series = {r.series for r in records}
    assert series == {"mse_openloop", "mse_openloop_pred"}
    measured = [r.y for r in records if r.series == "mse_openloop"]
    assert len(measured) == 7  # prior point plus one per feedback row
    assert measured[-1] < measured[0]


def test_exit_chart_records(tmp_path):
    cfg = ExperimentConfig(
        kind="exit-chart",
        estimators=("perfect",),
        min_good_packets=2,
        **SMALL,
    )
    records = run_experiment(cfg, tmp_path)
    assert len(records) == 2 * cfg.n_itr
    assert all(0.0 <= r.y <= 1.0 for r in records)
    mi_out = [r.y for r in records if r.series == "mi_out"]
    assert mi_out[-1] >= mi_out[0]


def test_corr_probe_needs_errors(tmp_path):
    cfg = ExperimentConfig(
        kind="corr-probe",
        estimators=("proposed",),
        corr_target_packets=1,
        **{**SMALL, "snr_db": (40.0,), "n_packets": 2},
    )
    with pytest.raises(RuntimeError, match="no erroneous packets"):
        run_experiment(cfg, tmp_path)


def test_corr_probe_records(tmp_path):
    cfg = ExperimentConfig(
        kind="corr-probe",
        estimators=("proposed",),
        corr_target_packets=2,
        **{**SMALL, "snr_db": (0.0,), "n_packets": 10},
    )
    records = run_experiment(cfg, tmp_path)
    series = {r.series for r in records}
    assert {"corr_pre", "corr_post", "corr_mean_pre", "corr_mean_post"} <= series
    mean_pre = next(r.y for r in records if r.series == "corr_mean_pre")
    assert 0.0 <= mean_pre <= 1.0
