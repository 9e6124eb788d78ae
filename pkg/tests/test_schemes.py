import json

import numpy as np
import pytest

from pssl.config import (COLD_TURKEY, DAGGER, PURE_STEREO, TRAINING_WHEELS, ExperimentConfig,
                         Phases, Scheme, VBoWParams)
from pssl.schemes import (FRAME_FIELDS, Phase, Source, dictionary_bootstrap, run_experiment,
                          run_streams, select_control_source)
from pssl.world import CameraModel


def small_config(**kw):
    base = dict(phases=Phases(time_scale=0.1),
                vbow=VBoWParams(kohonen_iterations=3000, warmup_frames=40))
    base.update(kw)
    return ExperimentConfig(**base).validate()


def test_source_selection_table():
    rng = np.random.default_rng(0)
    for scheme in (COLD_TURKEY, DAGGER, TRAINING_WHEELS, PURE_STEREO):
        assert select_control_source(scheme, Phase.INITIAL, rng) is Source.STEREO
    assert select_control_source(COLD_TURKEY, Phase.LEARNING, rng) is Source.STEREO
    assert select_control_source(TRAINING_WHEELS, Phase.LEARNING, rng) is Source.MONO
    for scheme in (COLD_TURKEY, DAGGER, TRAINING_WHEELS):
        assert select_control_source(scheme, Phase.TEST, rng) is Source.MONO
    assert select_control_source(PURE_STEREO, Phase.TEST, rng) is Source.STEREO


def test_dagger_mixture_rate():
    rng = np.random.default_rng(1)
    draws = [select_control_source(DAGGER, Phase.LEARNING, rng) for _ in range(20_000)]
    assert np.mean([d is Source.STEREO for d in draws]) == pytest.approx(0.25, abs=0.01)
    assert all(select_control_source(Scheme("dagger", 1.0), Phase.LEARNING, rng)
               is Source.STEREO for _ in range(100))


def test_streams_are_reproducible_and_independent():
    a, b = run_streams(5), run_streams(5)
    assert a["start"].random() == b["start"].random()
    assert run_streams(5)["start"].random() != run_streams(5)["noise"].random()


@pytest.fixture(scope="module")
def logs():
    cfg = small_config()
    d, _ = dictionary_bootstrap(cfg, 3)
    return cfg, {s.label: run_experiment(cfg, 3, s, d)
                 for s in (COLD_TURKEY, DAGGER, TRAINING_WHEELS, PURE_STEREO)}


def test_phase_lengths(logs):
    cfg, runs = logs
    for log in runs.values():
        counts = [int(log.phase_mask(p).sum()) for p in Phase]
        assert tuple(counts) == cfg.phases.frames(cfg.fps) == (60, 240, 300)


def test_common_start_pose_across_schemes(logs):
    _, runs = logs
    starts = {(log.frames["x"][0], log.frames["y"][0], log.frames["heading"][0])
              for log in runs.values()}
    assert len(starts) == 1


def test_initial_phase_identical_across_schemes(logs):
    # stereo controls every scheme until learning starts
    _, runs = logs
    ref = runs["pure_stereo"].frames
    n = int(runs["pure_stereo"].phase_mask(Phase.INITIAL).sum())
    for log in runs.values():
        np.testing.assert_array_equal(log.frames["x"][:n], ref["x"][:n])
        np.testing.assert_array_equal(log.frames["lam_stereo"][:n], ref["lam_stereo"][:n])


def test_overrides_only_under_mono_control(logs):
    cfg, runs = logs
    for log in runs.values():
        f = log.frames
        ov = f["override"].astype(bool)
        assert np.all(f["source"][ov] == Source.MONO)
        assert np.all(f["lam_stereo"][ov] > cfg.t_override)
        assert np.all(f["picked"][ov] == 1)
    assert runs["pure_stereo"].counters["overrides_test"] == 0
    cold = runs["cold_turkey"]
    assert cold.counters["overrides_learning"] == 0


def test_sources_follow_scheme(logs):
    _, runs = logs
    for label, log in runs.items():
        src = log.frames["source"]
        learn = log.phase_mask(Phase.LEARNING)
        test = log.phase_mask(Phase.TEST)
        assert np.all(src[log.phase_mask(Phase.INITIAL)] == Source.STEREO)
        if label == "pure_stereo":
            assert np.all(src == Source.STEREO)
            continue
        assert np.all(src[test] == Source.MONO)
        if label == "cold_turkey":
            assert np.all(src[learn] == Source.STEREO)
        if label == "training_wheels":
            assert np.all(src[learn] == Source.MONO)


def test_counters_recomputable_from_frames(logs):
    _, runs = logs
    for log in runs.values():
        assert log.recount() == log.counters
        test = log.phase_mask(Phase.TEST)
        assert log.counters["turns_test"] == int(log.frames["picked"][test].sum())


def test_mono_estimate_only_after_first_sample(logs):
    _, runs = logs
    f = runs["cold_turkey"].frames
    assert np.isnan(f["lam_mono"][0])
    assert not np.any(np.isnan(f["lam_mono"][1:]))
    assert np.all(np.isnan(runs["pure_stereo"].frames["lam_mono"]))


def test_metrics_present(logs):
    _, runs = logs
    m = runs["training_wheels"].metrics
    assert set(m) == {"mse", "tpr", "fpr", "auc"}
    assert m["mse"] >= 0
    assert runs["pure_stereo"].metrics == {}


def test_oracle_mono_source_matches_stereo_turns():
    cfg = small_config(mono_source="oracle")
    log = run_experiment(cfg, 1, TRAINING_WHEELS)
    f = log.frames
    np.testing.assert_array_equal(f["lam_mono"], f["lam_stereo"])


def test_run_is_deterministic():
    cfg = small_config()
    a = run_experiment(cfg, 2, DAGGER)
    b = run_experiment(cfg, 2, DAGGER)
    for k in FRAME_FIELDS:
        np.testing.assert_array_equal(a.frames[k], b.frames[k])


def test_log_write(tmp_path, logs):
    _, runs = logs
    log = runs["dagger(0.25)"]
    log.write(tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["scheme"] == "dagger(0.25)"
    assert summary["overrides_test"] == log.counters["overrides_test"]
    lines = (tmp_path / "frames.csv").read_text().splitlines()
    assert lines[0].split(",") == list(FRAME_FIELDS)
    assert len(lines) == 1 + len(log.frames["frame"])
    for name in ("turning", "forward"):
        assert (tmp_path / f"heatmap_{name}.pgm").read_bytes().startswith(b"P5")
        grid = np.loadtxt(tmp_path / f"heatmap_{name}.csv", delimiter=",")
        assert grid.shape == (20, 20)
    total = sum(np.loadtxt(tmp_path / f"heatmap_{n}.csv", delimiter=",").sum()
                for n in ("turning", "forward"))
    assert total <= log.counters["frames_test"]


def test_identity_diagnostic_never_overrides():
    # mono replaced by the noiseless stereo value turns before ever reaching t_override
    cfg = small_config(mono_source="oracle", camera=CameraModel(noise_sigma=0.0),
                       phases=Phases(time_scale=0.3))
    for seed in range(3):
        for scheme in (COLD_TURKEY, DAGGER, TRAINING_WHEELS):
            log = run_experiment(cfg, seed, scheme)
            assert log.counters["overrides_test"] == 0
            assert log.counters["overrides_learning"] == 0


def test_heatmap_mass_equals_phase_frames(logs):
    _, runs = logs
    for log in runs.values():
        for phase in Phase:
            assert log.heatmap(phase).sum() == log.phase_mask(phase).sum()


def test_dictionary_bootstrap_is_deterministic_and_spread():
    cfg = small_config()
    a, contacts = dictionary_bootstrap(cfg, 9)
    b, _ = dictionary_bootstrap(cfg, 9)
    np.testing.assert_array_equal(a.intensity, b.intensity)
    np.testing.assert_array_equal(a.gradient, b.gradient)
    assert contacts == 0
    for cents in (a.intensity, a.gradient):
        d = np.linalg.norm(cents[:, None] - cents[None], axis=2)
        assert d[np.triu_indices(len(cents), 1)].min() > 0
