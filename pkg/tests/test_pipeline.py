import json
import math

import numpy as np
import pytest

from helpers import tiny_config
from oracles import PUBLISHED_METRICS, PUBLISHED_ACCURACY, PUBLISHED_CM
from setiedge.imgproc import Pipeline, preprocess, resize_area, smooth_gaussian
from setiedge.nn import load_checkpoint
from setiedge.pipeline import stages
from setiedge.pipeline.config import ConfigError, HashMismatch, RunConfig, canonical_hash
from setiedge.sigsim import CLASS_LABELS, SignalClass, SimParams, derive_seed, quantize, simulate
from setiedge.spectro import GrayImage, read_pgm, write_pgm


@pytest.fixture(scope="module")
def tiny(tmp_path_factory):
    """A generated, rendered and Sobel-preprocessed tiny dataset."""
    cfg = tiny_config(tmp_path_factory.mktemp("tiny"))
    manifest = stages.cmd_generate(cfg)
    stages.cmd_render(cfg, manifest)
    stages.cmd_preprocess(cfg, manifest, "sobel")
    return cfg, manifest


# --- config ---------------------------------------------------------------

def test_bundled_desk_defaults():
    cfg = RunConfig.load()
    ds = cfg.raw["dataset"]
    assert ds["samples_per_class"] == 120
    assert ds["ranges"]["snr_db"] == [10.0, 20.0]
    assert cfg.raw["training"]["batch_size"] == 16
    assert cfg.raw["training"]["epochs"] <= 30
    assert cfg.rounds == [0]


def test_hash_ignores_paths_and_tracks_content(tmp_path):
    a = RunConfig.load()
    b = a.with_paths(tmp_path / "x", tmp_path / "y")
    assert a.config_hash() == b.config_hash() and a.data_hash() == b.data_hash()
    c = RunConfig.load(overrides={"training": {"epochs": 3}})
    assert c.config_hash() != a.config_hash() and c.data_hash() == a.data_hash()
    assert a.config_hash("origin") != a.config_hash("sobel")
    assert canonical_hash({"a": 1, "b": 2}) == canonical_hash({"b": 2, "a": 1})


def test_seed_override_changes_every_seed():
    a = RunConfig.load(seed=5)
    assert a.raw["dataset"]["master_seed"] == 5
    assert a.raw["training"]["seed"] == 6 and a.raw["evaluation"]["seed"] == 7
    with pytest.raises(ConfigError):
        RunConfig.load(seed=-1)


def test_config_file_merge_and_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"base": "full", "training": {"epochs": 4}}))
    cfg = RunConfig.load(p)
    assert cfg.raw["dataset"]["samples_per_class"] == 1000 and cfg.raw["training"]["epochs"] == 4
    p.write_text("{oops")
    with pytest.raises(ConfigError):
        RunConfig.load(p)
    for bad in ({"preprocessing": {"arm": "canny"}}, {"extra": {}}, {"training": {"epochs": 0}},
                {"evaluation": {"rounds": [5]}}, {"dataset": {"base": {"pulse_duty": 1.5}}},
                {"training": {"optimizer": {"variant": "adam"}}}):
        with pytest.raises(ConfigError):
            RunConfig.load(overrides=bad)
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.json")


# --- generate -------------------------------------------------------------

def test_manifest_counts_and_files(tiny):
    cfg, manifest = tiny
    entries = manifest["entries"]
    assert len(entries) == 70
    assert len({e["id"] for e in entries}) == 70
    for lab in CLASS_LABELS:
        assert sum(e["class"] == lab for e in entries) == 10
    for i, e in enumerate(entries):
        assert e["seed"] == derive_seed(cfg.raw["dataset"]["master_seed"], i)
        assert (cfg.data_dir / e["raw"]).exists() and (cfg.data_dir / e["image"]).exists()
        assert set(e["splits"]) == {str(r) for r in range(5)}
    assert manifest["data_hash"] == cfg.data_hash()


def test_desk_manifest_has_840_entries():
    m = stages.build_manifest(RunConfig.load())
    assert len(m["entries"]) == 840
    assert all(v == 120 for v in m["counts"].values())


def test_full_manifest_has_7000_entries():
    m = stages.build_manifest(RunConfig.load("full"))
    assert len(m["entries"]) == 7000
    assert sum(e["class"] == "noise" for e in m["entries"]) == 1000


def test_regenerate_is_byte_identical(tiny, tmp_path):
    cfg, _ = tiny
    first = (cfg.data_dir / "manifest.json").read_bytes()
    raw = (cfg.data_dir / "raw" / "noise-0003.c8").read_bytes()
    other = cfg.with_paths(tmp_path / "again", tmp_path / "runs")
    stages.cmd_generate(other)
    assert (other.data_dir / "manifest.json").read_bytes() == first
    assert (other.data_dir / "raw" / "noise-0003.c8").read_bytes() == raw


def test_parallel_generation_matches_serial(tiny, tmp_path):
    cfg, _ = tiny
    other = cfg.with_paths(tmp_path / "par", tmp_path / "runs")
    stages.cmd_generate(other, workers=2)
    for name in ("manifest.json", "raw/squiggle-0007.c8"):
        assert (other.data_dir / name).read_bytes() == (cfg.data_dir / name).read_bytes()


def test_sidecar_records_sample(tiny):
    cfg, manifest = tiny
    e = manifest["entries"][15]
    meta = json.loads((cfg.data_dir / (e["raw"] + ".meta.json")).read_text())
    assert meta["class"] == e["class"] and meta["seed"] == e["seed"]
    assert meta["params"]["n_fft"] == 64 and meta["data_hash"] == cfg.data_hash()


def test_manifest_hash_mismatch(tiny):
    cfg, _ = tiny
    changed = RunConfig(dict(cfg.raw, dataset=dict(cfg.raw["dataset"], master_seed=99)))
    with pytest.raises(HashMismatch):
        stages.load_manifest(changed)


# --- render ---------------------------------------------------------------

def test_render_dims_and_gallery(tiny):
    cfg, manifest = tiny
    img = read_pgm(cfg.data_dir / manifest["entries"][0]["image"])
    assert (img.height, img.width) == (48, 64)
    assert (cfg.out_dir / "figures" / "gallery.png").stat().st_size > 0


def test_full_geometry_render_is_384x512():
    c8 = quantize(simulate(SignalClass.NARROWBAND, SimParams(rng_seed=1)))
    img = stages.render_series(c8, RunConfig.load().spectrogram_config())
    assert (img.height, img.width) == (384, 512)


def test_noise_render_has_no_bright_column():
    c8 = quantize(simulate(SignalClass.NOISE, SimParams(rng_seed=4)))
    px = stages.render_series(c8, RunConfig.load().spectrogram_config()).pixels.astype(float)
    assert px.mean(axis=0).max() - px.mean() < 10.0
    tone = quantize(simulate(SignalClass.NARROWBAND, SimParams(rng_seed=4, snr_db=0.0)))
    px = stages.render_series(tone, RunConfig.load().spectrogram_config()).pixels.astype(float)
    assert px.mean(axis=0).max() - px.mean() > 10.0


def test_render_is_deterministic(tiny, tmp_path):
    cfg, manifest = tiny
    path = cfg.data_dir / manifest["entries"][3]["image"]
    before = path.read_bytes()
    stages.cmd_render(cfg, manifest)
    assert path.read_bytes() == before


def test_render_missing_raw(tiny, tmp_path):
    cfg, manifest = tiny
    other = cfg.with_paths(tmp_path / "empty", tmp_path / "runs")
    with pytest.raises(FileNotFoundError, match="missing raw file"):
        stages.cmd_render(other, manifest)


# --- preprocess -----------------------------------------------------------

def test_preprocess_arms(tiny):
    cfg, manifest = tiny
    stages.cmd_preprocess(cfg, manifest, "origin")
    e = manifest["entries"][20]
    src = read_pgm(cfg.data_dir / e["image"])
    origin = read_pgm(cfg.data_dir / e["preprocessed"]["origin"])
    assert origin == resize_area(smooth_gaussian(src), 16, 32)
    sobel = read_pgm(cfg.data_dir / e["preprocessed"]["sobel"])
    assert sobel == preprocess(src, Pipeline.for_arm("sobel", out_h=16, out_w=32))
    assert (sobel.height, sobel.width) == (16, 32)
    stamp = json.loads((cfg.data_dir / "pre" / "sobel" / "STAMP.json").read_text())
    assert stamp["arm"] == "sobel" and stamp["preprocess_hash"] == cfg.preprocess_hash("sobel")


def test_preprocess_constant_image_is_zero(tmp_path):
    img = GrayImage(np.full((384, 512), 77, np.uint8))
    for arm in ("sobel", "scharr", "laplace"):
        out = preprocess(img, RunConfig.load().pipeline_for(arm))
        assert (out.height, out.width) == (128, 256) and not out.pixels.any()


def test_preprocess_missing_image(tiny, tmp_path):
    cfg, manifest = tiny
    other = cfg.with_paths(tmp_path / "d", tmp_path / "r")
    (other.data_dir / "images").mkdir(parents=True)
    (other.data_dir / "images" / "STAMP.json").write_text(json.dumps({"image_hash": cfg.image_hash()}))
    with pytest.raises(FileNotFoundError, match="missing image"):
        stages.cmd_preprocess(other, manifest, "sobel")


def test_preprocess_refuses_stale_images(tiny):
    cfg, manifest = tiny
    changed = RunConfig(dict(cfg.raw, spectrogram=dict(cfg.raw["spectrogram"], power_map="linear")))
    with pytest.raises(HashMismatch):
        stages.cmd_preprocess(changed, manifest, "sobel")


# --- train ----------------------------------------------------------------

def test_train_history_and_checkpoints(tiny):
    cfg, manifest = tiny
    res = stages.cmd_train(cfg, manifest, "sobel", 0)
    h0 = res.history[0]
    assert h0["epoch"] == 0
    assert abs(h0["val_loss"] - math.log(7)) <= 0.05 and abs(h0["train_loss"] - math.log(7)) <= 0.05
    assert [h["epoch"] for h in res.history] == [0, 1, 2]
    assert res.finished and res.checkpoint.exists() and res.state_path.exists()
    tensors, header = load_checkpoint(res.checkpoint)
    assert header["config_hash"] == cfg.config_hash("sobel")
    assert header["meta"]["epoch"] == res.best_epoch >= 1
    assert set(tensors) == set(cfg.model_spec().layer_shapes())


def test_train_is_deterministic(tiny, tmp_path):
    cfg, manifest = tiny
    a = stages.cmd_train(cfg, manifest, "sobel", 0, out=tmp_path / "a")
    b = stages.cmd_train(cfg, manifest, "sobel", 0, out=tmp_path / "b")
    assert a.history == b.history
    assert (tmp_path / "a" / "model.ckpt").read_bytes() == (tmp_path / "b" / "model.ckpt").read_bytes()


def test_resume_matches_uninterrupted(tiny, tmp_path):
    cfg = tiny_config(tmp_path, epochs=3).with_paths(tiny[0].data_dir, tmp_path / "runs")
    manifest = stages.load_manifest(cfg)
    full = stages.cmd_train(cfg, manifest, "sobel", 0, out=tmp_path / "full")
    part = stages.cmd_train(cfg, manifest, "sobel", 0, out=tmp_path / "part", stop_after=1)
    assert not part.finished and part.epochs_completed == 1
    done = stages.cmd_train(cfg, manifest, "sobel", 0, out=tmp_path / "part", resume=True)
    assert done.finished and done.history == full.history
    assert (tmp_path / "full" / "model.ckpt").read_bytes() == (tmp_path / "part" / "model.ckpt").read_bytes()
    rep_full = stages.cmd_evaluate(cfg, manifest, tmp_path / "full" / "model.ckpt", arm="sobel", write=False)
    rep_part = stages.cmd_evaluate(cfg, manifest, tmp_path / "part" / "model.ckpt", arm="sobel", write=False)
    assert rep_full.reproducible_dict()["metrics"] == rep_part.reproducible_dict()["metrics"]


def test_train_missing_inputs(tiny):
    cfg, manifest = tiny
    with pytest.raises(FileNotFoundError):
        stages.cmd_train(cfg, manifest, "scharr", 0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_non_finite_loss_aborts(tiny, tmp_path):
    cfg, manifest = tiny
    hot = RunConfig(dict(cfg.raw, training=dict(cfg.raw["training"],
                                                optimizer=dict(cfg.raw["training"]["optimizer"], eta=1e30))))
    with pytest.raises((stages.TrainingError, FloatingPointError)):
        stages.cmd_train(hot, manifest, "sobel", 0, out=tmp_path / "hot")


def test_checkpoint_hash_mismatch(tiny, tmp_path):
    cfg, manifest = tiny
    res = stages.cmd_train(cfg, manifest, "sobel", 0, out=tmp_path / "m")
    other = RunConfig(dict(cfg.raw, training=dict(cfg.raw["training"], seed=123)))
    with pytest.raises(HashMismatch):
        stages.cmd_evaluate(other, manifest, res.checkpoint, arm="sobel", write=False)


# --- evaluate -------------------------------------------------------------

def test_evaluate_writes_reports(tiny):
    cfg, manifest = tiny
    res = stages.cmd_train(cfg, manifest, "sobel", 0)
    rep = stages.cmd_evaluate(cfg, manifest, res.checkpoint, "test", "sobel", 0)
    out = stages.run_dir(cfg, "sobel", 0)
    doc = json.loads((out / "report_test.json").read_text())
    assert doc["config_hash"] == cfg.config_hash("sobel")
    assert doc["context"]["split"] == "test" and "protocol" in doc["context"]
    assert len(doc["history"]) == 3 and "wall_clock_s" in doc
    assert doc["metrics"]["support"] == len(stages.split_indices(manifest, 0, "test"))
    assert (out / "report_test.txt").read_text().startswith("config hash: ")
    assert (out / "report_test_confusion.png").exists() and (out / "report_test_history.png").exists()
    assert rep.report.support == doc["metrics"]["support"]


def test_stub_true_label_predictor():
    labels = np.repeat(np.arange(7), 10)
    rep = stages.evaluate_predictor(lambda x: labels, np.zeros(70), labels)
    assert rep.report.accuracy == 1.0


def test_stub_constant_predictor_is_chance():
    labels = np.repeat(np.arange(7), 10)
    rep = stages.evaluate_predictor(lambda x: np.full(70, 2), np.zeros(70), labels)
    assert rep.report.accuracy == pytest.approx(1 / 7)


def test_stub_published_stream_reproduces_published_metrics():
    actual, predicted = [], []
    for a, row in enumerate(PUBLISHED_CM):
        for p, n in enumerate(row):
            actual += [a] * int(n)
            predicted += [p] * int(n)
    rng = np.random.default_rng(0)
    order = rng.permutation(len(actual))
    actual, predicted = np.array(actual)[order], np.array(predicted)[order]
    rep = stages.evaluate_predictor(lambda x: predicted, np.zeros(len(actual)), actual).report
    assert abs(rep.accuracy - PUBLISHED_ACCURACY) <= 1e-4
    for lab, m in zip(CLASS_LABELS, rep.per_class):
        assert abs(m.f1 - PUBLISHED_METRICS[lab][2]) <= 1e-4


def test_evaluate_with_stub_on_split_missing_classes(tiny):
    cfg, manifest = tiny
    # predictor that only ever names class 0 on a split; absent classes are tolerated by the macro rule
    rep = stages.cmd_evaluate(cfg, manifest, split="val", arm="sobel", predictor=lambda x: np.zeros(len(x), int),
                              write=False)
    assert rep.report.accuracy == pytest.approx(1 / 7)


# --- compare --------------------------------------------------------------

def test_compare_table_shape_and_repeatability(tiny, tmp_path):
    cfg, manifest = tiny
    cfg = cfg.with_paths(None, tmp_path / "cmp")
    table = stages.cmd_compare(cfg, manifest)
    assert list(table["arms"]) == ["origin", "sobel", "scharr", "laplace"]
    for row in table["arms"].values():
        assert set(row) >= {"mean_accuracy", "mean_macro_f1", "rounds"}
        assert [r["round"] for r in row["rounds"]] == cfg.rounds
    assert all(row["cpu_s"] > 0 for row in table["arms"].values())
    again = stages.cmd_compare(cfg, manifest)

    def untimed(t):
        return {**t, "arms": {a: {k: v for k, v in r.items() if k != "cpu_s"} for a, r in t["arms"].items()}}
    assert untimed(again) == untimed(table)
    assert (tmp_path / "cmp" / "compare.png").exists()
    text = (tmp_path / "cmp" / "compare.txt").read_text()
    assert all(arm in text for arm in table["arms"])


def test_all_zero_arm_is_chance(tiny, tmp_path):
    cfg, manifest = tiny
    cfg = cfg.with_paths(None, tmp_path / "zero")
    stages.cmd_preprocess(cfg, manifest, "laplace")
    for e in manifest["entries"]:
        write_pgm(cfg.data_dir / e["preprocessed"]["laplace"], GrayImage(np.zeros((16, 32), np.uint8)))
    res = stages.cmd_train(cfg, manifest, "laplace", 0)
    rep = stages.cmd_evaluate(cfg, manifest, res.checkpoint, "test", "laplace", 0, write=False)
    # identical inputs give identical logits, so one class is predicted for every sample
    assert rep.report.accuracy == pytest.approx(1 / 7)


# --- metrics from a matrix file ----------------------------------------------

def test_metrics_from_cm_file(tmp_path):
    p = tmp_path / "cm.txt"
    p.write_text("# table\n" + "\n".join(" ".join(map(str, r)) for r in PUBLISHED_CM) + "\n")
    rep = stages.cmd_metrics_from_cm(p).report
    assert abs(rep.accuracy - PUBLISHED_ACCURACY) <= 1e-4
    p.write_text("\n".join(",".join(map(str, r)) for r in np.eye(7, dtype=int) * 100))
    rep = stages.cmd_metrics_from_cm(p).report
    assert rep.accuracy == 1.0 and rep.macro_f1 == 1.0


@pytest.mark.parametrize("text,match", [
    ("\n".join(" ".join("1" for _ in range(7)) for _ in range(6)), "7x7"),
    ("\n".join(" ".join("1" for _ in range(7)) for _ in range(6)) + "\n1 1 1 1 1 1 -1", "negative"),
    ("\n".join(" ".join("x" for _ in range(7)) for _ in range(7)), "non-integer"),
    ("\n".join(" ".join("1" for _ in range(6)) for _ in range(7)), "7x7"),
])
def test_metrics_from_cm_errors(tmp_path, text, match):
    p = tmp_path / "cm.txt"
    p.write_text(text)
    with pytest.raises(ValueError, match=match):
        stages.cmd_metrics_from_cm(p)
