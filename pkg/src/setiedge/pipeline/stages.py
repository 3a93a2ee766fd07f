"""Pipeline stages: generate, render, preprocess, train, evaluate, compare.

Data layout under ``paths.data_dir``::

    manifest.json
    raw/<id>.c8 (+ .meta.json)     complex8 baseband samples
    images/<id>.pgm                384x512 spectrogram renders
    pre/<arm>/<id>.pgm             128x256 preprocessed inputs
    images/STAMP.json, pre/<arm>/STAMP.json   hashes of what produced them

Runs go under ``paths.out_dir/<arm>/round<r>/``.  Every artifact records the
hash of the config that produced it, and each stage refuses inputs whose
hash does not match the current config.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import evalkit
from ..imgproc import ARMS, preprocess as preprocess_image
from ..nn import (CheckpointError, MiniDense, ModelSpec, backward, forward, images_to_inputs, load_checkpoint,
                  predict, save_checkpoint, softmax_cross_entropy)
from ..optim import Adamax
from ..sigsim import (CLASS_LABELS, SignalClass, SimParams, derive_seed, quantize, read_c8, sample_params,
                      simulate, write_c8)
from ..spectro import GrayImage, read_pgm, stft_power, to_gray, write_pgm, write_png
from . import plotting
from .config import ConfigError, RunConfig, check_hash

log = logging.getLogger("setiedge")

MANIFEST_FORMAT = "setiedge-manifest/1"
PROTOCOL_NOTE = ("desk-scale protocol defined by this package: epochs, batch size and "
                 "checkpoint selection are config choices")


class TrainingError(RuntimeError):
    pass


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"missing {path}; run the upstream stage first") from exc


def _map(fn, jobs: list, workers: int) -> list:
    """Per-sample map; results do not depend on ``workers``."""
    if workers <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _params_rng(seed: int) -> np.random.Generator:
    # distinct from the simulator's own stream, which is seeded with `seed` directly
    return np.random.default_rng(np.random.SeedSequence([seed, 1]))


# --- generate -------------------------------------------------------------

def _generate_one(job) -> None:
    raw_path, entry, data_hash = job
    params = SimParams.from_dict(entry["params"])
    c8 = quantize(simulate(SignalClass.from_label(entry["class"]), params))
    write_c8(raw_path, c8, {"id": entry["id"], "class": entry["class"], "seed": entry["seed"],
                            "data_hash": data_hash, "params": entry["params"]})


def build_manifest(cfg: RunConfig) -> dict:
    ds = cfg.raw["dataset"]
    per_class = int(ds["samples_per_class"])
    base = cfg.sim_base()
    entries, labels = [], []
    for cls in SignalClass:
        for i in range(per_class):
            index = int(cls) * per_class + i
            seed = derive_seed(int(ds["master_seed"]), index)
            params = sample_params(ds["ranges"], _params_rng(seed), replace(base, rng_seed=seed))
            params.validate()
            sid = f"{cls.label}-{i:04d}"
            entries.append({
                "id": sid, "class": cls.label, "label": int(cls), "seed": seed,
                "params": params.to_dict(),
                "raw": f"raw/{sid}.c8", "image": f"images/{sid}.pgm",
                "preprocessed": {arm: f"pre/{arm}/{sid}.pgm" for arm in ARMS},
            })
            labels.append(int(cls))
    ev = cfg.raw["evaluation"]
    folds = evalkit.stratified_kfold(labels, int(ev["k"]), int(ev["seed"]))
    for r in range(folds.k):
        splits = folds.splits(r)
        for e, s in zip(entries, splits):
            e.setdefault("splits", {})[str(r)] = str(s)
    for e, f in zip(entries, folds.folds):
        e["fold"] = int(f)
    return {
        "format": MANIFEST_FORMAT,
        "config_name": cfg.name,
        "data_hash": cfg.data_hash(),
        "k": folds.k,
        "counts": {lab: per_class for lab in CLASS_LABELS},
        "entries": entries,
    }


def cmd_generate(cfg: RunConfig, workers: int = 1) -> dict:
    """Simulate every sample and write the manifest; re-runs are byte-identical."""
    data_dir = cfg.data_dir
    (data_dir / "raw").mkdir(parents=True, exist_ok=True)
    manifest = build_manifest(cfg)
    jobs = [(data_dir / e["raw"], e, manifest["data_hash"]) for e in manifest["entries"]]
    _map(_generate_one, jobs, workers)
    _write_json(data_dir / "manifest.json", manifest)
    log.info("generated %d samples into %s", len(jobs), data_dir)
    return manifest


def load_manifest(cfg: RunConfig) -> dict:
    manifest = _read_json(cfg.data_dir / "manifest.json")
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ConfigError(f"{cfg.data_dir / 'manifest.json'} is not a dataset manifest")
    check_hash("manifest", manifest["data_hash"], cfg.data_hash())
    return manifest


def entry_split(entry: dict, round_index: int) -> str:
    return entry["splits"][str(round_index)]


# --- render ---------------------------------------------------------------

def _render_one(job) -> None:
    raw_path, image_path, spec_cfg, data_hash = job
    if not Path(raw_path).exists():
        raise FileNotFoundError(f"missing raw file {raw_path}; run generate first")
    c8 = read_c8(raw_path)
    check_hash(f"raw file {raw_path}", c8.meta.get("data_hash", ""), data_hash)
    write_pgm(image_path, render_series(c8, spec_cfg))


def render_series(c8, spec_cfg) -> GrayImage:
    return to_gray(stft_power(c8.dequantize(), spec_cfg), spec_cfg)


def cmd_render(cfg: RunConfig, manifest: dict, workers: int = 1, png: bool = False) -> list:
    """One 384x512 PGM per sample, plus a one-per-class gallery figure."""
    data_dir = cfg.data_dir
    (data_dir / "images").mkdir(parents=True, exist_ok=True)
    spec_cfg = cfg.spectrogram_config()
    jobs = [(data_dir / e["raw"], data_dir / e["image"], spec_cfg, manifest["data_hash"])
            for e in manifest["entries"]]
    _map(_render_one, jobs, workers)
    _write_json(data_dir / "images" / "STAMP.json",
                {"data_hash": manifest["data_hash"], "image_hash": cfg.image_hash()})
    first = {}
    for e in manifest["entries"]:
        first.setdefault(e["class"], e)
    imgs = [read_pgm(data_dir / e["image"]).pixels for e in first.values()]
    if png:
        for e in manifest["entries"]:
            write_png(data_dir / (e["image"][:-4] + ".png"), read_pgm(data_dir / e["image"]))
    fig_dir = cfg.out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    figure = fig_dir / "gallery.png"
    plotting.plot_gallery(imgs, [f"{lab} ({e['id']})" for lab, e in first.items()], figure)
    log.info("rendered %d spectrograms; gallery at %s", len(jobs), figure)
    return [data_dir / e["image"] for e in manifest["entries"]]


# --- preprocess -----------------------------------------------------------

def _preprocess_one(job) -> None:
    src, dst, pipeline = job
    if not Path(src).exists():
        raise FileNotFoundError(f"missing image {src}; run render first")
    write_pgm(dst, preprocess_image(read_pgm(src), pipeline))


def cmd_preprocess(cfg: RunConfig, manifest: dict, arm: str | None = None, workers: int = 1) -> str:
    arm = arm or cfg.arm
    data_dir = cfg.data_dir
    stamp = _read_json(data_dir / "images" / "STAMP.json")
    check_hash("rendered images", stamp["image_hash"], cfg.image_hash())
    out = data_dir / "pre" / arm
    out.mkdir(parents=True, exist_ok=True)
    pipeline = cfg.pipeline_for(arm)
    jobs = [(data_dir / e["image"], data_dir / e["preprocessed"][arm], pipeline)
            for e in manifest["entries"]]
    _map(_preprocess_one, jobs, workers)
    _write_json(out / "STAMP.json", {"arm": arm, "preprocess_hash": cfg.preprocess_hash(arm)})
    log.info("preprocessed %d images with arm %s", len(jobs), arm)
    return arm


def load_arm_images(cfg: RunConfig, manifest: dict, arm: str, indices=None):
    """``(uint8 images (N, H, W), labels)`` for the manifest entries at ``indices``."""
    stamp = _read_json(cfg.data_dir / "pre" / arm / "STAMP.json")
    check_hash(f"preprocessed images ({arm})", stamp["preprocess_hash"], cfg.preprocess_hash(arm))
    entries = manifest["entries"]
    if indices is None:
        indices = range(len(entries))
    imgs, labels = [], []
    for i in indices:
        path = cfg.data_dir / entries[i]["preprocessed"][arm]
        if not path.exists():
            raise FileNotFoundError(f"missing preprocessed image {path}; run preprocess first")
        imgs.append(read_pgm(path).pixels)
        labels.append(entries[i]["label"])
    p = cfg.raw["preprocessing"]
    if not imgs:
        return np.zeros((0, p["out_h"], p["out_w"]), np.uint8), np.zeros(0, np.int64)
    return np.stack(imgs), np.asarray(labels, dtype=np.int64)


def split_indices(manifest: dict, round_index: int, split: str) -> list:
    if split not in evalkit.SPLITS:
        raise ValueError(f"split must be one of {evalkit.SPLITS}")
    return [i for i, e in enumerate(manifest["entries"]) if entry_split(e, round_index) == split]


# --- train ----------------------------------------------------------------

@dataclass
class TrainResult:
    history: list
    best_epoch: int
    best_val_accuracy: float
    checkpoint: Path
    state_path: Path
    epochs_completed: int
    wall_clock_s: float
    finished: bool


def run_dir(cfg: RunConfig, arm: str, round_index: int) -> Path:
    return cfg.out_dir / arm / f"round{round_index}"


def _loss_and_accuracy(model, inputs, labels, batch_size):
    if len(labels) == 0:
        return float("nan"), float("nan")
    logits = predict(model, inputs, batch_size)
    loss, _ = softmax_cross_entropy(logits, labels)
    return float(loss), float(np.mean(logits.argmax(axis=1) == labels))


def _json_float(x: float):
    return None if x is None or not math.isfinite(x) else float(x)


def cmd_train(cfg: RunConfig, manifest: dict, arm: str | None = None, round_index: int | None = None,
              out: Path | None = None, resume: bool = False, stop_after: int | None = None) -> TrainResult:
    """Mini-batch Adamax on the train split, keeping the best-validation checkpoint.

    ``state.ckpt`` holds everything needed to continue (parameters, optimizer
    moments, shuffle RNG state, history), so an interrupted run resumed with
    ``resume=True`` finishes bit-identical to an uninterrupted one.
    ``stop_after`` ends the run after that epoch, leaving it resumable.
    """
    arm = arm or cfg.arm
    round_index = cfg.rounds[0] if round_index is None else round_index
    tr_cfg = cfg.raw["training"]
    epochs, batch = int(tr_cfg["epochs"]), int(tr_cfg["batch_size"])
    out = Path(out) if out is not None else run_dir(cfg, arm, round_index)
    out.mkdir(parents=True, exist_ok=True)
    config_hash = cfg.config_hash(arm)
    best_path, state_path = out / "model.ckpt", out / "state.ckpt"

    tr_idx = split_indices(manifest, round_index, "train")
    va_idx = split_indices(manifest, round_index, "val")
    if not tr_idx:
        raise TrainingError("train split is empty")
    x_tr, y_tr = load_arm_images(cfg, manifest, arm, tr_idx)
    x_va, y_va = load_arm_images(cfg, manifest, arm, va_idx)
    x_tr, x_va = images_to_inputs(x_tr), images_to_inputs(x_va)

    init_ss, shuffle_ss = np.random.SeedSequence(int(tr_cfg["seed"])).spawn(2)
    model = MiniDense(cfg.model_spec()).initialize(np.random.default_rng(init_ss))
    opt = Adamax(model, cfg.hyper(), cfg.variant())
    shuffle = np.random.default_rng(shuffle_ss)
    history, best = [], {"epoch": 0, "val_accuracy": -1.0, "val_loss": math.inf}
    start_epoch, elapsed = 1, 0.0
    t0 = time.perf_counter()

    if resume and state_path.exists():
        tensors, header = load_checkpoint(state_path)
        check_hash(f"checkpoint {state_path}", header["config_hash"], config_hash)
        meta = header["meta"]
        model.load_state({k[6:]: v for k, v in tensors.items() if k.startswith("param.")})
        opt.load_arrays(tensors, meta["steps"])
        shuffle.bit_generator.state = meta["shuffle_state"]
        history, best = meta["history"], meta["best"]
        start_epoch, elapsed = meta["epoch"] + 1, meta["wall_clock_s"]
        log.info("resuming %s round %d after epoch %d", arm, round_index, meta["epoch"])
    else:
        tl, ta = _loss_and_accuracy(model, x_tr, y_tr, batch * 2)
        vl, va = _loss_and_accuracy(model, x_va, y_va, batch * 2)
        history.append({"epoch": 0, "train_loss": tl, "train_accuracy": ta,
                        "train_running_loss": None, "train_running_accuracy": None,
                        "val_loss": _json_float(vl), "val_accuracy": _json_float(va)})
        log.info("epoch 0: train loss %.4f, val loss %.4f", tl, vl)

    epoch = start_epoch - 1
    for epoch in range(start_epoch, epochs + 1):
        order = shuffle.permutation(len(y_tr))
        loss_sum, correct = 0.0, 0
        for b in range(0, len(order), batch):
            sel = order[b:b + batch]
            model.zero_grad()
            logits = forward(model, x_tr[sel])
            loss, grad = softmax_cross_entropy(logits, y_tr[sel])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch}, batch {b // batch}; "
                                    "lower training.optimizer.eta")
            backward(model, grad)
            opt.step()
            loss_sum += float(loss) * len(sel)
            correct += int(np.sum(logits.data.argmax(axis=1) == y_tr[sel]))
        # evaluated after the epoch, so it is comparable with the epoch-0 entry
        tl, ta = _loss_and_accuracy(model, x_tr, y_tr, batch * 2)
        vl, va = _loss_and_accuracy(model, x_va, y_va, batch * 2)
        rec = {"epoch": epoch, "train_loss": tl, "train_accuracy": ta,
               "train_running_loss": loss_sum / len(y_tr),
               "train_running_accuracy": correct / len(y_tr),
               "val_loss": _json_float(vl), "val_accuracy": _json_float(va)}
        history.append(rec)
        log.info("epoch %d: train loss %.4f acc %.3f, val loss %.4f acc %.3f",
                 epoch, rec["train_loss"], rec["train_accuracy"], vl, va)
        score = (-1.0 if math.isnan(va) else va, -(math.inf if math.isnan(vl) else vl))
        if score > (best["val_accuracy"], -best["val_loss"]) or best["epoch"] == 0:
            best = {"epoch": epoch, "val_accuracy": score[0], "val_loss": -score[1]}
            save_checkpoint(best_path, dict(model.state()), config_hash,
                            {"arm": arm, "round": round_index, "epoch": epoch,
                             "model": cfg.model_spec().to_dict()})
        elapsed_now = elapsed + time.perf_counter() - t0
        tensors = {f"param.{k}": v for k, v in model.state().items()}
        tensors.update(opt.state_arrays())
        save_checkpoint(state_path, tensors, config_hash, {
            "arm": arm, "round": round_index, "epoch": epoch, "history": history, "best": best,
            "steps": opt.steps_taken(), "shuffle_state": shuffle.bit_generator.state,
            "wall_clock_s": elapsed_now})
        if stop_after is not None and epoch >= stop_after and epoch < epochs:
            break

    finished = epoch >= epochs
    wall = elapsed + time.perf_counter() - t0
    _write_json(out / "history.json", {"config_hash": config_hash, "arm": arm, "round": round_index,
                                       "best": best, "history": history})
    return TrainResult(history, best["epoch"], best["val_accuracy"], best_path, state_path,
                       epoch, wall, finished)


# --- evaluate -------------------------------------------------------------

@dataclass
class MetricsReport:
    report: evalkit.EvalReport
    config_hash: str | None
    wall_clock_s: float
    history: list = field(default_factory=list)
    context: dict = field(default_factory=dict)

    def reproducible_dict(self) -> dict:
        """Everything except timing; equal across identical runs."""
        return {"config_hash": self.config_hash, "context": self.context,
                "metrics": self.report.to_dict(), "history": self.history}

    def to_dict(self) -> dict:
        d = self.reproducible_dict()
        d["wall_clock_s"] = self.wall_clock_s
        return d

    def to_text(self) -> str:
        head = [f"config hash: {self.config_hash or '-'}"]
        head += [f"{k}: {v}" for k, v in sorted(self.context.items())]
        head.append(f"wall clock: {self.wall_clock_s:.1f} s")
        text = "\n".join(head) + "\n\n" + self.report.to_text()
        if self.history:
            text += "\nepoch  train_loss  train_acc  val_loss  val_acc\n"
            for h in self.history:
                text += (f"{h['epoch']:5d}  {h['train_loss']:10.4f}  {h['train_accuracy']:9.4f}  "
                         f"{_fmt(h['val_loss'])}  {_fmt(h['val_accuracy'])}\n")
        return text


def _fmt(x) -> str:
    return f"{x:8.4f}" if x is not None else f"{'-':>8}"


def evaluate_predictor(predictor, inputs, labels, config_hash: str | None = None,
                       context: dict | None = None, history: list | None = None,
                       n_classes: int = 7) -> MetricsReport:
    """Score ``predictor(inputs) -> predicted labels`` against ``labels``."""
    t0 = time.perf_counter()
    predicted = np.asarray(predictor(inputs), dtype=np.int64)
    cm = evalkit.confusion_matrix(labels, predicted, n_classes)
    labels_txt = CLASS_LABELS if n_classes == len(CLASS_LABELS) else None
    rep = evalkit.evaluate(cm, labels_txt) if labels_txt else evalkit.evaluate(cm, ())
    return MetricsReport(rep, config_hash, time.perf_counter() - t0, history or [], context or {})


def load_model(path, expected_hash: str | None = None):
    """``(model, header)`` from a best-model checkpoint."""
    tensors, header = load_checkpoint(path)
    if expected_hash is not None:
        check_hash(f"checkpoint {path}", header["config_hash"], expected_hash)
    try:
        spec = ModelSpec(**header["meta"]["model"])
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: checkpoint has no model description") from exc
    return MiniDense(spec).load_state(tensors), header


def cmd_evaluate(cfg: RunConfig, manifest: dict, checkpoint=None, split: str = "test",
                 arm: str | None = None, round_index: int | None = None, predictor=None,
                 out: Path | None = None, write: bool = True) -> MetricsReport:
    """Confusion matrix and metrics for a checkpoint (or a stub ``predictor``) on one split."""
    arm = arm or cfg.arm
    round_index = cfg.rounds[0] if round_index is None else round_index
    rdir = run_dir(cfg, arm, round_index)
    out = Path(out) if out is not None else rdir
    config_hash = cfg.config_hash(arm)
    idx = split_indices(manifest, round_index, split)
    images, labels = load_arm_images(cfg, manifest, arm, idx)
    inputs = images_to_inputs(images)
    history, ckpt_epoch = [], None
    if predictor is None:
        checkpoint = Path(checkpoint) if checkpoint is not None else rdir / "model.ckpt"
        if not checkpoint.exists():
            raise FileNotFoundError(f"missing checkpoint {checkpoint}; run train first")
        model, header = load_model(checkpoint, config_hash)
        ckpt_epoch = header["meta"].get("epoch")
        batch = 2 * int(cfg.raw["training"]["batch_size"])

        def predictor(x):
            return predict(model, x, batch).argmax(axis=1)

        hist_path = checkpoint.parent / "history.json"
        if hist_path.exists():
            history = _read_json(hist_path)["history"]
    t0 = time.perf_counter()
    context = {"arm": arm, "round": round_index, "split": split, "checkpoint_epoch": ckpt_epoch,
               "config_name": cfg.name, "protocol": PROTOCOL_NOTE}
    report = evaluate_predictor(predictor, inputs, labels, config_hash, context, history)
    report.wall_clock_s = time.perf_counter() - t0
    if write:
        write_report(report, out, f"report_{split}")
    return report


def write_report(report: MetricsReport, out: Path, stem: str = "report") -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / f"{stem}.json", "text": out / f"{stem}.txt",
             "confusion": out / f"{stem}_confusion.png"}
    _write_json(paths["json"], report.to_dict())
    paths["text"].write_text(report.to_text())
    plotting.plot_confusion(report.report.confusion.counts, report.report.labels, paths["confusion"])
    if report.history:
        paths["history"] = out / f"{stem}_history.png"
        plotting.plot_history(report.history, paths["history"])
    return paths


# --- compare --------------------------------------------------------------

def compare_table(cfg: RunConfig, results: dict, cpu_s: dict | None = None) -> dict:
    arms = {}
    for arm, rows in results.items():
        arms[arm] = {
            "config_hash": cfg.config_hash(arm),
            "rounds": rows,
            "mean_accuracy": float(np.mean([r["accuracy"] for r in rows])),
            "mean_macro_f1": float(np.mean([r["macro_f1"] for r in rows])),
        }
        if cpu_s and arm in cpu_s:
            arms[arm]["cpu_s"] = cpu_s[arm]
    return {"data_hash": cfg.data_hash(), "config_name": cfg.name, "protocol": PROTOCOL_NOTE,
            "arms": arms}


def compare_text(table: dict) -> str:
    lines = [f"preprocessing comparison ({table['config_name']}, data {table['data_hash']})",
             table["protocol"], "",
             f"{'arm':10}{'accuracy':>10}{'macro F1':>10}  per-round accuracy / macro F1"]
    for arm, row in table["arms"].items():
        per = ", ".join(f"r{r['round']}: {r['accuracy']:.4f}/{r['macro_f1']:.4f}" for r in row["rounds"])
        cpu = f"  ({row['cpu_s'] / 60:.1f} CPU min)" if "cpu_s" in row else ""
        lines.append(f"{arm:10}{row['mean_accuracy']:10.4f}{row['mean_macro_f1']:10.4f}  {per}{cpu}")
    return "\n".join(lines) + "\n"


def cmd_compare(cfg: RunConfig, manifest: dict, arms=ARMS, workers: int = 1) -> dict:
    """Train and test every arm over the configured rounds.

    Each arm's row carries its CPU time for preprocess, train and test
    (this process only, so ``workers > 1`` preprocessing is not counted).
    """
    results, cpu_s = {}, {}
    for arm in arms:
        c0 = time.process_time()
        cmd_preprocess(cfg, manifest, arm, workers)
        rows = []
        for r in cfg.rounds:
            tr = cmd_train(cfg, manifest, arm, r)
            rep = cmd_evaluate(cfg, manifest, tr.checkpoint, "test", arm, r)
            rows.append({"round": r, "accuracy": rep.report.accuracy, "macro_f1": rep.report.macro_f1,
                         "best_epoch": tr.best_epoch})
            log.info("arm %s round %d: test accuracy %.4f, macro F1 %.4f",
                     arm, r, rep.report.accuracy, rep.report.macro_f1)
        results[arm] = rows
        cpu_s[arm] = time.process_time() - c0
    table = compare_table(cfg, results, cpu_s)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "compare.json", table)
    (out / "compare.txt").write_text(compare_text(table))
    plotting.plot_compare(table, out / "compare.png")
    return table


# --- metrics from a matrix file ----------------------------------------------

def read_matrix_file(path, n_classes: int = 7) -> np.ndarray:
    """Parse a whitespace- or comma-separated integer matrix; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc.strerror}") from exc
    rows = []
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].replace(",", " ").strip()
        if not line:
            continue
        try:
            rows.append([int(tok) for tok in line.split()])
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: non-integer entry in confusion matrix") from exc
    if len(rows) != n_classes or any(len(r) != n_classes for r in rows):
        shape = f"{len(rows)} rows with lengths {sorted({len(r) for r in rows})}"
        raise ValueError(f"{path}: expected a {n_classes}x{n_classes} matrix, got {shape}")
    m = np.asarray(rows, dtype=np.int64)
    if (m < 0).any():
        raise ValueError(f"{path}: confusion matrix has a negative count")
    return m


def cmd_metrics_from_cm(path, n_classes: int = 7) -> MetricsReport:
    t0 = time.perf_counter()
    cm = evalkit.ConfusionMatrix(read_matrix_file(path, n_classes))
    rep = evalkit.evaluate(cm)
    return MetricsReport(rep, None, time.perf_counter() - t0, [], {"source": os.fspath(path)})
