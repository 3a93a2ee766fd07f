"""Run configuration: one JSON document drives every stage.

A user file is merged over the bundled ``desk`` defaults, so it only needs the
keys it changes.  Hashes are taken over canonical JSON of selected sections;
the ``paths`` section never enters a hash, so moving a run does not
invalidate it.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..imgproc import ARMS, Pipeline
from ..nn.model import ModelSpec
from ..optim import AdamaxHyper, AdamaxVariant
from ..sigsim import SimParams
from ..spectro import SpectrogramConfig

BUNDLED = ("desk", "full")
SECTIONS = ("dataset", "spectrogram", "preprocessing", "model", "training", "evaluation", "paths")


class ConfigError(ValueError):
    pass


class HashMismatch(RuntimeError):
    pass


def bundled_config(name: str = "desk") -> dict:
    try:
        text = resources.files("setiedge.configs").joinpath(f"{name}.json").read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"no bundled config named {name!r}") from exc
    return json.loads(text)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "ranges":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def canonical_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class RunConfig:
    raw: dict

    # --- construction -----------------------------------------------------
    @classmethod
    def load(cls, path=None, seed: int | None = None, overrides: dict | None = None) -> "RunConfig":
        """Bundled defaults, then the file at ``path``, then ``overrides``.

        ``path`` may also be a bundled config name (``desk``, ``full``).  A
        file may name a bundled base with ``"base": "full"``.  ``seed``
        replaces every seed in the document.
        """
        user = {}
        if path is not None and not Path(path).exists() and str(path) in BUNDLED:
            user = {"base": str(path)}
        elif path is not None:
            try:
                user = json.loads(Path(path).read_text())
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
            if not isinstance(user, dict):
                raise ConfigError(f"config {path} must be a JSON object")
        base = bundled_config(user.pop("base", "desk"))
        raw = _merge(base, user)
        if overrides:
            raw = _merge(raw, overrides)
        if seed is not None:
            raw = with_seed(raw, seed)
        cfg = cls(raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        unknown = set(self.raw) - set(SECTIONS) - {"name"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        ds = self.raw["dataset"]
        if int(ds["samples_per_class"]) < self.raw["evaluation"]["k"]:
            raise ConfigError("samples_per_class must be at least evaluation.k")
        if self.arm not in ARMS:
            raise ConfigError(f"preprocessing.arm must be one of {ARMS}, got {self.arm!r}")
        rounds = self.rounds
        if not rounds or any(not 0 <= r < self.raw["evaluation"]["k"] for r in rounds):
            raise ConfigError("evaluation.rounds must be a non-empty list of fold indices")
        tr = self.raw["training"]
        if int(tr["epochs"]) < 1 or int(tr["batch_size"]) < 1:
            raise ConfigError("training.epochs and training.batch_size must be >= 1")
        try:
            self.sim_base().validate()
            self.spectrogram_config().validate()
            self.hyper().validate()
            AdamaxVariant(tr["optimizer"].get("variant", "standard"))
            self.model_spec().layer_shapes()
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    # --- typed views ------------------------------------------------------
    @property
    def name(self) -> str:
        return self.raw.get("name", "custom")

    @property
    def arm(self) -> str:
        return self.raw["preprocessing"]["arm"]

    @property
    def rounds(self) -> list:
        return [int(r) for r in self.raw["evaluation"]["rounds"]]

    def with_arm(self, arm: str) -> "RunConfig":
        return RunConfig(_merge(self.raw, {"preprocessing": {"arm": arm}}))

    def with_paths(self, data_dir=None, out_dir=None) -> "RunConfig":
        paths = {}
        if data_dir is not None:
            paths["data_dir"] = str(data_dir)
        if out_dir is not None:
            paths["out_dir"] = str(out_dir)
        return RunConfig(_merge(self.raw, {"paths": paths}))

    @property
    def data_dir(self) -> Path:
        return Path(self.raw["paths"]["data_dir"])

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["paths"]["out_dir"])

    def sim_base(self) -> SimParams:
        return SimParams.from_dict(self.raw["dataset"]["base"])

    def spectrogram_config(self) -> SpectrogramConfig:
        base = self.raw["dataset"]["base"]
        return SpectrogramConfig(n_fft=base["n_fft"], n_rows=base["n_rows"], **self.raw["spectrogram"])

    def pipeline_for(self, arm: str | None = None) -> Pipeline:
        p = self.raw["preprocessing"]
        return Pipeline.for_arm(arm or p["arm"], sigma=p["sigma"], alpha=p["alpha"], beta=p["beta"],
                                out_h=p["out_h"], out_w=p["out_w"])

    def model_spec(self) -> ModelSpec:
        p = self.raw["preprocessing"]
        return ModelSpec(input_h=p["out_h"], input_w=p["out_w"], **self.raw["model"])

    def hyper(self) -> AdamaxHyper:
        opt = dict(self.raw["training"]["optimizer"])
        opt.pop("variant", None)
        return AdamaxHyper(**opt)

    def variant(self) -> AdamaxVariant:
        return AdamaxVariant(self.raw["training"]["optimizer"].get("variant", "standard"))

    # --- hashes -----------------------------------------------------------
    def data_hash(self) -> str:
        """Covers what the manifest depends on: the dataset and fold protocol."""
        return canonical_hash({k: self.raw[k] for k in ("dataset", "evaluation")})

    def image_hash(self) -> str:
        return canonical_hash({k: self.raw[k] for k in ("dataset", "spectrogram")})

    def preprocess_hash(self, arm: str | None = None) -> str:
        p = dict(self.raw["preprocessing"], arm=arm or self.arm)
        return canonical_hash({"images": self.image_hash(), "preprocessing": p})

    def config_hash(self, arm: str | None = None) -> str:
        """Hash of the whole run for one arm, paths excluded."""
        body = {k: self.raw[k] for k in SECTIONS if k != "paths"}
        body["preprocessing"] = dict(body["preprocessing"], arm=arm or self.arm)
        return canonical_hash(body)

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True) + "\n"


def with_seed(raw: dict, seed: int) -> dict:
    """Derive every seed in the document from one override value."""
    if not 0 <= int(seed) < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    seed = int(seed)
    return _merge(raw, {
        "dataset": {"master_seed": seed},
        "training": {"seed": (seed + 1) % 2 ** 64},
        "evaluation": {"seed": (seed + 2) % 2 ** 64},
    })


def check_hash(kind: str, found: str, expected: str) -> None:
    if found != expected:
        raise HashMismatch(f"{kind} hash {found} does not match the current config ({expected}); "
                           "regenerate the upstream stage")
