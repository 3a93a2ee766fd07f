"""MiniDense: a two-block densely connected CNN.

Layout for the default 1x128x256 input::

    stem      conv3x3 s2, 16 ch, ReLU                 -> 16 x 64 x 128
    block 1   3 x (conv3x3, 12 ch, ReLU) on concat    -> 52 x 64 x 128
    trans 1   conv1x1 to 26 ch, ReLU, avgpool 2x2     -> 26 x 32 x 64
    block 2   3 x (conv3x3, 12 ch, ReLU) on concat    -> 62 x 32 x 64
    trans 2   conv1x1 to 31 ch, ReLU, avgpool 2x2     -> 31 x 16 x 32
    head      global average pool, linear to 7 logits
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np

from .tensor import (Tensor, avg_pool2d, concat_channels, conv2d, conv_output_size,
                     global_avg_pool, linear, parameter, relu)


@dataclass(frozen=True)
class ModelSpec:
    in_channels: int = 1
    input_h: int = 128
    input_w: int = 256
    stem_channels: int = 16
    stem_stride: int = 2
    blocks: int = 2
    layers_per_block: int = 3
    growth: int = 12
    kernel: int = 3
    n_classes: int = 7
    zero_head: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    def layer_shapes(self) -> "OrderedDict[str, tuple]":
        """Parameter name -> shape, in the fixed forward order."""
        shapes = OrderedDict()
        k = self.kernel
        c = self.stem_channels
        shapes["stem.w"] = (c, self.in_channels, k, k)
        shapes["stem.b"] = (c,)
        h = conv_output_size(self.input_h, k, self.stem_stride, "same")
        w = conv_output_size(self.input_w, k, self.stem_stride, "same")
        for bi in range(self.blocks):
            for li in range(self.layers_per_block):
                shapes[f"block{bi}.layer{li}.w"] = (self.growth, c, k, k)
                shapes[f"block{bi}.layer{li}.b"] = (self.growth,)
                c += self.growth
            out = c // 2
            shapes[f"trans{bi}.w"] = (out, c, 1, 1)
            shapes[f"trans{bi}.b"] = (out,)
            c = out
            if h % 2 or w % 2:
                raise ValueError(f"spatial size {h}x{w} before transition {bi} is not even")
            h, w = h // 2, w // 2
        shapes["head.w"] = (self.n_classes, c)
        shapes["head.b"] = (self.n_classes,)
        return shapes


class MiniDense:
    def __init__(self, spec: ModelSpec = ModelSpec(), dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.shapes = spec.layer_shapes()
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()
        self._last_logits = None

    @property
    def initialized(self) -> bool:
        return len(self.params) == len(self.shapes)

    def initialize(self, rng: np.random.Generator) -> "MiniDense":
        """He-style init, N(0, 2 / fan_in); zero biases; zero head if configured."""
        self.params = OrderedDict()
        for name, shape in self.shapes.items():
            if name.endswith(".b"):
                data = np.zeros(shape)
            elif name == "head.w" and self.spec.zero_head:
                data = np.zeros(shape)
            else:
                fan_in = int(np.prod(shape[1:]))
                data = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
            self.params[name] = parameter(data.astype(self.dtype), name=name)
        return self

    def load_state(self, arrays: dict) -> "MiniDense":
        missing = set(self.shapes) - set(arrays)
        extra = set(arrays) - set(self.shapes)
        if missing or extra:
            raise ValueError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        self.params = OrderedDict()
        for name, shape in self.shapes.items():
            a = np.asarray(arrays[name])
            if a.shape != tuple(shape):
                raise ValueError(f"{name}: expected shape {shape}, got {a.shape}")
            self.params[name] = parameter(a.astype(self.dtype), name=name)
        return self

    def state(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, v.data) for k, v in self.params.items())

    def astype(self, dtype) -> "MiniDense":
        other = MiniDense(self.spec, dtype)
        return other.load_state(self.state())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def n_parameters(self) -> int:
        return int(sum(np.prod(s) for s in self.shapes.values()))

    def __call__(self, batch) -> Tensor:
        return forward(self, batch)


def forward(model: MiniDense, batch) -> Tensor:
    """Logits for a (B, C, H, W) batch of inputs already scaled to [0, 1]."""
    if not model.initialized:
        raise RuntimeError("model parameters are not initialized")
    spec = model.spec
    x = batch if isinstance(batch, Tensor) else Tensor(np.asarray(batch, dtype=model.dtype))
    expected = (spec.in_channels, spec.input_h, spec.input_w)
    if x.data.ndim != 4 or x.shape[1:] != expected:
        raise ValueError(f"expected a batch shaped (B, {expected[0]}, {expected[1]}, {expected[2]}), got {x.shape}")
    p = model.params

    h = relu(conv2d(x, p["stem.w"], p["stem.b"], stride=spec.stem_stride))
    for bi in range(spec.blocks):
        features = [h]
        for li in range(spec.layers_per_block):
            inp = features[0] if len(features) == 1 else concat_channels(*features)
            features.append(relu(conv2d(inp, p[f"block{bi}.layer{li}.w"], p[f"block{bi}.layer{li}.b"])))
        h = concat_channels(*features)
        h = avg_pool2d(relu(conv2d(h, p[f"trans{bi}.w"], p[f"trans{bi}.b"])), 2)
    logits = linear(global_avg_pool(h), p["head.w"], p["head.b"])
    model._last_logits = logits
    return logits


def backward(model: MiniDense, loss_grad) -> "OrderedDict[str, np.ndarray]":
    """Back-propagate ``loss_grad`` from the most recent forward pass."""
    if model._last_logits is None:
        raise RuntimeError("backward called before forward")
    model._last_logits.backward(loss_grad)
    model._last_logits = None
    return OrderedDict((k, v.grad) for k, v in model.params.items())


def predict(model: MiniDense, inputs: np.ndarray, batch_size: int = 32) -> np.ndarray:
    """Logits for many samples, evaluated in fixed-size chunks."""
    out = []
    for i in range(0, inputs.shape[0], batch_size):
        out.append(forward(model, inputs[i:i + batch_size]).data)
    model._last_logits = None
    return np.concatenate(out, axis=0) if out else np.zeros((0, model.spec.n_classes), model.dtype)


def images_to_inputs(images: np.ndarray, dtype=np.float32) -> np.ndarray:
    """uint8 (N, H, W) images to (N, 1, H, W) floats in [0, 1]."""
    images = np.asarray(images)
    return (images.astype(dtype) / dtype(255.0))[:, None, :, :]
