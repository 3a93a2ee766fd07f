"""Shared test fixtures: tiny pipeline configs, a layer grad checker, the acceptance log."""

import numpy as np

from setiedge.nn import Tensor
from setiedge.nn.gradcheck import numeric_gradient, relative_error
from setiedge.nn.tensor import parameter
from setiedge.pipeline.config import RunConfig

ACCEPTANCE = []


def record(number, name: str, ok: bool, detail: str = "") -> bool:
    """Log one acceptance line; conftest prints them all at the end of the session."""
    line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return ok


def layer_grad_error(fn, arrays, rng, eps=1e-6) -> float:
    """Max relative error of backprop through sum(fn(*arrays) * R) against central differences."""
    params = [parameter(a.astype(np.float64)) for a in arrays]
    out = fn(*params)
    r = rng.normal(size=out.shape)
    out.backward(r)
    worst = 0.0
    for p in params:
        def f():
            return float(np.sum(fn(*[Tensor(q.data) for q in params]).data * r))
        num = numeric_gradient(f, p.data, eps)
        worst = max(worst, float(relative_error(p.grad.reshape(-1), num).max()))
    return worst


def tiny_config(tmp_path, per_class=10, epochs=2, **sections):
    over = {
        "name": "tiny",
        "dataset": {"samples_per_class": per_class,
                    "base": {"n_fft": 64, "n_rows": 48, "brightpixel_windows": 6},
                    "ranges": {"snr_db": [10.0, 20.0], "f_start": [-0.4, 0.4],
                               "drift_rate": [-0.002, 0.002], "curvature": {"magnitude": [2e-5, 5e-5]},
                               "pulse_period": [6, 12], "brightpixel_windows": [4, 8]}},
        "preprocessing": {"out_h": 16, "out_w": 32},
        "training": {"epochs": epochs, "batch_size": 8},
        "paths": {"data_dir": str(tmp_path / "data"), "out_dir": str(tmp_path / "runs")},
    }
    for k, v in sections.items():
        over.setdefault(k, {}).update(v)
    return RunConfig.load(overrides=over)
