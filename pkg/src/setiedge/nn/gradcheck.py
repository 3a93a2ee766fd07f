"""Central finite-difference gradient checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MiniDense, backward, forward
from .tensor import record_relu_masks, softmax_cross_entropy

# below this magnitude a gradient entry is compared absolutely
DENOM_FLOOR = 1e-8


def relative_error(analytic, numeric, floor: float = DENOM_FLOOR) -> np.ndarray:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numeric_gradient(f, array: np.ndarray, eps: float, indices=None) -> np.ndarray:
    """``(f(x + eps) - f(x - eps)) / (2 eps)`` at the given flat indices of ``array``.

    ``array`` is perturbed in place and restored.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    flat = array.reshape(-1)
    if indices is None:
        indices = np.arange(flat.size)
    out = np.empty(len(indices))
    for j, i in enumerate(indices):
        orig = flat[i]
        flat[i] = orig + eps
        up = f()
        flat[i] = orig - eps
        down = f()
        flat[i] = orig
        out[j] = (up - down) / (2.0 * eps)
    return out


@dataclass
class GradCheckResult:
    max_rel_error: float
    n_checked: int
    n_kinked: int


def grad_check_report(model: MiniDense, inputs: np.ndarray, labels, eps: float = 1e-3,
                      n_params: int = 200, rng: np.random.Generator | None = None,
                      skip_kinks: bool = True, max_draws: int | None = None) -> GradCheckResult:
    """Compare back-propagated grads with central differences on a float64 copy.

    Scalar parameters are drawn (a tensor uniformly, then an entry) without
    replacement until ``n_params`` have been checked.  With ``skip_kinks`` a
    draw whose +/-eps evaluations flip any ReLU mask is discarded: the loss is
    not differentiable across that interval, so the difference quotient says
    nothing about the analytic gradient there.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    rng = rng or np.random.default_rng(0)
    m64 = model.astype(np.float64)
    x = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels)

    def evaluate():
        with record_relu_masks() as masks:
            loss = softmax_cross_entropy(forward(m64, x), labels)[0]
        return loss, masks

    m64.zero_grad()
    with record_relu_masks() as base_masks:
        _, g = softmax_cross_entropy(forward(m64, x), labels)
    grads = backward(m64, g)

    names = list(m64.params)
    total = m64.n_parameters()
    max_draws = max_draws or min(total, 20 * n_params)
    seen = set()
    worst, checked, kinked = 0.0, 0, 0
    while checked < min(n_params, total) and len(seen) < min(total, max_draws):
        name = names[int(rng.integers(len(names)))]
        flat = m64.params[name].data.reshape(-1)
        i = int(rng.integers(flat.size))
        if (name, i) in seen:
            continue
        seen.add((name, i))
        orig = flat[i]
        flat[i] = orig + eps
        up, up_masks = evaluate()
        flat[i] = orig - eps
        down, down_masks = evaluate()
        flat[i] = orig
        if skip_kinks and not (_same_masks(base_masks, up_masks) and _same_masks(base_masks, down_masks)):
            kinked += 1
            continue
        numeric = (up - down) / (2.0 * eps)
        worst = max(worst, float(relative_error(grads[name].reshape(-1)[i], numeric)))
        checked += 1
    return GradCheckResult(worst, checked, kinked)


def _same_masks(a, b) -> bool:
    return len(a) == len(b) and all(np.array_equal(u, v) for u, v in zip(a, b))


def grad_check(model: MiniDense, inputs: np.ndarray, labels, eps: float = 1e-3,
               n_params: int = 200, rng: np.random.Generator | None = None) -> float:
    """Max relative error over at least ``n_params`` kink-free parameter samples."""
    result = grad_check_report(model, inputs, labels, eps, n_params, rng)
    if result.n_checked < min(n_params, model.n_parameters()):
        raise RuntimeError(
            f"only {result.n_checked} kink-free parameters found ({result.n_kinked} kinked); "
            "use a smaller eps")
    return result.max_rel_error
