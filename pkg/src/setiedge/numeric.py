"""Small numeric helpers shared across modules."""

import numpy as np


def round_half_away(x):
    """Round to the nearest integer, ties away from zero (0.5 -> 1, -0.5 -> -1)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def sat_u8(x):
    """Saturating cast to uint8: values outside [0, 255] are clipped."""
    return np.clip(x, 0, 255).astype(np.uint8)
