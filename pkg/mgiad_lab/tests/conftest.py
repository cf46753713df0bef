"""
Shared fixtures for the MGiaD test suite.
"""

import numpy as np
import pytest

from app.models.schemas import ModelConfig, Variant


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_mgiad() -> ModelConfig:
    """Two levels, widths 8 and 16, ladders [8, 4] and [16, 8, 4]."""
    return ModelConfig(
        variant=Variant.MGIAD, levels=2, channels=[8, 16], g_s=4, c_K=4, num_classes=3, input_size=8
    )


@pytest.fixture
def small_configs(small_mgiad):
    return {
        "resnet": ModelConfig(variant=Variant.RESNET, levels=2, channels=[8, 16], nu=1, num_classes=3, input_size=8),
        "mgnet": ModelConfig(variant=Variant.MGNET, levels=2, channels=[8, 16], nu=2, num_classes=3, input_size=8),
        "mgiad": small_mgiad,
    }


def numeric_gradient(loss, array: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central differences of the scalar function ``loss()`` with respect to ``array`` (in place)."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + step
        upper = loss()
        flat[i] = saved - step
        lower = loss()
        flat[i] = saved
        out[i] = (upper - lower) / (2 * step)
    return grad
