import os

# deterministic BLAS behaviour across the whole suite
for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

from datetime import datetime

import numpy as np
import pytest

from efbench.data import build_dataset
from efbench.synthetic import SyntheticProfile, generate_synthetic


@pytest.fixture(scope="session")
def small_dataset():
    """120 days of structured synthetic data, split 70/10/20."""
    frame = generate_synthetic(SyntheticProfile(), datetime(2021, 1, 1),
                               24 * 120, seed=101)
    return build_dataset(frame)


@pytest.fixture(scope="session")
def tiny_dataset():
    """Three weeks, enough for fast training-loop tests."""
    frame = generate_synthetic(SyntheticProfile(noise_sigma=3.0),
                               datetime(2022, 3, 1), 24 * 21, seed=57)
    return build_dataset(frame)


@pytest.fixture
def batch_xy():
    rng = np.random.default_rng(7)
    x = rng.uniform(0.0, 1.0, (4, 24, 6))
    y = rng.uniform(0.0, 1.0, (4, 24))
    return x, y
