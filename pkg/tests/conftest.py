import numpy as np
import pytest
import torch

torch.set_num_threads(1)


def random_spd(n, rng, scale=1.0):
    a = rng.standard_normal((n, n))
    x = a @ a.T + 0.3 * n * np.eye(n)
    return torch.as_tensor(scale * (x + x.T) / 2, dtype=torch.float64)


def random_spd_batch(count, n, rng, scale=1.0):
    a = rng.standard_normal((count, n, n))
    x = a @ np.swapaxes(a, -1, -2) + 0.3 * n * np.eye(n)
    return torch.as_tensor(scale * (x + np.swapaxes(x, -1, -2)) / 2, dtype=torch.float64)


def random_skew(n, rng, scale=1.0):
    a = scale * rng.standard_normal((n, n))
    return torch.as_tensor((a - a.T) / 2, dtype=torch.float64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
