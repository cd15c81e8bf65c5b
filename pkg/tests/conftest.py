import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_mask(rng: np.random.Generator, h: int, w: int, p: float = 0.5) -> np.ndarray:
    return (rng.random((h, w)) < p).astype(np.uint8)
