import numpy as np
import pytest

from anece import model


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_complex(rng, rows, cols):
    return rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))


def random_feasible_factor(rng, cfg, margin=0.8):
    """Random factor scaled so every user sits strictly inside its power budget."""
    F = random_complex(rng, cfg.N_T, cfg.r)
    used = model.power_used(cfg, F)
    for i in range(cfg.M):
        F[cfg.block(i)] *= np.sqrt(margin * cfg.kp(i) / used[i])
    return F
