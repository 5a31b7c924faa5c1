import numpy as np
import pytest

from specconsist import make_config


@pytest.fixture(scope="session")
def cfg_512_128():
    return make_config(512, 128, "hann")


@pytest.fixture(scope="session")
def cfg_256_64():
    return make_config(256, 64, "hann")


@pytest.fixture(scope="session")
def cfg_64_16():
    return make_config(64, 16, "hann")


@pytest.fixture(scope="session")
def cfg_rect_4():
    return make_config(4, 4, "rectangular")


def random_spectrogram(rng, m, n):
    return rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
