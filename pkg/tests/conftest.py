import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("lrm", deadline=None, max_examples=60)
settings.load_profile("lrm")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_low_rank(rng, m, t, r):
    return rng.standard_normal((m, r)) @ rng.standard_normal((t, r)).T
