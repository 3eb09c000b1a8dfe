import numpy as np
import pytest
from hypothesis import strategies as st

from peerpred.priors import from_latent, random_snife_prior


def simplex(m, min_value=1e-3):
    """Hypothesis strategy for a length-m probability vector away from the boundary."""
    return st.lists(
        st.floats(min_value=min_value, max_value=1.0), min_size=m, max_size=m
    ).map(lambda xs: np.array(xs) / np.sum(xs))


def column_stochastic(m):
    return st.lists(simplex(m), min_size=m, max_size=m).map(lambda cols: np.stack(cols, axis=1))


@pytest.fixture(scope="session")
def prior3():
    return from_latent(random_snife_prior(3, 2, seed=7))


@pytest.fixture(scope="session")
def prior2():
    return from_latent(random_snife_prior(2, 2, seed=11))


@pytest.fixture(scope="session")
def latent3():
    return random_snife_prior(3, 2, seed=7)
