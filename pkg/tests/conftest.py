import numpy as np
import pytest

from jointscreen import Observation, unit_normalize


def random_dictionary(rng, m, n):
    return unit_normalize(rng.normal(size=(m, n)))


def sparse_instance(rng, m, n, k):
    """Dictionary plus an observation built from k random columns."""
    dictionary = random_dictionary(rng, m, n)
    support = rng.choice(n, size=k, replace=False)
    coeffs = rng.standard_normal(k)
    y = dictionary.atoms[:, support] @ coeffs
    return dictionary, Observation(y), np.sort(support)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
