import numpy as np
import pytest

from oracles import hamming74
from rwlp.code_model import generate_regular_ldpc


@pytest.fixture
def hamming():
    return hamming74()


@pytest.fixture
def ldpc_12():
    return generate_regular_ldpc(12, 3, 4, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
