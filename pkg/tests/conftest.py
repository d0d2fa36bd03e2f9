import random

import pytest

from onionsim.inputs import random_simple_input
from onionsim.protocols import make_protocol

BFLY = dict(n_parties=16, chi=4, d=4, iterations=4, kappa=0.25, lam=16)
TREE = dict(n_parties=16, chi=4, d=2, kappa=0.25, lam=16)


@pytest.fixture
def bfly():
    return make_protocol("pibfly", **BFLY)


@pytest.fixture
def tree():
    return make_protocol("pitree", **TREE)


def perm(seed, n=16):
    return random_simple_input(n, random.Random(seed))
