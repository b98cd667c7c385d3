import numpy as np
import pytest

from fellcheck.fixtures import ck_rep, delta_rep, parity_rep, tree_rep
from fellcheck.freegroup import GeneratorSet
from fellcheck.models import ToleranceConfig
from fellcheck.prep import PartialRep


@pytest.fixture
def xy():
    return GeneratorSet(("x", "y"))


@pytest.fixture
def tol():
    return ToleranceConfig()


@pytest.fixture
def tree1():
    return PartialRep(tree_rep(2, 1))


@pytest.fixture
def tree2():
    return PartialRep(tree_rep(2, 2))


@pytest.fixture
def tree3():
    return PartialRep(tree_rep(2, 3))


@pytest.fixture
def tree4():
    return PartialRep(tree_rep(2, 4))


@pytest.fixture
def alternating4():
    return PartialRep(ck_rep([[0, 1], [1, 0]], 4))


@pytest.fixture
def parity():
    return parity_rep()


@pytest.fixture
def delta():
    return delta_rep()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
