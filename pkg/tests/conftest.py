import warnings

import pytest

from semipositone.models import PhiModel, ProblemInstance, ReactionModel

SQUARE = ReactionModel("power-shift", 2.0, {"beta": 1.0})
CUBE = ReactionModel("power-shift", 3.0, {"beta": 8.0})
LINEAR = ReactionModel("linear-shift", 1.0)
PLAP2 = PhiModel("p-laplacian", 2.0)


def make(N=3, lam=1.0, phi=PLAP2, reaction=SQUARE) -> ProblemInstance:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ProblemInstance(N, lam, phi, reaction)


@pytest.fixture
def superlinear():
    return make(3, 0.5)


@pytest.fixture
def linear4():
    return make(3, 4.0, PLAP2, LINEAR)
