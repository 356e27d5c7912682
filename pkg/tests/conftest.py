import numpy as np
import pytest
from hypothesis import settings

from markovmix.chain import validate_chain
from markovmix.generators import GeneratorSpec, make_example_2_8, make_named, make_two_state

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def ex28():
    return make_example_2_8()


@pytest.fixture
def t_quarter():
    return make_two_state(0.25)


@pytest.fixture
def two_cycle():
    return validate_chain([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def three_cycle():
    return make_named(GeneratorSpec("k-cycle", k=3))


@pytest.fixture
def iid3():
    return make_named(GeneratorSpec("iid", k=3))


@pytest.fixture
def identity2():
    return validate_chain(np.eye(2), [0.5, 0.5])
