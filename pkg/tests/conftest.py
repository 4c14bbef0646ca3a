import numpy as np
import pytest

from quacklab import (
    PriorSpec,
    build_continuous_rule_eps1,
    build_max_rule,
    build_min_rule,
)


@pytest.fixture(scope="session")
def max_rule_quarter():
    return build_max_rule(0.25)


@pytest.fixture(scope="session")
def max_rule_half():
    return build_max_rule(0.5)


@pytest.fixture(scope="session")
def max_rule_09():
    return build_max_rule(0.9)


@pytest.fixture(scope="session")
def min_rule_02():
    return build_min_rule(0.2)


@pytest.fixture(scope="session")
def eps1_rule():
    return build_continuous_rule_eps1()


@pytest.fixture(scope="session")
def thin_prior():
    # thin-tailed test prior g ~ exp(-4 w^2) on [-1, 1]
    return PriorSpec.unimodal_from_log_density(lambda x: -4.0 * x * x)


@pytest.fixture(scope="session")
def message_grid_201():
    return np.linspace(0.0, 1.0, 201)
