import numpy as np
import pytest

from nomacell import NetworkParams, PairConfig, build_scenario

TABLE_SEED = 20240717


@pytest.fixture(scope="session")
def table_params():
    return NetworkParams()


@pytest.fixture(scope="session")
def table_pair():
    return PairConfig()


@pytest.fixture(scope="session")
def table_scenario(table_params, table_pair):
    """Pinned-seed Table-defaults realization with the aligned design."""
    return build_scenario(table_params, table_pair, kappa=0.9,
                          k_factor_db=20.0, seed=TABLE_SEED)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
