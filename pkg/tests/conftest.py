import pytest

from smallcell.lib.config import RunConfig, load_config
from smallcell.lib.network_model import NetworkParams
from smallcell.lib.rate_analysis import QuadratureConfig


@pytest.fixture(scope="session")
def run_config() -> RunConfig:
    return load_config()


@pytest.fixture(scope="session")
def params(run_config: RunConfig) -> NetworkParams:
    return run_config.network


@pytest.fixture(scope="session")
def fast_quad() -> QuadratureConfig:
    """Looser tolerances for tests that only need a few significant digits."""
    return QuadratureConfig(rel_tol=1e-6, abs_tol=1e-10, tail_epsilon=1e-9)
