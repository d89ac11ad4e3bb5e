import pytest

from src.core.config import get_config
from src.core.dynamics import NetworkState, WeightMatrix
from tests.factories import EXAMPLE1_ROWS, EXAMPLE1_X0, RING3_ROWS, RING3_X0


@pytest.fixture
def example1() -> WeightMatrix:
    return WeightMatrix.from_rows(EXAMPLE1_ROWS)


@pytest.fixture
def example1_x0() -> NetworkState:
    return NetworkState.of(EXAMPLE1_X0)


@pytest.fixture
def ring3() -> WeightMatrix:
    return WeightMatrix.from_rows(RING3_ROWS)


@pytest.fixture
def ring3_x0() -> NetworkState:
    return NetworkState.of(RING3_X0)


@pytest.fixture
def clean_config(monkeypatch):
    """Every test starts from default environment settings."""
    for var in ("CONSENSUS_HALT_LOG", "CONSENSUS_HALT_MAX_STEPS", "CONSENSUS_HALT_WORKERS", "CONSENSUS_HALT_KMAX"):
        monkeypatch.delenv(var, raising=False)
    get_config.cache_clear()
    yield
    get_config.cache_clear()
