import numpy as np
import pytest


@pytest.fixture()
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def oracle_data():
    """Fixed small sample from the linear-Gaussian oracle process."""
    from tsmc.models import simulate_oracle_data

    return simulate_oracle_data(30, np.random.default_rng(5150), loc=0.3)
