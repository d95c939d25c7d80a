import numpy as np
import pytest

from resonant_spectra.magnetic import MagneticModel, default_model, magnetic_symbol
from resonant_spectra.reduced import ChartFamily, reduced_hamiltonian
from resonant_spectra.symbols import flow_average


@pytest.fixture(scope="session")
def default_symbols():
    model = default_model()
    p2, q = magnetic_symbol(model)
    return p2, q, flow_average(q, model.lam)


@pytest.fixture(scope="session")
def red1(default_symbols):
    return reduced_hamiltonian(default_symbols[2], 1.0)


@pytest.fixture(scope="session")
def chart(default_symbols):
    return ChartFamily.build(default_symbols[2], 0.2, n_grid=81)


@pytest.fixture(scope="session")
def split_symbols():
    # b = (0, 16, 0): <q> = 2 X Y at E = 1, so levels F != 0 have two components
    model = MagneticModel.from_field(0, 16, 0)
    p2, q = magnetic_symbol(model)
    return p2, q, flow_average(q, model.lam)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
