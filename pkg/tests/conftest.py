import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mebench import BathParams, SystemParams, build_model

#: Exemplary weak-coupling, short-memory environment used throughout the
#: paper-style regressions.
FIG2_BATH = BathParams(eta=0.02371, gamma=11.54, omega0=1.0)

DETUNED = SystemParams(1.0, 0.95)
RESONANT = SystemParams(1.0, 1.0)


@pytest.fixture(scope="session")
def detuned_model():
    return build_model(DETUNED)


@pytest.fixture(scope="session")
def resonant_model():
    return build_model(RESONANT)


@pytest.fixture(scope="session")
def fig2_bath():
    return FIG2_BATH


def random_bath(rng):
    return BathParams(eta=float(rng.uniform(0.05, 2.0)),
                      gamma=float(rng.uniform(0.5, 5.0)),
                      omega0=float(rng.uniform(-1.0, 2.0)))


def random_hermitian(rng, n=4):
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (x + x.conj().T)
