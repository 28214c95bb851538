import numpy as np
import pytest

import anisochill as ac


@pytest.fixture
def line64():
    return ac.Grid.line(64)


@pytest.fixture
def line128():
    return ac.Grid.line(128)


@pytest.fixture
def bbm_spec():
    return ac.KernelSpec(ac.KernelFamily.BBM_OVER_R2, epsilon=0.2, dim=1)


@pytest.fixture
def cos_field(line128):
    (x,) = line128.meshgrid()
    return ac.ScalarField(line128, np.cos(np.pi * x))
