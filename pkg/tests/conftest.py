import numpy as np
import pytest

from hrvem.material import MaterialLaw
from hrvem.mesh import generate


@pytest.fixture(scope="session")
def law():
    return MaterialLaw(1.0, 1.0)


@pytest.fixture(scope="session")
def cube2():
    return generate("cube", 2)


@pytest.fixture(scope="session")
def meshes():
    return {family: generate(family, 2) for family in ("cube", "tetra", "prism")}


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)
