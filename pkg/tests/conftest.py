import numpy as np
import pytest
from fastapi.testclient import TestClient

from clifford_gluing.main import app
from clifford_gluing.schemas.surface import InitialSurfaceSpec
from clifford_gluing.services import surface_assembly as assembly


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def small_surface():
    """M(2,1,1,1,0) at the coarsest admissible resolution."""
    return assembly.assemble(InitialSurfaceSpec.M(2, 1, 1, 1, 0), 16)
