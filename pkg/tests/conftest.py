import numpy as np
import pytest

from copcure import backend


@pytest.fixture(params=backend.available_backends())
def kernel_backend(request):
    """Run the decorated test once per kernel backend."""
    previous = backend.backend_name()
    backend.set_backend(request.param)
    yield request.param
    backend.set_backend(previous)


@pytest.fixture(scope="session", autouse=True)
def _warm_numba():
    # compile the hot kernels once so individual tests time only the math
    if "numba" in backend.available_backends():
        from copcure.backend import numba_impl

        numba_impl.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
