import pytest
from hypothesis import settings

settings.register_profile("ci", deadline=None, max_examples=60)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def compiled_kernels():
    from rangelab import kernels

    kernels.warm_up()
    return kernels
