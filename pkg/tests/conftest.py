import pytest

from lifegcn import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Pay any JIT compile cost once, before timed tests run.
    kernels.warmup()
