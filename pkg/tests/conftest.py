import numpy as np
import pytest

from advstyle_lab.data.benchmark import make_benchmark, write_benchmark
from advstyle_lab.models import MethodConfig, ModelSpec

# Small enough for float64 tests to run in well under a second per forward.
TINY_WIDTHS = (4, 8, 8, 8, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_spec():
    return ModelSpec(height=16, width=16, widths=TINY_WIDTHS, method="advstyle")


@pytest.fixture
def tight_method():
    # A negligible floor makes the zero-scale module an exact identity up to rounding.
    return MethodConfig(eps_floor=1e-10)


@pytest.fixture(scope="session")
def small_benchmark():
    return make_benchmark(seed=3, train_size=140, target_size=70)


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory, small_benchmark):
    out = tmp_path_factory.mktemp("data")
    write_benchmark(small_benchmark, out)
    return out
