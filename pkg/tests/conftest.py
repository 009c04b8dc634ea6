import time

import pytest

from parabound.experiments import RunConfig, run_matrix
from parabound.problem import builtin_test_problem, manufactured_problem


@pytest.fixture(scope="session")
def benchmark_spec():
    return builtin_test_problem()


@pytest.fixture(scope="session")
def manufactured_spec():
    return manufactured_problem()


@pytest.fixture(scope="session")
def oracle_cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("refcache"))


@pytest.fixture(scope="session")
def benchmark_matrix(oracle_cache_dir):
    """Default-configuration experiment matrix on the built-in benchmark.

    Computed once per session; the acceptance tests grade these records.
    Returns (records, wall_seconds).
    """
    config = RunConfig(m_values=[16, 32, 64, 128, 256], oracle_tol=1e-9,
                       cache_dir=oracle_cache_dir)
    start = time.perf_counter()
    records = run_matrix(config)
    elapsed = time.perf_counter() - start
    return records, elapsed
