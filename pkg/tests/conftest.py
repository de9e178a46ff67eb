import numpy as np
import pytest

from polyproc.generator import build_matrix
from polyproc.models import catalog, catalog_names

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def all_models():
    return {name: catalog(name) for name in catalog_names()}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def catalog_matrix(name: str, m: int, **params):
    return build_matrix(catalog(name, params).spec, m)
