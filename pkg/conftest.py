"""
Shared fixtures for the hypobv test suite.
"""

import os

import pytest

from algebra.polyops import decompose_t, parse_poly
from algebra.symfun import SymFun
from shared.config import reload_config
from shared.logging_setup import configure_logging

ROOT = os.path.dirname(os.path.abspath(__file__))
CORPUS = os.path.join(ROOT, "corpus")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical checks")


@pytest.fixture(autouse=True, scope="session")
def structured_logging():
    """structlog through the standard library, so reports on stdout stay clean."""
    configure_logging("WARNING")


@pytest.fixture(autouse=True)
def fresh_config(monkeypatch):
    """Every test starts from config.yaml with no HYPOBV_* overrides."""
    for key in list(os.environ):
        if key.startswith("HYPOBV_"):
            monkeypatch.delenv(key)
    monkeypatch.setenv("HYPOBV_CONFIG", os.path.join(ROOT, "config.yaml"))
    reload_config()
    yield
    reload_config()


@pytest.fixture
def heat():
    return decompose_t(parse_poly("t - I*x**2"))


@pytest.fixture
def laplace():
    return decompose_t(parse_poly("t**2 + x**2"))


@pytest.fixture
def cauchy_riemann():
    return decompose_t(parse_poly("t - I*x"))


@pytest.fixture
def anisotropic():
    return decompose_t(parse_poly("t**2 + x1**2 + x2**4"))


@pytest.fixture
def gauss():
    return SymFun.gaussian(1)


@pytest.fixture
def corpus_dir():
    return CORPUS
