import sys

import numpy as np
import pytest

from kellyfrac import GbmParams, MarketConfig

# Reference post-tax estimates (two instruments: equity index fund, bond fund).
POST_TAX_MU = (0.079, 0.031)
POST_TAX_COV = ((0.0396, -0.0093), (-0.0093, 0.0152))

# Reference pre-tax estimates and the tax rates applied to them.
PRE_TAX_MU = (0.099, 0.051)
PRE_TAX_SIGMA = (0.199, 0.123)
PRE_TAX_CORR = -0.377
TAX_RATES = (0.20, 0.40)


@pytest.fixture
def market():
    return MarketConfig()


@pytest.fixture
def ref_params():
    return GbmParams.from_covariance(POST_TAX_MU, POST_TAX_COV)


@pytest.fixture
def truth_params():
    return GbmParams(PRE_TAX_MU, PRE_TAX_SIGMA, [[1.0, PRE_TAX_CORR], [PRE_TAX_CORR, 1.0]])


def random_params(rng, m):
    """Random well-conditioned GBM parameters with ``m`` instruments."""
    a = rng.standard_normal((m, m))
    corr = a @ a.T + m * np.eye(m)
    d = np.sqrt(np.diag(corr))
    corr = corr / np.outer(d, d)
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    sigma = rng.uniform(0.05, 0.5, m)
    mu = rng.uniform(-0.1, 0.3, m)
    return GbmParams(mu, sigma, corr)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])
