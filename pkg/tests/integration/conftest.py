"""
Shared fixtures for the finite-n experiments.

These run real sweeps and take seconds to minutes, so each module here carries
the ``integration`` marker; ``pytest -m "not integration"`` skips them. The
consistency sweep is run once per session and shared by the tests that read it.
"""

import numpy as np
import pytest

from sbmlab.core import SbmParams
from sbmlab.harness import SweepConfig, run_consistency_sweep

#: The well-separated two-class truth of the consistency sweep.
SEPARATED = SbmParams(np.array([0.5, 0.5]), np.array([[0.8, 0.2], [0.2, 0.8]]))

#: The strongly assortative truth of the concentration experiments.
ASSORTATIVE = SbmParams(np.array([0.5, 0.5]), np.array([[0.9, 0.1], [0.1, 0.9]]))


@pytest.fixture(scope="session")
def consistency_config():
    return SweepConfig.model_validate(
        {
            "truth": {"alpha": SEPARATED.alpha.tolist(), "pi": SEPARATED.pi.tolist()},
            "n_grid": [30, 60, 120, 240],
            "seeds": 20,
            "methods": ["vem"],
            "restarts": 10,
            "record_timing": False,
        }
    )


@pytest.fixture(scope="session")
def consistency_sweep(consistency_config, tmp_path_factory):
    """The rows of one consistency sweep and the CSV it wrote."""
    path = tmp_path_factory.mktemp("sweep") / "consistency.csv"
    rows = run_consistency_sweep(consistency_config, output_path=path)
    return rows, path
