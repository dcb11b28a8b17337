"""
Fixtures for configuration and command-line tests.

Every test here runs in an empty working directory with no ``SBMLAB*`` or
``SBM_LAB_SEED`` variables set, so a developer's own config file or seed never
leaks into a result.
"""

import json
import os

import numpy as np
import pytest

from sbmlab import serialize
from sbmlab.core import SbmParams


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    for name in list(os.environ):
        if name.startswith("SBMLAB") or name == "SBM_LAB_SEED":
            monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("HOME", str(tmp_path / "home"))
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def params_file(tmp_path):
    """The well-separated two-class truth as a params file."""
    path = tmp_path / "truth.json"
    serialize.write_params(path, SbmParams(np.array([0.5, 0.5]), np.array([[0.8, 0.2], [0.2, 0.8]])))
    return path


@pytest.fixture
def write_json(tmp_path):
    def write(name, payload):
        path = tmp_path / name
        path.write_text(json.dumps(payload))
        return path

    return write
