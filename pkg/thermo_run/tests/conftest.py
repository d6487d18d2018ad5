"""Shared fixtures for testing the thermo_run framework.

This module provides pytest fixtures that are used across multiple test files:
standard shift spaces, the carpet systems the closed forms are known for,
seeded random generators and helpers that write input documents to temporary
directories.
"""

import json
import math
import os
import tempfile

import numpy as np
import pytest

from thermo_run.models.carpet import CarpetRow, CarpetSystem
from thermo_run.models.shift_space import ShiftSpace

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
LOG2, LOG3 = math.log(2.0), math.log(3.0)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale or statistical test")


@pytest.fixture
def full_shift():
    """Full shift on two symbols."""
    return ShiftSpace.full_shift(2)


@pytest.fixture
def golden_mean():
    """Golden-mean shift: the word 11 is forbidden."""
    return ShiftSpace.golden_mean()


@pytest.fixture
def cyclic_shift():
    """Three symbols 0 -> 1 -> 2 -> 0 with loops at 0 and 2."""
    return ShiftSpace(np.array([[1, 1, 0], [0, 0, 1], [1, 0, 1]]))


@pytest.fixture
def mcmullen_carpet():
    """3x2 general Sierpinski carpet keeping 2 rectangles in row 0 and 1 in row 1."""
    return CarpetSystem.from_mcmullen(3, 2, [2, 1])


@pytest.fixture
def golden_carpet():
    """Carpet over the golden-mean shift with the McMullen column data."""
    rows = (CarpetRow((0, 1), [LOG3, LOG3]), CarpetRow((2,), [LOG3]))
    return CarpetSystem(ShiftSpace.golden_mean(), rows, [LOG2, LOG2])


@pytest.fixture
def markov_carpet():
    """Golden-mean base, uneven fibre contraction and uneven base expansion."""
    rows = (
        CarpetRow((0, 1, 2), [math.log(4.0), math.log(4.0), math.log(5.0)]),
        CarpetRow((3,), [math.log(4.0)]),
    )
    return CarpetSystem(ShiftSpace.golden_mean(), rows, [LOG2, LOG3])


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(20240601)


@pytest.fixture
def temp_storage_dir():
    """Create a temporary directory for report and CSV output."""
    with tempfile.TemporaryDirectory() as tmp_dir:
        yield tmp_dir


@pytest.fixture
def write_document(tmp_path):
    """Write an input document and return its path."""
    def _write(document, name='input.json'):
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return str(path)
    return _write


@pytest.fixture
def isolated_logs(tmp_path, monkeypatch):
    """Run in a temporary working directory so log files stay out of the tree."""
    monkeypatch.chdir(tmp_path)
    return os.path.join(str(tmp_path), 'logs')
