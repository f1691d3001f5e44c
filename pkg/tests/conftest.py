from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixture_data import (  # noqa: E402
    airport_dialogue,
    fixture_provider,
    office_dialogue,
    reference_corpus,
    summary_corpus,
)


@pytest.fixture(scope="session")
def provider():
    return fixture_provider()


@pytest.fixture(scope="session")
def airport():
    return airport_dialogue()


@pytest.fixture(scope="session")
def office():
    return office_dialogue()


@pytest.fixture(scope="session")
def summaries():
    return summary_corpus()


@pytest.fixture(scope="session")
def references():
    return reference_corpus()
