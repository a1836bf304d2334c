from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from coitk.clients import StubEmbedder, StubIntentClassifier, StubStyleJudge


@pytest.fixture
def stub_classifier():
    return StubIntentClassifier()


@pytest.fixture
def stub_judge():
    return StubStyleJudge()


@pytest.fixture
def stub_embedder():
    return StubEmbedder()
