from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from actionembed.cli.problem_file import load_problem

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

EXAMPLES = Path(__file__).resolve().parent.parent / "docs" / "examples"


@pytest.fixture
def channel_problem():
    return load_problem(EXAMPLES / "channel.json")
