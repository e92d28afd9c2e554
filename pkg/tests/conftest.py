"""Shared fixtures: one toy harness per session plus cached seed scans.

The harness render session caches by (seed_id, class, psi, cutoff), so
every test reusing these fixtures hits warm renders.  Tests that need
exact render accounting build their own fresh session from the harness
parts.
"""

from __future__ import annotations

import pytest

from latentprobe.backends.base import RenderSession
from latentprobe.fixtures import (
    ToyHarness,
    first_flip_oracle_seeds,
    load_report_fixture,
    mix_oracle_seeds,
    salvage_schedule_seeds,
    salvage_seed_at,
)


@pytest.fixture(scope="session")
def harness() -> ToyHarness:
    return ToyHarness.build()


@pytest.fixture(scope="session")
def fresh_session_factory(harness):
    """Build an uncached render session sharing the harness backends."""

    def build() -> RenderSession:
        base = harness.session
        return RenderSession(base.generator, base.classifier, base.mean_styles)

    return build


@pytest.fixture(scope="session")
def mix_seeds(harness):
    return mix_oracle_seeds(harness, 20)


@pytest.fixture(scope="session")
def flip_seeds(harness):
    return first_flip_oracle_seeds(harness, 50)


@pytest.fixture(scope="session")
def salvage_points(harness):
    return salvage_schedule_seeds(harness)


@pytest.fixture(scope="session")
def discard_seed(harness):
    return salvage_seed_at(harness, None, class_label=0)


@pytest.fixture(scope="session")
def report_fixture():
    return load_report_fixture()
