from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import Cast, FakeClock

from safehaven.domain import Tier, WorkPackage, WorkPackageState
from safehaven.framework import ManagementFramework
from safehaven.platform_driver import SimulatorDriver


@pytest.fixture
def wp_golden():
    """Factory for a fixed work package at an agreed tier (planning input)."""

    def factory(tier: Tier, dataset_ids=("dataset-alpha", "dataset-beta")) -> WorkPackage:
        return WorkPackage(
            id="wp-golden",
            project_id="project-golden",
            dataset_ids=frozenset(dataset_ids),
            intended_analysis="fixture",
            expected_outputs="tables",
            intended_tools="python",
            state=WorkPackageState.CONSENSUS_REACHED,
            final_tier=tier,
        )

    return factory


@pytest.fixture
def clock() -> FakeClock:
    return FakeClock()


@pytest.fixture
def driver() -> SimulatorDriver:
    return SimulatorDriver()


@pytest.fixture
def fw(clock, driver) -> ManagementFramework:
    return ManagementFramework(clock=clock, driver=driver)


@pytest.fixture
def cast(fw) -> Cast:
    return Cast(fw)
