from importlib import resources

import pytest
import yaml

from quadsense.scenario import Scenario, build_chain


def default_scenario_dict() -> dict:
    ref = resources.files("quadsense").joinpath("data/default_scenario.yaml")
    return yaml.safe_load(ref.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def scenario() -> Scenario:
    return Scenario.from_dict(default_scenario_dict())


@pytest.fixture(scope="session")
def chain(scenario):
    # Calibration is deterministic, so one chain serves every test.
    return build_chain(scenario)
