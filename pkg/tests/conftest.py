from pathlib import Path
from unittest.mock import MagicMock

import freezegun
import numpy as np
import pytest

from skylink.config import Config
from skylink.harness.models import Scenario
from skylink.harness.scenarios import load_scenario
from skylink.tools.typer import Typer


@pytest.fixture(autouse=True)
def config(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    data_directory = tmp_path / ".skylink.debug"
    monkeypatch.setenv("SKYLINK_DEBUG_DIRECTORY", data_directory.as_posix())
    monkeypatch.delenv("SKYLINK_SCENARIO_DIRECTORY", raising=False)
    Config.make(debug=True)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240613)


@pytest.fixture
def print_(monkeypatch: pytest.MonkeyPatch):
    print_ = MagicMock()
    monkeypatch.setattr(Typer, "print_", print_)
    yield print_


@pytest.fixture
def frozen_time():
    with freezegun.freeze_time("2022-11-13") as frozen_time:
        yield frozen_time


def shortened(name: str, duration_s: float = 0.2, **update) -> Scenario:
    scenario = load_scenario(name)
    return scenario.model_copy(
        update={"duration_s": duration_s, "blocks": 1, **update}
    )


@pytest.fixture
def link50() -> Scenario:
    return load_scenario("link50")


@pytest.fixture
def link500() -> Scenario:
    return load_scenario("link500")
