import typing as t
from pathlib import Path

import yaml

from skylink.base import ContractViolation, ValidationError
from skylink.config import Config, ConfigError
from skylink.harness.models import Provenance, Scenario

SCENARIO_SUFFIX = ".yaml"
# Keys describing the file itself rather than the link.
UNLABELLED_KEYS = ("name", "description", "provenance")
BUDGET_TOTAL_PATH = "budget.total_db"


def find_scenario(name_or_path: str) -> Path:
    path = Path(name_or_path)
    if path.is_file():
        return path
    for directory in Config.router.scenario_directories:
        candidate = directory / f"{name_or_path}{SCENARIO_SUFFIX}"
        if candidate.is_file():
            return candidate
    raise ConfigError(
        f"ConfigError: scenario {name_or_path!r} not found as a file or"
        " preset."
    )


def read_raw(path: Path) -> t.Dict[str, t.Any]:
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as error:
        raise ConfigError(
            f"ConfigError: {path.as_posix()!r} is not valid YAML. {error}"
        )
    if not isinstance(raw, dict):
        raise ConfigError(
            f"ConfigError: {path.as_posix()!r} must hold a mapping."
        )
    return raw


def parse_scenario(raw: t.Dict[str, t.Any]) -> Scenario:
    try:
        return Scenario.model_validate(raw)
    except ValidationError as error:
        raise ConfigError(f"ConfigError: invalid scenario. {error}")


def load_scenario(name_or_path: str) -> Scenario:
    return parse_scenario(read_raw(find_scenario(name_or_path)))


def leaf_paths(
    raw: t.Mapping[str, t.Any], prefix: str = ""
) -> t.Iterator[str]:
    for key, value in raw.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict) and value:
            yield from leaf_paths(value, prefix=f"{path}.")
        else:
            yield path


def lint_scenario(raw: t.Dict[str, t.Any]) -> t.List[str]:
    """Returns the provenance problems of a raw scenario mapping."""
    problems = []
    labels = raw.get("provenance") or {}
    values = {k: v for k, v in raw.items() if k not in UNLABELLED_KEYS}
    leaves = list(leaf_paths(values))
    for path in leaves:
        if path not in labels:
            problems.append(f"{path}: no provenance label")
    allowed = {provenance.value for provenance in Provenance}
    for path, label in labels.items():
        if path not in leaves:
            problems.append(f"{path}: label for a missing value")
        elif label not in allowed:
            problems.append(f"{path}: unknown label {label!r}")
    return problems


def with_value(scenario: Scenario, path: str, value: float) -> Scenario:
    """Copy of `scenario` with the numeric parameter at `path` replaced.

    `budget.total_db` rescales the budget components to the new total.
    """
    if path == BUDGET_TOTAL_PATH:
        try:
            budget = scenario.budget.scaled_to(value)
        except (ContractViolation, ValidationError) as error:
            raise ConfigError(f"ConfigError: {error}")
        return scenario.model_copy(update={"budget": budget})

    data = scenario.model_dump()
    *parents, leaf = path.split(".")
    node = data
    for part in parents:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(
                f"ConfigError: unknown parameter path {path!r}."
            )
        node = node[part]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(f"ConfigError: unknown parameter path {path!r}.")
    current = node[leaf]
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ConfigError(
            f"ConfigError: parameter {path!r} is not numeric."
        )
    node[leaf] = value
    return parse_scenario(data)
