import os
from enum import Enum
from pathlib import Path

from skylink.base import Error

__all__ = ["Config"]


class Environment(str, Enum):
    OUTPUT_DIRECTORY = "SKYLINK_OUTPUT_DIRECTORY"
    DEBUG_DIRECTORY = "SKYLINK_DEBUG_DIRECTORY"
    SCENARIO_DIRECTORY = "SKYLINK_SCENARIO_DIRECTORY"

    def get_value(self) -> str:
        if not (value := os.getenv(self)):
            raise ConfigError(
                f"ConfigError: {self!s} environment variable not provided"
            )
        return value

    def is_provided(self) -> bool:
        return self in os.environ


class ConfigError(Error): ...


def get_directory(directory: Path) -> Path:
    if not directory.exists():
        directory.mkdir(parents=True)
    elif not directory.is_dir():
        raise ConfigError(
            f"ConfigError: {directory.as_posix()!r} must be a directory."
        )
    return directory


class Router:
    @property
    def root_directory(self) -> Path:
        if not Config.debug:
            return get_directory(
                Path(Environment.OUTPUT_DIRECTORY.get_value())
            )
        return get_directory(
            Path(Environment.DEBUG_DIRECTORY.get_value())
            if Environment.DEBUG_DIRECTORY.is_provided()
            else Path(__file__).parent.parent / ".skylink.debug"
        )

    @property
    def runs_directory(self) -> Path:
        return get_directory(self.root_directory / "runs")

    @property
    def run_log(self) -> Path:
        return self.root_directory / "runs.log"

    @property
    def presets_directory(self) -> Path:
        return Path(__file__).parent / "harness" / "presets"

    @property
    def scenario_directories(self) -> list[Path]:
        directories = [self.presets_directory]
        if Environment.SCENARIO_DIRECTORY.is_provided():
            directories.insert(
                0, Path(Environment.SCENARIO_DIRECTORY.get_value())
            )
        return directories


class Config:
    debug: bool
    router: Router

    def __init__(self):
        raise ConfigError("ConfigError: Config is a singleton.")

    @classmethod
    def make(cls, *, debug: bool):
        cls.debug = debug
        cls.router = Router()
