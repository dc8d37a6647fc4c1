import typing as t
from pathlib import Path

from skylink.utils import date_utils

MAX_LINES = 100


class Journal:
    """Append-only log of CLI invocations, trimmed to the last lines."""

    @classmethod
    def record(cls, path: Path, message: str, error: t.Optional[Exception]):
        logs = []
        if path.exists():
            with open(path, "r") as file:
                logs = file.readlines()
        log = (
            f"{message} succeeded"
            if not error
            else f"{message} failed with error: "
            + str(error).replace("\n", " ")
        )
        timed_log = f"{date_utils.datetime_str(date_utils.now())}: {log}\n"
        lines_to_keep = logs[-(MAX_LINES - 1) :]
        with open(path, "w") as file:
            file.writelines([*lines_to_keep, timed_log])

    @classmethod
    def read(cls, path: Path) -> t.List[str]:
        if not path.exists():
            return []
        return path.read_text().splitlines()
