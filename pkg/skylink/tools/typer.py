import os
import subprocess
import textwrap
import typing as t

# No terminal when run from a batch job, falling back to 64 columns.
if os.environ.get("TERM"):
    try:
        tput_cols = subprocess.check_output(
            ["tput", "cols"], stderr=subprocess.DEVNULL
        )
        columns = int(tput_cols.decode("utf-8"))
    except (subprocess.CalledProcessError, FileNotFoundError, ValueError):
        columns = 64
else:
    columns = 64

INDENT = 4 if columns >= 78 else 2
WIDTH = 78 if columns >= 78 else columns - 2


class Typer:
    print_ = print

    @classmethod
    def header(cls, line: str, with_separator: bool = False):
        cls.separator()
        cls.print_(cls._wrap(line))
        if with_separator:
            cls.separator()

    @classmethod
    def body(cls, line: str):
        cls.print_(cls._wrap(line))

    @classmethod
    def separator(cls):
        cls.print_("")

    @classmethod
    def list(
        cls,
        items: t.Sequence,
        enumerated: bool = True,
        title: t.Optional[str] = None,
        with_separator: bool = True,
    ):
        if not title and with_separator:
            cls.separator()
        if title:
            cls.header(title)
        for index, item in enumerate(items):
            prefix = f"{index + 1}. " if enumerated else "– "
            cls.print_(cls._wrap(f"{prefix}{str(item)}"))

    @classmethod
    def table(
        cls,
        rows: t.Sequence[t.Sequence[t.Any]],
        headers: t.Sequence[str],
        title: t.Optional[str] = None,
    ):
        if title:
            cls.header(title)
        cells = [list(map(str, headers))] + [
            [cls._cell(value) for value in row] for row in rows
        ]
        widths = [
            max(len(row[index]) for row in cells)
            for index in range(len(headers))
        ]
        for row in cells:
            line = "  ".join(
                cell.rjust(width) for cell, width in zip(row, widths)
            )
            cls.print_(f"{INDENT * ' '}{line}")

    @classmethod
    def _cell(cls, value: t.Any) -> str:
        if isinstance(value, float):
            return f"{value:.4g}"
        return str(value)

    @classmethod
    def _wrap(cls, text: str) -> str:
        initial_indent = INDENT
        subsequent_indent = INDENT + 2
        return textwrap.fill(
            text=text,
            width=WIDTH,
            initial_indent=initial_indent * " ",
            subsequent_indent=subsequent_indent * " ",
        )
