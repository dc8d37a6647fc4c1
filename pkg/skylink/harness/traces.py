import csv
import math
import typing as t
from pathlib import Path

import numpy as np

from skylink.base import DataError
from skylink.channel.models import ChannelStatistics, TransmittanceSeries
from skylink.channel.turbulence import channel_statistics
from skylink.detection.models import Bin, DetectionEvents, Detector
from skylink.harness.models import SweepRow
from skylink.tracking.models import LoopReport

TRACKING_COLUMNS = ["t_s", "ex_m", "ey_m", "ax", "ay", "eta"]
CHANNEL_COLUMNS = [
    "t_s",
    "intensity",
    "transmittance",
    "offset_x_m",
    "offset_y_m",
]
EVENT_COLUMNS = ["slot", "detector", "bin", "t_ns"]
SWEEP_COLUMNS = ["value", "mean_skr_bps", "mean_qber_z", "mean_qber_x"]
INTENSITY_COLUMN = "intensity"


def _write(path: Path, columns: t.Sequence[str], rows: t.Iterable):
    with open(path, "w", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def write_tracking_trace(path: Path, report: LoopReport):
    _write(
        path,
        TRACKING_COLUMNS,
        zip(
            map(repr, report.times.tolist()),
            map(repr, report.ex.tolist()),
            map(repr, report.ey.tolist()),
            map(repr, report.ax.tolist()),
            map(repr, report.ay.tolist()),
            map(repr, report.eta.tolist()),
        ),
    )


def write_channel_trace(path: Path, series: TransmittanceSeries):
    _write(
        path,
        CHANNEL_COLUMNS,
        zip(
            map(repr, series.times.tolist()),
            map(repr, series.intensity.tolist()),
            map(repr, series.transmittance.tolist()),
            map(repr, series.offset_x.tolist()),
            map(repr, series.offset_y.tolist()),
        ),
    )


def write_events(path: Path, events: DetectionEvents):
    _write(
        path,
        EVENT_COLUMNS,
        (
            (
                int(slot),
                Detector(int(detector)).name,
                Bin(int(bin_)).name,
                repr(float(time_s) * 1e9),
            )
            for slot, detector, bin_, time_s in zip(
                events.slot, events.detector, events.bin, events.time_s
            )
        ),
    )


def write_sweep(path: Path, rows: t.Sequence[SweepRow]):
    def cell(value):
        return "" if value is None else repr(value)

    _write(
        path,
        SWEEP_COLUMNS,
        (
            (
                cell(row.value),
                cell(row.mean_skr_bps),
                cell(row.mean_qber_z),
                cell(row.mean_qber_x),
            )
            for row in rows
        ),
    )


def read_intensity_trace(path: Path) -> np.ndarray:
    """Intensity column of a channel trace, or of a single-column file."""
    if not path.is_file():
        raise DataError(f"DataError: trace {path.as_posix()!r} not found.")
    samples = []
    with open(path, newline="") as file:
        reader = csv.reader(file)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(
                f"DataError: trace {path.as_posix()!r} is empty."
            )
        if INTENSITY_COLUMN in header:
            column = header.index(INTENSITY_COLUMN)
        elif len(header) == 1:
            column = 0
            # Headerless single-column file
            try:
                samples.append(float(header[0]))
            except ValueError:
                pass
        else:
            raise DataError(
                f"DataError: line 1: no {INTENSITY_COLUMN!r} column in"
                f" {path.as_posix()!r}."
            )
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                value = float(row[column])
            except (IndexError, ValueError):
                raise DataError(
                    f"DataError: line {line_number}: malformed row {row!r}."
                )
            if not math.isfinite(value):
                raise DataError(
                    f"DataError: line {line_number}: non-finite intensity."
                )
            samples.append(value)
    return np.asarray(samples)


def analyze_trace(
    path: Path,
    wavelength_m: float,
    link_length_m: float,
    quoted_cn2: t.Optional[float] = None,
) -> ChannelStatistics:
    return channel_statistics(
        read_intensity_trace(path),
        wavelength_m,
        link_length_m,
        quoted_cn2=quoted_cn2,
    )
