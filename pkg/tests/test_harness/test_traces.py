from pathlib import Path

import numpy as np
import pytest

from skylink.base import DataError
from skylink.detection.models import DetectionEvents
from skylink.harness.models import SweepRow
from skylink.harness.runner import run_scenario_artifacts
from skylink.harness.traces import (
    analyze_trace,
    read_intensity_trace,
    write_channel_trace,
    write_events,
    write_sweep,
    write_tracking_trace,
)
from tests.conftest import shortened


def test_channel_trace_reproduces_report(tmp_path: Path):
    # Given
    scenario = shortened("link500", duration_s=0.1)
    artifacts = run_scenario_artifacts(scenario)
    path = tmp_path / "channel_trace.csv"

    # When
    write_channel_trace(path, artifacts.blocks[0].series)
    statistics = analyze_trace(
        path,
        scenario.beacon_wavelength_m,
        scenario.beam.link_length_m,
        quoted_cn2=scenario.quoted.cn2,
    )

    # Then
    assert statistics == artifacts.report.channel


def test_tracking_trace(tmp_path: Path):
    # Given
    artifacts = run_scenario_artifacts(shortened("link500", duration_s=0.1))
    path = tmp_path / "tracking_trace.csv"

    # When
    write_tracking_trace(path, artifacts.blocks[0].loop)

    # Then
    lines = path.read_text().splitlines()
    assert lines[0] == "t_s,ex_m,ey_m,ax,ay,eta"
    assert len(lines) == 101


def test_headerless_trace(tmp_path: Path):
    # Given
    path = tmp_path / "intensity.csv"
    path.write_text("1.0\n0.5\n\n1.5\n")

    # When
    samples = read_intensity_trace(path)

    # Then
    assert samples.tolist() == [1.0, 0.5, 1.5]


def test_named_column(tmp_path: Path):
    # Given
    path = tmp_path / "trace.csv"
    path.write_text("t_s,intensity\n0.0,1.25\n0.001,0.75\n")

    # Then
    assert read_intensity_trace(path).tolist() == [1.25, 0.75]


@pytest.mark.parametrize(
    "text, message",
    [
        ("", "is empty"),
        ("t_s,power\n0.0,1.0\n", "line 1: no 'intensity' column"),
        ("intensity\n1.0\nbright\n", "line 3: malformed row"),
        ("t_s,intensity\n0.0,1.0\n0.001\n", "line 3: malformed row"),
        ("intensity\n1.0\ninf\n", "line 3: non-finite intensity"),
    ],
)
def test_read_failures(text: str, message: str, tmp_path: Path):
    # Given
    path = tmp_path / "trace.csv"
    path.write_text(text)

    # Then
    with pytest.raises(DataError, match=message):
        read_intensity_trace(path)


def test_missing_trace_failure(tmp_path: Path):
    with pytest.raises(DataError, match="not found"):
        read_intensity_trace(tmp_path / "missing.csv")


def test_write_events(tmp_path: Path):
    # Given
    events = DetectionEvents(
        slot=np.array([3, 3]),
        detector=np.array([0, 2], dtype=np.int8),
        bin=np.array([2, 1], dtype=np.int8),
        time_s=np.array([5e-9, 4.2e-9]),
    )
    path = tmp_path / "events.csv"

    # When
    write_events(path, events)

    # Then
    assert path.read_text().splitlines() == [
        "slot,detector,bin,t_ns",
        f"3,Z,LATE,{5e-9 * 1e9!r}",
        f"3,X_OUT2,CENTRAL,{4.2e-9 * 1e9!r}",
    ]


def test_write_sweep(tmp_path: Path):
    # Given
    rows = [
        SweepRow(
            value=7.0, mean_skr_bps=1e6, mean_qber_z=0.01, mean_qber_x=0.03
        ),
        SweepRow(value=60.0, mean_skr_bps=0.0),
    ]
    path = tmp_path / "sweep.csv"

    # When
    write_sweep(path, rows)

    # Then
    assert path.read_text() == (
        "value,mean_skr_bps,mean_qber_z,mean_qber_x\n"
        "7.0,1000000.0,0.01,0.03\n"
        "60.0,0.0,,\n"
    )
