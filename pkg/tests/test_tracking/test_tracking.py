import math

import numpy as np
import pytest

from skylink.base import ContractViolation
from skylink.channel.models import TransmittanceSeries
from skylink.harness.runner import run_tracking
from skylink.tracking.models import (
    DerivativeMode,
    FqdConfig,
    FqdReading,
    MirrorModel,
    Mode,
    PidGains,
    PidState,
    TrackingConfig,
)
from skylink.tracking.tracking import (
    ControllerFault,
    coupling_efficiency,
    fqd_measure,
    pid_step,
    run_loop,
)
from tests.conftest import shortened


def constant_series(
    offset_x: float, offset_y: float, n: int = 2000
) -> TransmittanceSeries:
    return TransmittanceSeries(
        dt=1e-3,
        intensity=np.ones(n),
        transmittance=np.ones(n),
        offset_x=np.full(n, offset_x),
        offset_y=np.full(n, offset_y),
    )


@pytest.fixture
def gains() -> PidGains:
    return PidGains(kp=0.2, ki=0.3, kd=0.2)


class TestFqdMeasure:
    def test_quantization_and_saturation(self, rng: np.random.Generator):
        # When
        reading = fqd_measure((1.1e-6, 4e-3), rng)

        # Then
        assert reading.ex == pytest.approx(0.75e-6)
        assert reading.ey == pytest.approx(3.05e-3)
        assert reading.saturated
        assert reading.raw_x == 1.1e-6

    def test_read_noise(self, rng: np.random.Generator):
        # Given
        fqd = FqdConfig(read_noise_m=5e-7)

        # When
        readings = [fqd_measure((0.0, 0.0), rng, fqd) for _ in range(2000)]

        # Then
        raw = np.array([reading.raw_x for reading in readings])
        assert raw.std() == pytest.approx(5e-7, rel=0.1)
        assert not any(reading.saturated for reading in readings)


class TestPidStep:
    @pytest.mark.parametrize(
        "derivative, expected_d",
        [(DerivativeMode.LITERAL, 3.0), (DerivativeMode.CONVENTIONAL, 2.0)],
    )
    def test_derivative_modes(
        self, derivative: DerivativeMode, expected_d: float
    ):
        # Given
        state = PidState(e_p=(1.0, 0.0), e_i=(1.0, 0.0), iteration=1)
        reading = FqdReading(ex=3.0, ey=0.0)
        gains = PidGains(kp=1.0, ki=0.1, kd=0.5)

        # When
        actuation, new_state = pid_step(state, gains, reading, derivative)

        # Then
        assert new_state.e_i == (4.0, 0.0)
        assert new_state.e_d == (expected_d, 0.0)
        assert new_state.iteration == 2
        assert actuation[0] == pytest.approx(
            -(1.0 * 3.0 + 0.1 * 4.0 + 0.5 * expected_d)
        )

    def test_uses_raw_reading(self, gains: PidGains):
        # Given
        reading = FqdReading(ex=0.0, ey=0.0, raw_x=1.0, raw_y=-1.0)

        # When
        actuation, _ = pid_step(
            PidState(), gains, reading, use_raw=True
        )

        # Then
        assert actuation[0] == pytest.approx(-0.7)
        assert actuation[1] == pytest.approx(0.7)

    def test_non_finite_reading_failure(self, gains: PidGains):
        with pytest.raises(ControllerFault, match="non-finite FQD reading"):
            pid_step(PidState(), gains, FqdReading(ex=math.nan, ey=0.0))


def test_coupling_efficiency():
    # Then
    assert coupling_efficiency((0.0, 0.0), 150e-6) == 1.0
    assert coupling_efficiency((150e-6, 0.0), 150e-6) == pytest.approx(
        math.exp(-1)
    )
    np.testing.assert_allclose(
        coupling_efficiency(np.array([[0.0, 0.0], [0.0, 300e-6]]), 150e-6),
        [1.0, math.exp(-4)],
    )
    with pytest.raises(ContractViolation, match="invalid mode radius"):
        coupling_efficiency((0.0, 0.0), 0.0)


def test_mirror_step_fraction():
    assert MirrorModel(time_constant_s=0.0).step_fraction(1e-3) == 1.0
    assert MirrorModel(time_constant_s=5e-3).step_fraction(
        1e-3
    ) == pytest.approx(1 - math.exp(-0.2))


class TestRunLoop:
    def test_zero_gains_leave_the_wander_untouched(self):
        # Given
        series = constant_series(40e-6, -30e-6, n=100)
        config = TrackingConfig()

        # When
        closed = run_loop(
            series, config, np.random.default_rng(0), mode=Mode.CLOSED
        )
        opened = run_loop(
            series, config, np.random.default_rng(0), mode=Mode.OPEN
        )

        # Then
        np.testing.assert_array_equal(closed.residual_x, series.offset_x)
        np.testing.assert_array_equal(closed.ex, opened.ex)
        assert closed.mean_error == pytest.approx(50e-6, abs=1e-6)
        assert closed.std_error == pytest.approx(0.0, abs=1e-9)

    def test_open_mode_never_moves_the_mirror(
        self, gains: PidGains, rng: np.random.Generator
    ):
        # Given
        series = constant_series(40e-6, 0.0, n=200)

        # When
        report = run_loop(
            series, TrackingConfig(gains=gains, mode=Mode.OPEN), rng
        )

        # Then
        assert report.mode is Mode.OPEN
        np.testing.assert_array_equal(report.residual_x, series.offset_x)
        assert np.all(report.ax != 0)

    def test_integral_removes_a_constant_offset(
        self, gains: PidGains, rng: np.random.Generator
    ):
        # Given
        series = constant_series(200e-6, -100e-6)

        # When
        report = run_loop(series, TrackingConfig(gains=gains), rng)

        # Then
        assert not report.unstable
        assert np.abs(report.residual_x[-100:]).max() < 3e-6
        assert np.abs(report.residual_y[-100:]).max() < 3e-6
        assert report.eta[-1] == pytest.approx(1.0, abs=1e-3)

    def test_divergence_reported(self, rng: np.random.Generator):
        # Given
        config = TrackingConfig(gains=PidGains(ki=-1.0))

        # When
        report = run_loop(constant_series(100e-6, 0.0), config, rng)

        # Then
        assert report.unstable
        assert 0 < report.unstable_step < 2000
        assert report.ex.size == report.unstable_step
        assert report.summary().unstable

    def test_empty_series_failure(self, rng: np.random.Generator):
        with pytest.raises(ContractViolation, match="non-empty series"):
            run_loop(constant_series(0.0, 0.0, n=0), TrackingConfig(), rng)


def test_closed_loop_reduces_pointing_error():
    # Given
    scenario = shortened("link500", duration_s=10.0)

    # When
    _, opened = run_tracking(scenario, mode=Mode.OPEN)
    _, closed = run_tracking(scenario, mode=Mode.CLOSED)

    # Then
    assert opened.mean_error == pytest.approx(92e-6, rel=0.1)
    assert closed.mean_error <= 75e-6
    assert closed.std_error <= 45e-6
    assert closed.mean_error < opened.mean_error
    assert closed.eta.mean() > opened.eta.mean()


def test_closed_loop_never_worse_across_seeds():
    # When
    errors = []
    for seed in range(20):
        scenario = shortened("link500", duration_s=2.0, seed=seed)
        _, opened = run_tracking(scenario, mode=Mode.OPEN)
        _, closed = run_tracking(scenario, mode=Mode.CLOSED)
        errors.append((closed.mean_error, opened.mean_error))

    # Then
    assert all(closed <= opened for closed, opened in errors)
