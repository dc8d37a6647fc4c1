import math

import numpy as np
import pytest

from skylink.base import ContractViolation, StatisticError
from skylink.detection.detection import (
    apply_dead_time,
    detect,
    imzi_response,
    imzi_table,
    qber_x_from_visibility,
    sample_occupied_train,
    two_detector_visibility,
    visibility,
    zero_truncated_poisson,
)
from skylink.detection.models import (
    Bin,
    DetectorConfig,
    Detector,
    DetectorSet,
    ImziConfig,
    ReceiverConfig,
)
from skylink.protocol.models import (
    Basis,
    BinAmplitudes,
    Intensity,
    PulseTrain,
    SourceConfig,
    TimeBinState,
)
from skylink.protocol.protocol import (
    generate_pulse_train,
    sift,
    state_amplitudes,
)

SLOT_S = 1 / 595e6
TAU_S = 800e-12


def ideal_detectors(**update) -> DetectorSet:
    detector = DetectorConfig(
        efficiency=1.0, dark_rate_hz=0.0, dead_time_s=0.0, jitter_std_s=0.0
    ).model_copy(update=update)
    return DetectorSet(z=detector, x_out1=detector, x_out2=detector)


def fixed_train(state: TimeBinState, n: int, photons: int = 1):
    return PulseTrain(
        index=np.arange(n, dtype=np.int64),
        state=np.full(n, state, dtype=np.int8),
        intensity=np.zeros(n, dtype=np.int8),
        mean_photons=np.full(n, 0.5),
        photons=np.full(n, photons),
        slot_period_s=SLOT_S,
        bin_delay_s=TAU_S,
        leakage=0.0,
        n_slots=n,
    )


def coupler_oracle(early: complex, late: complex, phase: float):
    """Outputs of two 50:50 couplers around a delay line."""
    coupler = np.array([[1, 1j], [1j, 1]]) / math.sqrt(2)
    # Short arm passes at once, long arm one bin later with the phase.
    arms = {}
    for time_bin, amplitude in ((0, early), (1, late)):
        short, long_ = coupler @ np.array([amplitude, 0])
        arms.setdefault(time_bin, np.zeros(2, dtype=complex))
        arms.setdefault(time_bin + 1, np.zeros(2, dtype=complex))
        arms[time_bin] += np.array([short, 0])
        arms[time_bin + 1] += np.array([0, long_ * np.exp(1j * phase)])
    outputs = np.zeros((2, 3))
    for time_bin in range(3):
        out = coupler @ arms[time_bin]
        outputs[:, time_bin] = np.abs(out) ** 2
    return outputs


class TestImzi:
    @pytest.mark.parametrize("phase", np.linspace(0, 2 * math.pi, 32))
    @pytest.mark.parametrize("state", list(TimeBinState))
    def test_table_matches_coupler_matrices(
        self, phase: float, state: TimeBinState
    ):
        # Given
        amplitudes = state_amplitudes(state)

        # When
        table = imzi_table(amplitudes.early, amplitudes.late, phase, 1.0)

        # Then
        # The oracle lists the ports in the opposite order.
        expected = coupler_oracle(amplitudes.early, amplitudes.late, phase)
        np.testing.assert_allclose(table, expected[::-1], atol=1e-12)
        assert table.sum() == pytest.approx(1.0)

    def test_plus_state_response(self):
        # When
        response = imzi_response(
            state_amplitudes(TimeBinState.PLUS), ImziConfig()
        )

        # Then
        assert response[(Detector.X_OUT1, Bin.CENTRAL)] == pytest.approx(
            0.5
        )
        assert response[(Detector.X_OUT2, Bin.CENTRAL)] == pytest.approx(
            0.0
        )
        assert response[(Detector.X_OUT1, Bin.EARLY)] == pytest.approx(
            0.125
        )

    @pytest.mark.parametrize("intrinsic", [1.0, 0.94, 0.85])
    def test_partial_coherence_visibility(self, intrinsic: float):
        # When
        response = imzi_response(
            state_amplitudes(TimeBinState.PLUS),
            ImziConfig(intrinsic_visibility=intrinsic),
        )

        # Then
        bright = response[(Detector.X_OUT1, Bin.CENTRAL)]
        dark = response[(Detector.X_OUT2, Bin.CENTRAL)]
        assert (bright - dark) / (bright + dark) == pytest.approx(
            intrinsic
        )

    def test_phase_override_swaps_ports(self):
        # When
        response = imzi_response(
            state_amplitudes(TimeBinState.PLUS), ImziConfig(), phase=math.pi
        )

        # Then
        assert response[(Detector.X_OUT2, Bin.CENTRAL)] == pytest.approx(
            0.5
        )

    def test_unnormalized_amplitudes_failure(self):
        with pytest.raises(ContractViolation, match="must be normalized"):
            imzi_response(BinAmplitudes(early=1, late=1), ImziConfig())


class TestDeadTime:
    def test_non_paralyzable(self):
        # Given
        times = np.array([0.0, 5.0, 12.0, 21.0, 25.0, 40.0, 41.0])

        # When
        kept = apply_dead_time(times, 20.0)

        # Then
        assert kept.tolist() == [
            True,
            False,
            False,
            True,
            False,
            False,
            True,
        ]

    def test_matches_sequential_reference(self, rng: np.random.Generator):
        # Given
        times = np.sort(rng.random(5000) * 1e-5)
        dead_time = 20e-9
        expected = []
        last = -np.inf
        for time in times:
            expected.append(time - last >= dead_time)
            if expected[-1]:
                last = time

        # Then
        assert apply_dead_time(times, dead_time).tolist() == expected

    def test_carried_last_click(self):
        # When
        kept = apply_dead_time(np.array([5.0, 30.0]), 20.0, last_click=0.0)

        # Then
        assert kept.tolist() == [False, True]

    def test_no_dead_time(self):
        assert apply_dead_time(np.array([0.0, 0.0]), 0.0).all()
        assert apply_dead_time(np.empty(0), 20.0).size == 0


class TestDetect:
    @pytest.mark.parametrize(
        "state, expected_bin",
        [(TimeBinState.EARLY, Bin.EARLY), (TimeBinState.LATE, Bin.LATE)],
    )
    def test_ideal_z_clicks(
        self,
        state: TimeBinState,
        expected_bin: Bin,
        rng: np.random.Generator,
    ):
        # Given
        train = fixed_train(state, 20_000)

        # When
        events = detect(train, 1.0, ideal_detectors(), ImziConfig(), rng)

        # Then
        z = events.detector == Detector.Z
        assert np.all(events.bin[z] == expected_bin)
        assert z.mean() == pytest.approx(0.5, abs=0.02)
        assert events.size == 20_000
        assert events.diagnostics.gated_out == 0

    def test_plus_state_clicks(self, rng: np.random.Generator):
        # Given
        train = fixed_train(TimeBinState.PLUS, 20_000)

        # When
        events = detect(train, 1.0, ideal_detectors(), ImziConfig(), rng)

        # Then
        x = events.detector != Detector.Z
        central = events.bin[x] == Bin.CENTRAL
        assert central.mean() == pytest.approx(0.5, abs=0.02)
        assert np.all(events.detector[x][central] == Detector.X_OUT1)

    def test_late_side_bin_extends_past_the_slot(
        self, rng: np.random.Generator
    ):
        # Given
        train = fixed_train(TimeBinState.LATE, 20_000)

        # When
        events = detect(
            train,
            1.0,
            ideal_detectors(),
            ImziConfig(),
            rng,
            ReceiverConfig(split_z=1e-6),
        )

        # Then
        side = (events.detector != Detector.Z) & (events.bin == Bin.LATE)
        offset = events.time_s[side] - events.slot[side] * SLOT_S
        assert side.any()
        assert offset == pytest.approx(2.25 * TAU_S)
        assert np.all(offset > SLOT_S)
        assert events.diagnostics.gated_out == 0

    def test_z_rate_scales_with_transmittance(
        self, rng: np.random.Generator
    ):
        # Given
        train = generate_pulse_train(200_000, SourceConfig(), rng)
        detectors = ideal_detectors(efficiency=0.85)

        # When
        events = detect(train, 0.1, detectors, ImziConfig(), rng)

        # Then
        detected = 0.1 * 0.5 * 0.85
        expected = 0.7 * -math.expm1(-0.5 * detected) + 0.3 * -math.expm1(
            -0.2 * detected
        )
        z_rate = np.count_nonzero(events.detector == Detector.Z) / 200_000
        assert z_rate == pytest.approx(expected, rel=0.05)

    def test_dark_counts(self, rng: np.random.Generator):
        # Given
        detectors = ideal_detectors(dark_rate_hz=1e6)
        train = fixed_train(TimeBinState.EARLY, 200_000, photons=0)

        # When
        events = detect(train, 1.0, detectors, ImziConfig(), rng)

        # Then
        expected = 3 * 200_000 * -math.expm1(-1e6 * SLOT_S)
        assert events.diagnostics.dark_clicks == pytest.approx(
            expected, rel=0.1
        )
        assert events.diagnostics.gated_out > 0
        assert events.size + events.diagnostics.gated_out == (
            events.diagnostics.dark_clicks
        )

    def test_dead_time_suppresses_consecutive_slots(
        self, rng: np.random.Generator
    ):
        # Given
        train = fixed_train(TimeBinState.EARLY, 1000, photons=50)
        detectors = ideal_detectors(dead_time_s=20e-9)

        # When
        events = detect(
            train,
            1.0,
            detectors,
            ImziConfig(),
            rng,
            ReceiverConfig(split_z=0.999999),
        )

        # Then
        z_slots = events.slot[events.detector == Detector.Z]
        assert np.diff(z_slots).min() * SLOT_S >= 20e-9 - 1e-12
        assert events.diagnostics.dead_time_suppressed > 0
        assert events.last_clicks[Detector.Z] > 0

    def test_transmittance_outside_unit_interval_failure(
        self, rng: np.random.Generator
    ):
        with pytest.raises(ContractViolation, match=r"\[0, 1\]"):
            detect(
                fixed_train(TimeBinState.EARLY, 10),
                1.5,
                ideal_detectors(),
                ImziConfig(),
                rng,
            )

    def test_interferometer_delay_mismatch_failure(
        self, rng: np.random.Generator
    ):
        with pytest.raises(ContractViolation, match="bin separation"):
            detect(
                fixed_train(TimeBinState.PLUS, 10),
                1.0,
                ideal_detectors(),
                ImziConfig(delay_s=1.2 * TAU_S),
                rng,
            )

    def test_events_sorted_and_valid(self, rng: np.random.Generator):
        # Given
        train = generate_pulse_train(50_000, SourceConfig(), rng)

        # When
        events = detect(train, 0.5, DetectorSet(), ImziConfig(), rng)

        # Then
        order = np.lexsort((events.detector, events.slot))
        np.testing.assert_array_equal(order, np.arange(events.size))
        z = events.detector == Detector.Z
        assert not np.any(events.bin[z] == Bin.CENTRAL)
        first = next(events.events())
        assert first.slot_index == events.slot[0]


class TestSparseSampling:
    def test_matches_dense_tally(self, rng: np.random.Generator):
        # Given
        source = SourceConfig()
        receiver = ReceiverConfig(internal_loss_db=4.0)
        transmittance = np.full(20, 0.05)
        bin_slots = 200_000
        n = transmittance.size * bin_slots
        imzi = ImziConfig()

        # When
        sparse = sample_occupied_train(
            source, DetectorSet(), receiver, transmittance, bin_slots, rng
        )
        sparse_events = detect(
            sparse, None, DetectorSet(), imzi, rng, receiver
        )
        sparse_tally = sift(sparse, sparse_events)
        dense = generate_pulse_train(n, source, rng)
        dense_events = detect(
            dense, 0.05, DetectorSet(), imzi, rng, receiver
        )
        dense_tally = sift(dense, dense_events)

        # Then
        assert sparse.is_sparse and sparse.n_slots == n
        assert sparse_tally.elapsed_s == pytest.approx(
            dense_tally.elapsed_s
        )
        assert sparse_tally.total(Basis.Z) == pytest.approx(
            dense_tally.total(Basis.Z), rel=0.06
        )
        assert sparse_tally.total(Basis.X) == pytest.approx(
            dense_tally.total(Basis.X), rel=0.08
        )
        sparse_share = sparse_tally.n_z[Intensity.SIGNAL] / (
            sparse_tally.total(Basis.Z)
        )
        dense_share = dense_tally.n_z[Intensity.SIGNAL] / (
            dense_tally.total(Basis.Z)
        )
        assert sparse_share == pytest.approx(dense_share, abs=0.02)


    def test_slots_stay_in_range(self, rng: np.random.Generator):
        # When
        train = sample_occupied_train(
            SourceConfig(),
            DetectorSet(),
            ReceiverConfig(),
            np.array([0.0, 0.5, 0.0]),
            1000,
            rng,
            start=3000,
        )

        # Then
        assert np.all(np.diff(train.index) > 0)
        assert train.index.min() >= 3000
        assert train.index.max() < 6000
        assert np.all(train.arrived <= train.photons)


class TestVisibility:
    def test_visibility_and_qber(self):
        assert visibility(97, 3) == pytest.approx(0.94)
        assert qber_x_from_visibility(0.94) == pytest.approx(0.03)
        assert qber_x_from_visibility(0.85) == pytest.approx(0.075)

    def test_invalid_counts(self):
        with pytest.raises(ContractViolation, match="below minimum"):
            visibility(1, 2)
        with pytest.raises(StatisticError, match="without counts"):
            visibility(0, 0)
        with pytest.raises(ContractViolation, match="outside"):
            qber_x_from_visibility(1.5)

    def test_two_detector_visibility(self, rng: np.random.Generator):
        # Given
        train = generate_pulse_train(2_000_000, SourceConfig(), rng)

        # When
        measured = two_detector_visibility(
            train,
            0.05,
            DetectorSet(),
            ImziConfig(intrinsic_visibility=0.85),
            rng,
        )

        # Then
        assert measured == pytest.approx(0.85, abs=0.03)


def test_sparse_dark_rate(rng: np.random.Generator):
    # Given
    source = SourceConfig()
    bin_slots = int(round(1e-3 / source.slot_period_s))
    detectors = DetectorSet()

    # When
    train = sample_occupied_train(
        source,
        detectors,
        ReceiverConfig(),
        np.zeros(10_000),
        bin_slots,
        rng,
    )

    # Then
    assert train.arrived.sum() == 0
    rates = train.dark.sum(axis=0) / 10.0
    for rate in rates:
        assert rate == pytest.approx(100.0, abs=3 * math.sqrt(1000) / 10)


def test_detected_events_fall_with_loss():
    # Given
    losses_db = [0.0, 3.0, 10.0, 20.0]
    source, receiver = SourceConfig(), ReceiverConfig()
    detectors = DetectorSet()

    # When
    totals = []
    for loss_db in losses_db:
        total = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            train = sample_occupied_train(
                source,
                detectors,
                receiver,
                np.array([10 ** (-loss_db / 10)]),
                200_000,
                rng,
            )
            events = detect(
                train, None, detectors, ImziConfig(), rng, receiver
            )
            total += events.size
        totals.append(total)

    # Then
    assert all(b <= a for a, b in zip(totals, totals[1:]))
    assert totals[-1] < totals[0]


@pytest.mark.parametrize("mean", [1e-4, 0.5, 5.0, 80.0])
def test_zero_truncated_poisson(rng: np.random.Generator, mean: float):
    # When
    draws = zero_truncated_poisson(np.full(100_000, mean), rng)

    # Then
    assert draws.min() >= 1
    assert draws.mean() == pytest.approx(
        mean / -math.expm1(-mean), rel=0.01
    )
