import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jrcsim.channel import ChannelRealization, apply_channel, complex_awgn
from jrcsim.equalizer import demodulate
from jrcsim.framing import FrameSpec, assemble_frame, barker13_phases
from jrcsim.receiver import (
    CfarConfig,
    DetectionReport,
    MatchedOutputs,
    RadarOutput,
    above_threshold,
    ca_alpha,
    cfar_threshold_ca,
    cfar_threshold_known,
    composite_autocorr,
    composite_reference,
    detection_mask,
    estimate_pulse_width,
    joint_detect,
    local_max_mask,
    matched_filter_pair,
    radar_noise_power,
    radar_process,
    radar_response_model,
)
from jrcsim.seqdesign import ideal_correlations
from oracles import ca_threshold_loop, direct_xcorr_lags, radar_double_sum

PH = barker13_phases()
DEMO_BITS = np.array([1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1])
bit_vectors = st.lists(st.integers(0, 1), min_size=13, max_size=13).map(np.array)


def frame_of(pair, bits, phases=PH):
    return assemble_frame(pair, FrameSpec(bits, phases, pair.L))


class TestMatchedFilter:
    def test_against_direct(self, pair32, rng):
        r = rng.standard_normal(100) + 1j * rng.standard_normal(100)
        mo = matched_filter_pair(r, pair32)
        np.testing.assert_allclose(mo.r1, direct_xcorr_lags(r, pair32.s1), atol=1e-9)
        np.testing.assert_allclose(mo.r2, direct_xcorr_lags(r, pair32.s2), atol=1e-9)
        assert mo.lag0_index == 31

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            MatchedOutputs(np.zeros(3), np.zeros(4), 0)

    def test_fig_frame_sign_pattern(self, pair200):
        r = frame_of(pair200, DEMO_BITS).samples
        mo = matched_filter_pair(r, pair200)
        idx = mo.lag0_index + 200 * np.arange(13)
        np.testing.assert_array_equal((np.abs(mo.r1[idx]) > np.abs(mo.r2[idx])).astype(int), DEMO_BITS)


class TestRadarProcess:
    def test_orders_agree(self, pair200, rng):
        r = apply_channel(
            frame_of(pair200, rng.integers(0, 2, 13)),
            ChannelRealization(((37, 1), (260, 0.4 - 0.2j))),
        )
        a = radar_process(r, pair200, PH, "cascade").r_f2
        b = radar_process(r, pair200, PH, "composite").r_f2
        assert np.max(np.abs(a - b)) / np.abs(a).max() <= 1e-9

    def test_against_double_sum(self, pair32, rng):
        r = rng.standard_normal(500) + 1j * rng.standard_normal(500)
        got = radar_process(r, pair32, PH).r_f2
        ref = radar_double_sum(r, pair32.s1, pair32.s2, PH, 32)
        assert np.max(np.abs(got - ref)) / np.abs(ref).max() <= 1e-9

    def test_composite_reference(self, pair32):
        g = composite_reference(pair32, PH)
        np.testing.assert_allclose(g[32 * 4 : 32 * 5], (pair32.s1 + pair32.s2) * np.exp(1j * PH[4]))

    def test_unknown_order(self, pair32):
        with pytest.raises(ValueError):
            radar_process(np.ones(10), pair32, PH, "sideways")

    def test_fig_frame_peak(self, pair200):
        out = radar_process(frame_of(pair200, DEMO_BITS).samples, pair200, PH)
        mag = np.abs(out.r_f2)
        assert np.argmax(mag) == out.lag0_index
        assert out.at(0).real == pytest.approx(13 * 200, rel=0.08)
        assert np.delete(mag, out.lag0_index).max() < 0.2 * mag.max()

    def test_pulse_width_one_chip(self, pair200):
        out = radar_process(frame_of(pair200, DEMO_BITS).samples, pair200, PH)
        assert estimate_pulse_width(out, 0) == 1

    def test_output_delays(self):
        out = RadarOutput(np.zeros(7, complex), 3)
        np.testing.assert_array_equal(out.delays, np.arange(-3, 4))
        with pytest.raises(ValueError):
            RadarOutput(np.zeros(3, complex), 3)


class TestResponseModel:
    @settings(max_examples=15, deadline=None)
    @given(bit_vectors)
    def test_model_matches_processing(self, pair32, bits):
        out = radar_process(frame_of(pair32, bits).samples, pair32, PH).r_f2
        model = radar_response_model(bits, PH, pair32.correlations(), 32).r_f2
        assert np.max(np.abs(out - model)) / np.abs(out).max() <= 1e-9

    @settings(max_examples=30, deadline=None)
    @given(bit_vectors, bit_vectors)
    def test_ideal_pair_is_bit_independent(self, a, b):
        corr = ideal_correlations(16)
        ra = radar_response_model(a, PH, corr, 16).r_f2
        rb = radar_response_model(b, PH, corr, 16).r_f2
        np.testing.assert_array_equal(ra, rb)

    def test_ideal_pair_separates_into_phase_code(self):
        # with ideal correlations the output is E_s times the phase-code
        # autocorrelation on the symbol grid and zero elsewhere
        corr = ideal_correlations(16)
        out = radar_response_model(DEMO_BITS, PH, corr, 16)
        grid = out.lag0_index + 16 * np.arange(-12, 13)
        np.testing.assert_allclose(out.r_f2[grid], 16 * composite_autocorr(PH), atol=1e-12)
        off = np.ones(out.r_f2.size, bool)
        off[grid] = False
        assert not out.r_f2[off].any()

    def test_composite_autocorr_barker(self):
        R2 = composite_autocorr(PH)
        assert R2[12] == pytest.approx(13)
        assert np.max(np.abs(np.delete(R2, 12))) == pytest.approx(1)

    def test_bits_phase_mismatch(self, pair32):
        with pytest.raises(ValueError):
            radar_response_model([1, 0], PH, pair32.correlations(), 32)


class TestCfar:
    @pytest.mark.parametrize("M", [2, 8, 32])
    @pytest.mark.parametrize("P", [1e-2, 1e-3, 1e-6])
    def test_alpha_identity(self, M, P):
        assert (1 + ca_alpha(M, P) / M) ** (-M) == pytest.approx(P, rel=1e-12)

    @pytest.mark.parametrize("guard", [0, 2, 5])
    def test_ca_against_loop(self, rng, guard):
        x = rng.exponential(size=90)
        cfg = CfarConfig("ca", M_ref=16, guard=guard, P_FA=1e-3)
        ref = ca_threshold_loop(x, 16, guard, ca_alpha(16, 1e-3))
        np.testing.assert_allclose(cfar_threshold_ca(x, cfg), ref, rtol=1e-12)

    def test_ca_batched(self, rng):
        X = rng.exponential(size=(3, 60))
        cfg = CfarConfig("ca", M_ref=8, guard=1)
        got = cfar_threshold_ca(X, cfg)
        for i in range(3):
            np.testing.assert_allclose(got[i], cfar_threshold_ca(X[i], cfg))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_ca_homogeneous(self, c):
        x = np.random.default_rng(0).exponential(size=80)
        cfg = CfarConfig("ca", M_ref=8, guard=2)
        np.testing.assert_allclose(cfar_threshold_ca(c * x, cfg), c * cfar_threshold_ca(x, cfg), rtol=1e-10)
        np.testing.assert_array_equal(above_threshold(c * x, cfg), above_threshold(x, cfg))

    def test_ca_too_short(self):
        with pytest.raises(ValueError):
            cfar_threshold_ca(np.ones(10), CfarConfig("ca", M_ref=8, guard=1))

    def test_ca_false_alarm_rate_iid(self, rng):
        x = rng.exponential(size=400_000)
        cfg = CfarConfig("ca", M_ref=32, guard=2, P_FA=1e-2)
        rate = np.mean(above_threshold(x, cfg))
        assert rate == pytest.approx(1e-2, rel=0.1)

    def test_known_threshold(self):
        cfg = CfarConfig("known", P_FA=1e-4, sigma2=3.0)
        T = cfar_threshold_known(cfg)
        assert np.exp(-T * T / 3.0) == pytest.approx(1e-4)
        with pytest.raises(ValueError):
            cfar_threshold_known(CfarConfig("known"))

    @pytest.mark.parametrize(
        "kw",
        [
            {"P_FA": 0.0},
            {"P_FA": 1.0},
            {"M_ref": 7},
            {"M_ref": 0},
            {"guard": -1},
            {"mode": "os"},
            {"mode": "known", "sigma2": -1.0},
        ],
    )
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            CfarConfig(**kw)

    def test_noise_power_matches_empirical(self, pair32, rng):
        sigma2 = 2.0
        vals = []
        for _ in range(40):
            y = radar_process(complex_awgn(2000, sigma2, rng), pair32, PH).r_f2
            vals.append(y[600:1400])
        emp = np.mean(np.abs(np.concatenate(vals)) ** 2)
        assert emp == pytest.approx(radar_noise_power(pair32, PH, sigma2), rel=0.05)


class TestDetection:
    def test_local_max(self):
        m = np.array([0, 2, 2, 1, 3, 3, 3, 0.0])
        # plateau keeps its first sample; rising edge does not count
        np.testing.assert_array_equal(local_max_mask(m), [0, 1, 0, 0, 1, 0, 0, 0])

    def test_local_max_edges(self):
        np.testing.assert_array_equal(local_max_mask(np.array([5.0, 1, 4])), [1, 0, 1])

    def test_two_path_report(self, pair200):
        ch = ChannelRealization(((30, 1), (430, 0.6 + 0.3j)))
        r = apply_channel(frame_of(pair200, DEMO_BITS), ch, length=16 * 200)
        out = radar_process(r, pair200, PH)
        cfg = CfarConfig("known", P_FA=1e-6, sigma2=radar_noise_power(pair200, PH, 30.0))
        rep = joint_detect(out, cfg)
        np.testing.assert_array_equal(rep.delays, [30, 430])
        assert rep.t0 == 30 and rep.main_index == 0
        ratio = rep.values[1] / rep.values[0]
        assert abs(ratio - (0.6 + 0.3j)) < 0.1
        bits = demodulate(matched_filter_pair(r, pair200), rep, PH, 200)
        np.testing.assert_array_equal(bits, DEMO_BITS)

    def test_ca_mode_detects(self, pair200, rng):
        ch = ChannelRealization(((100, 1),))
        r = apply_channel(frame_of(pair200, DEMO_BITS), ch, length=16 * 200)
        r = r + complex_awgn(r.size, 20.0, rng)
        rep = joint_detect(radar_process(r, pair200, PH), CfarConfig("ca", P_FA=1e-6))
        assert rep.t0 == 100

    def test_mask_matches_report(self, pair32, rng):
        r = complex_awgn(600, 1.0, rng)
        out = radar_process(r, pair32, PH)
        cfg = CfarConfig("ca", P_FA=0.05)
        rep = joint_detect(out, cfg)
        np.testing.assert_array_equal(
            rep.delays, np.flatnonzero(detection_mask(out.r_f2, cfg)) - out.lag0_index
        )


class TestDetectionReport:
    def test_from_peaks_sorts_and_picks_main(self):
        rep = DetectionReport.from_peaks([40, 3, 10], [1 + 0j, 0.5j, -3])
        np.testing.assert_array_equal(rep.delays, [3, 10, 40])
        assert rep.t0 == 10 and rep.main_value == -3

    def test_ties_pick_earliest(self):
        assert DetectionReport.from_peaks([5, 9], [1j, -1]).t0 == 5

    def test_json_round_trip(self):
        rep = DetectionReport.from_peaks([1, 7], [0.1 + 0.2j, 3 - 1j])
        back = DetectionReport.from_json(rep.to_json())
        np.testing.assert_array_equal(back.delays, rep.delays)
        np.testing.assert_array_equal(back.values, rep.values)
        assert back.main_index == rep.main_index

    def test_empty(self):
        rep = DetectionReport.from_peaks([], [])
        assert rep.empty and rep.M_paths == 0
        with pytest.raises(ValueError):
            rep.t0

    def test_duplicate_delays_rejected(self):
        with pytest.raises(ValueError):
            DetectionReport(np.array([1, 1]), np.array([1j, 1j]), 0)
