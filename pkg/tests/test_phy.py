"""Tests for constellations, thresholds, and the RSM detection chain."""

import itertools
import math

import numpy as np
import pytest
from scipy import stats

from rsmsim.mimo import zf_precoder
from rsmsim.phy import (
    IllegalSpatialWord,
    UnsupportedOrder,
    build_constellation,
    combine_and_detect_modulation,
    decode,
    detect_spatial,
    encode,
    exact_threshold_residual,
    joint_ml_detect,
    receive_amplitudes,
    threshold,
    transmit,
)


def random_channel(n_rx, n_tx, seed):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((n_rx, n_tx)) + 1j * rng.standard_normal((n_rx, n_tx))) / np.sqrt(2)


class TestConstellations:
    @pytest.mark.parametrize("kind,order,ring", [
        ("psk", 2, None), ("psk", 8, None), ("psk", 16, None),
        ("qam", 4, None), ("qam", 16, None), ("qam", 64, None),
        ("apsk", 16, 2.0),
    ])
    def test_unit_power_and_label_bijection(self, kind, order, ring):
        c = build_constellation(kind, order, ring)
        assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)
        assert sorted(c.labels.tolist()) == list(range(order))
        for label in range(order):
            assert c.labels[c.index_of_label(label)] == label

    def test_psk_beta_is_one(self):
        c = build_constellation("psk", 16)
        assert c.beta == pytest.approx(1.0, abs=1e-12)

    def test_qam16_beta_by_enumeration(self):
        # +-1/+-3 grid: minimum energy 2, mean energy 10.
        c = build_constellation("qam", 16)
        powers = np.abs(c.points) ** 2
        assert c.beta == pytest.approx(float(powers.min() / powers.mean()), abs=1e-15)
        assert c.beta == pytest.approx(0.2, abs=1e-12)

    def test_apsk16_beta_by_enumeration(self):
        # 4 inner points at unit radius, 12 outer at radius 2:
        # beta = 1 / ((4 + 12*4)/16) = 4/13.
        c = build_constellation("apsk", 16, ring_ratio=2.0)
        assert c.beta == pytest.approx(4.0 / 13.0, abs=1e-12)
        radii = np.sort(np.unique(np.round(np.abs(c.points), 12)))
        assert radii.size == 2
        assert radii[1] / radii[0] == pytest.approx(2.0, abs=1e-12)

    def test_psk_gray_labels_adjacent(self):
        c = build_constellation("psk", 16)
        for k in range(16):
            a, b = c.labels[k], c.labels[(k + 1) % 16]
            assert bin(int(a) ^ int(b)).count("1") == 1

    def test_qam_gray_labels_adjacent_on_grid(self):
        c = build_constellation("qam", 16)
        pts, labels = c.points, c.labels
        for i in range(16):
            for j in range(16):
                if i == j:
                    continue
                # Nearest grid neighbours differ by the minimum distance.
                if abs(pts[i] - pts[j]) < 0.7:
                    assert bin(int(labels[i]) ^ int(labels[j])).count("1") == 1

    @pytest.mark.parametrize("kind,order,ring", [
        ("psk", 3, None), ("psk", 128, None), ("qam", 8, None), ("qam", 32, None),
        ("apsk", 32, 2.0), ("apsk", 16, None), ("apsk", 16, 0.5), ("weird", 4, None),
    ])
    def test_unsupported(self, kind, order, ring):
        with pytest.raises(UnsupportedOrder):
            build_constellation(kind, order, ring)


class TestEncodeDecode:
    def test_direct_mapping(self):
        c = build_constellation("psk", 4)
        spatial, j = encode(np.array([1, 0, 1, 1]), c)
        np.testing.assert_array_equal(spatial, [1, 0])
        assert c.labels[j] == 0b11

    def test_training_word_is_all_ones(self):
        c = build_constellation("psk", 4)
        spatial, _ = encode(np.array([1, 1, 1, 1, 0, 0]), c)
        np.testing.assert_array_equal(spatial, [1, 1, 1, 1])

    def test_all_zero_spatial_rejected(self):
        c = build_constellation("psk", 4)
        with pytest.raises(IllegalSpatialWord):
            encode(np.array([0, 0, 0, 1, 1]), c)

    def test_round_trip_exhaustive(self):
        # Every legal word for 3 spatial bits + QPSK.
        c = build_constellation("psk", 4)
        for word in itertools.product((0, 1), repeat=5):
            bits = np.array(word)
            if not bits[:3].any():
                continue
            spatial, j = encode(bits, c)
            np.testing.assert_array_equal(decode(spatial, j, c), bits)


class TestTransmit:
    def test_single_antenna_excitation(self):
        h = random_channel(3, 8, seed=0)
        pre = zf_precoder(h)
        s = np.array([0, 1, 0])
        x = 0.6 - 0.8j
        out = transmit(pre, s, x, power=4.0)
        expected = math.sqrt(pre.alpha * 4.0) * x * pre.matrix_b[:, 1]
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_zero_forcing_identity_through_channel(self):
        h = random_channel(4, 16, seed=1)
        pre = zf_precoder(h)
        s = np.array([1, 0, 1, 1])
        x = complex(np.exp(1j * 0.3))
        y = h @ transmit(pre, s, x, power=9.0)
        np.testing.assert_allclose(y, math.sqrt(pre.alpha * 9.0) * s * x, atol=1e-8)

    def test_average_transmit_power(self):
        # E||x_tx||^2 over random words equals alpha*P*E||B s||^2*E|x|^2.
        h = random_channel(3, 12, seed=2)
        pre = zf_precoder(h)
        c = build_constellation("psk", 8)
        rng = np.random.default_rng(3)
        power = 2.0
        total, expected = 0.0, 0.0
        for _ in range(2000):
            idx = rng.integers(1, 8)
            s = np.array([(idx >> k) & 1 for k in range(3)])
            x = c.points[rng.integers(0, 8)]
            tx = transmit(pre, s, complex(x), power)
            total += float(np.sum(np.abs(tx) ** 2))
            expected += pre.alpha * power * float(
                np.sum(np.abs(pre.matrix_b @ s) ** 2)
            ) * abs(x) ** 2
        assert total == pytest.approx(expected, rel=1e-9)

    def test_rejects_all_zero(self):
        h = random_channel(2, 8, seed=4)
        pre = zf_precoder(h)
        with pytest.raises(IllegalSpatialWord):
            transmit(pre, np.array([0, 0]), 1.0 + 0j, power=1.0)


class TestReceiveAmplitudes:
    def test_trivial_values(self):
        np.testing.assert_array_equal(receive_amplitudes(np.zeros(3)), np.zeros(3))
        np.testing.assert_allclose(receive_amplitudes(np.array([3 + 4j])), [5.0])

    def test_rice_and_rayleigh_conformance(self):
        # Envelope of signal+noise (noise total variance sigma2) follows the
        # Rice law on energized branches and Rayleigh on silent ones.
        rng = np.random.default_rng(5)
        alpha_p, sigma2 = 6.0, 1.3
        n = 10**6
        sig_c = math.sqrt(sigma2 / 2.0)
        noise = sig_c * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        a_on = receive_amplitudes(math.sqrt(alpha_p) + noise)
        stat_on = stats.kstest(a_on, lambda x: stats.rice.cdf(x, b=math.sqrt(alpha_p) / sig_c, scale=sig_c))
        assert stat_on.pvalue > 1e-3
        noise2 = sig_c * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        a_off = receive_amplitudes(noise2)
        stat_off = stats.kstest(a_off, lambda x: stats.rayleigh.cdf(x, scale=sig_c))
        assert stat_off.pvalue > 1e-3


class TestThreshold:
    def test_hsa_closed_form(self):
        spec = threshold("hsa", alpha_p=4.0, sigma2=1.0, beta=1.0)
        assert spec.gamma == pytest.approx(1.0, abs=1e-15)
        spec = threshold("hsa", alpha_p=4.0, sigma2=1.0, beta=0.25)
        assert spec.gamma == pytest.approx(0.5, abs=1e-15)

    def test_msa_tracks_hsa_at_high_snr(self):
        # The relative gap decays like log(snr)/snr: 3.3% at 20 dB,
        # 0.45% at 30 dB (computed from the closed forms themselves).
        for db, bound in ((20.0, 0.033), (25.0, 0.0125), (30.0, 0.0045)):
            pm = 10 ** (db / 10)
            hsa = threshold("hsa", pm, 1.0).gamma
            msa = threshold("msa", pm, 1.0).gamma
            assert abs(msa - hsa) / hsa < bound

    def test_exact_satisfies_likelihood_equation(self):
        for db in (10.0, 15.0, 20.0, 30.0):
            pm = 10 ** (db / 10)
            spec = threshold("exact", pm, 1.0)
            assert abs(exact_threshold_residual(spec.gamma, pm, 1.0)) < 1e-10

    def test_exact_close_to_msa(self):
        pm = 100.0
        exact = threshold("exact", pm, 1.0).gamma
        msa = threshold("msa", pm, 1.0).gamma
        assert abs(exact - msa) / msa < 0.05

    def test_beta_rescales_all_modes(self):
        # Designing for beta*alpha_p must equal designing for that power.
        for mode in ("exact", "msa", "hsa"):
            direct = threshold(mode, alpha_p=20.0, sigma2=1.0, beta=0.2).gamma
            scaled = threshold(mode, alpha_p=4.0, sigma2=1.0, beta=1.0).gamma
            assert direct == pytest.approx(scaled, rel=1e-12)

    def test_ordering_sanity_at_high_snr(self):
        # All three designs grow like sqrt(min power) and sit pairwise
        # within 10% once the minimum-symbol SNR clears ~14.5 dB (the gap
        # is 10.3% at 14 dB and decays like log(snr)/snr from there).
        gammas = {m: [] for m in ("exact", "msa", "hsa")}
        for db in np.arange(14.5, 31.0, 1.0):
            pm = 10 ** (db / 10)
            vals = {m: threshold(m, pm, 1.0).gamma for m in gammas}
            for m, v in vals.items():
                gammas[m].append(v)
            pairs = list(itertools.combinations(vals.values(), 2))
            for a, b in pairs:
                assert abs(a - b) / min(a, b) < 0.10
        for series in gammas.values():
            assert all(x < y for x, y in zip(series, series[1:]))

    def test_high_snr_does_not_underflow(self):
        spec = threshold("msa", alpha_p=10**4.0, sigma2=1.0)
        assert math.isfinite(spec.gamma) and spec.gamma > 0
        spec = threshold("exact", alpha_p=10**4.0, sigma2=1.0)
        assert math.isfinite(spec.gamma) and spec.gamma > 0

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            threshold("hsa", alpha_p=0.0, sigma2=1.0)
        with pytest.raises(ValueError):
            threshold("hsa", alpha_p=1.0, sigma2=1.0, beta=0.0)
        with pytest.raises(ValueError):
            threshold("nope", alpha_p=1.0, sigma2=1.0)


class TestSpatialDetection:
    def test_all_above_threshold(self):
        spec = threshold("hsa", 4.0, 1.0)
        np.testing.assert_array_equal(
            detect_spatial(np.full(4, 10.0), spec), np.ones(4, dtype=int)
        )

    def test_tie_resolves_to_zero(self):
        spec = threshold("hsa", 4.0, 1.0)
        np.testing.assert_array_equal(
            detect_spatial(np.array([spec.gamma]), spec), [0]
        )

    @pytest.mark.parametrize("mode", ["exact", "msa", "hsa"])
    def test_noiseless_detection_every_mode(self, mode):
        # With zero noise the energized amplitude sqrt(beta*alpha_p) clears
        # the threshold in every design at reasonable SNR.
        alpha_p, sigma2, beta = 40.0, 1.0, 0.2
        spec = threshold(mode, alpha_p, sigma2, beta)
        amp = math.sqrt(beta * alpha_p)
        s = np.array([1, 0, 1])
        a = amp * s.astype(float)
        np.testing.assert_array_equal(detect_spatial(a, spec), s)

    def test_joint_ml_worked_example(self):
        # One envelope below the exact threshold and one above decides [0, 1].
        alpha_p, sigma2 = 20.0, 1.0
        gamma = threshold("exact", alpha_p, sigma2).gamma
        out = joint_ml_detect(np.array([0.9 * gamma, 1.1 * gamma]), alpha_p, sigma2)
        np.testing.assert_array_equal(out, [0, 1])

    def test_joint_ml_can_output_all_zero(self):
        alpha_p, sigma2 = 20.0, 1.0
        out = joint_ml_detect(np.array([0.01, 0.02]), alpha_p, sigma2)
        np.testing.assert_array_equal(out, [0, 0])

    @pytest.mark.parametrize("n_active", [1, 2, 3, 4])
    def test_equivalence_with_per_antenna(self, n_active):
        # Joint-ML and threshold detection agree off the tie set.
        alpha_p, sigma2 = 12.0, 1.0
        spec = threshold("exact", alpha_p, sigma2)
        rng = np.random.default_rng(10 + n_active)
        for _ in range(10_000):
            a = rng.uniform(0.0, 2.0 * math.sqrt(alpha_p), n_active)
            np.testing.assert_array_equal(
                detect_spatial(a, spec), joint_ml_detect(a, alpha_p, sigma2)
            )

    def test_equivalence_on_amplitude_grid(self):
        alpha_p, sigma2 = 10.0, 1.0
        spec = threshold("exact", alpha_p, sigma2)
        grid = np.linspace(0.0, 2.0 * math.sqrt(alpha_p), 200)
        for a1 in grid:
            amps = np.column_stack([np.full_like(grid, a1), grid])
            for row in amps[:: 40]:
                np.testing.assert_array_equal(
                    detect_spatial(row, spec), joint_ml_detect(row, alpha_p, sigma2)
                )


class TestCombineAndDetect:
    def test_noiseless_combining(self):
        c = build_constellation("psk", 16)
        alpha_p = 5.0
        s = np.array([1, 1, 0, 1])
        j_true = 11
        y = math.sqrt(alpha_p) * c.points[j_true] * s.astype(complex)
        j_hat, bits = combine_and_detect_modulation(y, s, alpha_p, c)
        assert j_hat == j_true
        label = int(c.labels[j_true])
        np.testing.assert_array_equal(bits, [(label >> (3 - i)) & 1 for i in range(4)])

    def test_all_zero_flags_fall_back_to_symbol_zero(self):
        c = build_constellation("psk", 16)
        j_hat, bits = combine_and_detect_modulation(
            np.array([1.0 + 0j]), np.array([0]), 5.0, c
        )
        assert j_hat == 0
        assert bits.shape == (4,)

    def test_combining_snr_matches_bpsk_closed_form(self):
        # With perfect flags on w branches the detector sees SNR w*alpha_p/
        # sigma2; BPSK errors then follow Q(sqrt(2*snr)) exactly.
        rng = np.random.default_rng(11)
        c = build_constellation("psk", 2)
        alpha_p, sigma2, w = 1.2, 1.0, 3
        n_trials = 200_000
        s = np.ones(w, dtype=int)
        errors = 0
        sig_c = math.sqrt(sigma2 / 2)
        js = rng.integers(0, 2, n_trials)
        noise = sig_c * (
            rng.standard_normal((n_trials, w)) + 1j * rng.standard_normal((n_trials, w))
        )
        y = math.sqrt(alpha_p) * c.points[js][:, None] + noise
        for t in range(n_trials):
            j_hat, _ = combine_and_detect_modulation(y[t], s, alpha_p, c)
            errors += j_hat != js[t]
        snr_c = w * alpha_p / sigma2
        p_expected = 0.5 * math.erfc(math.sqrt(snr_c))
        se = math.sqrt(p_expected * (1 - p_expected) / n_trials)
        assert abs(errors / n_trials - p_expected) < 3 * se


class TestNoiselessEndToEnd:
    def test_identity_on_legal_words(self):
        h = random_channel(6, 24, seed=12)
        from rsmsim.mimo import select_antennas

        sel = select_antennas(h, 3)
        pre = zf_precoder(sel.h_active)
        c = build_constellation("qam", 4)
        power = 10.0
        spec = threshold("exact", pre.alpha * power, 1.0, c.beta)
        for word in itertools.product((0, 1), repeat=5):
            bits = np.array(word)
            if not bits[:3].any():
                continue
            spatial, j = encode(bits, c)
            y = sel.h_active @ transmit(pre, spatial, complex(c.points[j]), power)
            a = receive_amplitudes(y)
            s_hat = detect_spatial(a, spec)
            np.testing.assert_array_equal(s_hat, spatial)
            j_hat, _ = combine_and_detect_modulation(y, s_hat, pre.alpha * power, c)
            assert j_hat == j
            np.testing.assert_array_equal(decode(s_hat, j_hat, c), bits)
