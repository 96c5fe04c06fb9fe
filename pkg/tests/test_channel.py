"""Tests for the clustered channel generator."""

import math

import numpy as np
import pytest

from rsmsim.channel import (
    ChannelParams,
    array_response,
    draw_channel,
    in_sector_fraction,
    load_realization,
    save_realization,
    sector_gain,
)

DEFAULT = ChannelParams(n_tx=32, n_rx=8)


class TestArrayResponse:
    def test_broadside(self):
        np.testing.assert_allclose(array_response(4, 0.0, 0.5), np.full(4, 0.5))

    def test_endfire_half_wavelength(self):
        v = array_response(2, 90.0, 0.5)
        np.testing.assert_allclose(v, np.array([1.0, -1.0]) / math.sqrt(2), atol=1e-12)

    def test_unit_norm_and_phase_progression(self):
        v = array_response(8, 17.0, 0.5)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        step = 2 * math.pi * 0.5 * math.sin(math.radians(17.0))
        diffs = np.angle(v[1:] / v[:-1])
        np.testing.assert_allclose(diffs, step, atol=1e-12)


class TestSectorGain:
    @pytest.mark.parametrize(
        "angle,center,width,expected",
        [
            (0.0, 0.0, 50.0, 1),
            (26.0, 0.0, 50.0, 0),
            (-24.9, 0.0, 50.0, 1),
            (25.0, 0.0, 50.0, 1),
            (350.0, 0.0, 50.0, 1),  # wraparound
            (180.0, 170.0, 30.0, 1),
            (190.0, 170.0, 30.0, 0),
        ],
    )
    def test_membership(self, angle, center, width, expected):
        assert sector_gain(angle, center, width) == expected


class TestDrawChannel:
    def test_single_ray_closed_form(self):
        # One cluster, one ray, zero spread: H is a scaled rank-one outer
        # product with squared Frobenius norm n_tx*n_rx*|g|^2/frac.
        params = ChannelParams(
            n_tx=8, n_rx=4, n_clusters=1, n_rays=1, angular_spread_deg=0.0
        )
        real = draw_channel(params, np.random.default_rng(3))
        arr, dep = real.ray_angles[0]
        v_r = array_response(4, float(arr), 0.5)
        v_t = array_response(8, float(dep), 0.5)
        g = real.ray_gains[0]
        expected = math.sqrt(8 * 4) * g * np.outer(v_r, v_t.conj())
        np.testing.assert_allclose(real.matrix, expected, atol=1e-12)
        assert np.linalg.matrix_rank(real.matrix) == 1
        assert np.linalg.norm(real.matrix) ** 2 == pytest.approx(
            8 * 4 * abs(g) ** 2, rel=1e-12
        )

    def test_reproducible(self):
        a = draw_channel(DEFAULT, np.random.default_rng(42))
        b = draw_channel(DEFAULT, np.random.default_rng(42))
        np.testing.assert_array_equal(a.matrix, b.matrix)
        np.testing.assert_array_equal(a.ray_gains, b.ray_gains)
        np.testing.assert_array_equal(a.ray_angles, b.ray_angles)

    def test_energy_normalization(self):
        # Sample mean of ||H||_F^2 over many draws within 5% of n_tx*n_rx.
        params = ChannelParams(n_tx=16, n_rx=4)
        rng = np.random.default_rng(11)
        n_draws = 10_000
        acc = 0.0
        for _ in range(n_draws):
            h = draw_channel(params, rng).matrix
            acc += float(np.sum(np.abs(h) ** 2))
        assert acc / n_draws / (16 * 4) == pytest.approx(1.0, abs=0.05)

    def test_out_of_sector_rays_do_not_contribute(self):
        # A narrow sector far from a forced ray mean: huge spread pushes many
        # rays out; their pattern gain must null them in the matrix sum.
        params = ChannelParams(
            n_tx=4, n_rx=2, n_clusters=2, n_rays=5, angular_spread_deg=40.0
        )
        real = draw_channel(params, np.random.default_rng(5))
        mask = np.array(
            [sector_gain(float(dep), 0.0, 50.0) for dep in real.ray_angles[:, 1]]
        )
        v_r = np.stack([array_response(2, float(a), 0.5) for a in real.ray_angles[:, 0]])
        v_t = np.stack([array_response(4, float(a), 0.5) for a in real.ray_angles[:, 1]])
        w = math.sqrt(4 * 2 / 10) * real.ray_gains * mask
        expected = (v_r.T * w) @ v_t.conj()
        np.testing.assert_allclose(real.matrix, expected, atol=1e-12)
        assert mask.sum() < 10  # the configuration really drops rays

    def test_rank_bounded_by_path_count(self):
        params = ChannelParams(n_tx=12, n_rx=6, n_clusters=1, n_rays=2)
        real = draw_channel(params, np.random.default_rng(9))
        s = np.linalg.svd(real.matrix, compute_uv=False)
        assert np.sum(s > 1e-10 * s[0]) <= 2

    def test_calibration_fraction_sane(self):
        frac = in_sector_fraction(DEFAULT)
        assert 0.9 < frac <= 1.0  # 1-degree spread rarely leaves a 50-degree sector

    def test_roundtrip_serialization(self, tmp_path):
        real = draw_channel(DEFAULT, np.random.default_rng(1))
        path = tmp_path / "chan.json"
        save_realization(real, path)
        back = load_realization(path)
        np.testing.assert_allclose(back.matrix, real.matrix, atol=1e-15)
        np.testing.assert_allclose(back.ray_gains, real.ray_gains, atol=1e-15)
        assert back.gain_scale == pytest.approx(real.gain_scale)


class TestChannelParamsValidation:
    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            ChannelParams(n_tx=0, n_rx=4)
        with pytest.raises(ValueError):
            ChannelParams(n_tx=4, n_rx=4, n_clusters=0)

    def test_rejects_bad_sector(self):
        with pytest.raises(ValueError):
            ChannelParams(n_tx=4, n_rx=4, sector_width_deg=0.0)
        with pytest.raises(ValueError):
            ChannelParams(n_tx=4, n_rx=4, sector_width_deg=400.0)

    def test_rejects_bad_scalars(self):
        with pytest.raises(ValueError):
            ChannelParams(n_tx=4, n_rx=4, antenna_spacing_wavelengths=0.0)
        with pytest.raises(ValueError):
            ChannelParams(n_tx=4, n_rx=4, gain_variance=-1.0)
