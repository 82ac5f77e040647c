import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from starswipt.scenario import (ChannelSet, SystemConfig, build_channels, config_field_names, db_to_linear,
                                dbm_to_watts, path_loss_amplitude, place_users, sample_channel,
                                watts_to_dbm)


def test_defaults_match_setup():
    cfg = SystemConfig()
    assert (cfg.K, cfg.K_r, cfg.K_t) == (4, 2, 2)
    assert cfg.P_max_dbm == pytest.approx(42.0)
    assert watts_to_dbm(cfg.sigma2) == pytest.approx(-70.0)
    assert watts_to_dbm(cfg.delta2) == pytest.approx(-60.0)
    assert (cfg.alpha_bs_ris, cfg.alpha_ris_user, cfg.alpha_bs_user) == (2.2, 2.0, 3.8)
    assert cfg.bs_pos == (0.0, 0.0, 2.0) and cfg.ris_pos == (0.0, 15.0, 2.0)
    assert cfg.user_region_centers == ((-2.0, 15.0, 1.0), (2.0, 15.0, 1.0))
    assert cfg.rician_k == pytest.approx(10 ** 0.3)
    assert list(cfg.sides) == ["r", "r", "t", "t"]


def test_unit_conversions():
    assert dbm_to_watts(42.0) == pytest.approx(10 ** 4.2 / 1000)
    assert dbm_to_watts(30.0) == pytest.approx(1.0)
    assert db_to_linear(3.0) == pytest.approx(1.9952623)


@given(st.floats(-150, 80))
def test_dbm_round_trip(p):
    assert float(watts_to_dbm(dbm_to_watts(p))) == pytest.approx(p, abs=1e-9)


@pytest.mark.parametrize("field, value", [
    ("K_r", 0), ("K_t", 0), ("P_max", 0.0), ("sigma2", 0.0), ("delta2", -1.0), ("E_min", -1.0),
    ("eta", 0.0), ("eta", 1.5), ("N", 0), ("M", 0),
])
def test_invalid_config_names_field(field, value):
    with pytest.raises(ValueError, match=field):
        SystemConfig(**{field: value})


def test_from_db_and_no_floor():
    cfg = SystemConfig.from_db(P_max_dbm=30.0, E_min_dbm=None)
    assert cfg.P_max == pytest.approx(1.0) and cfg.E_min == 0.0
    assert "E_min" in config_field_names()


def test_path_loss_examples():
    assert path_loss_amplitude(1.0, 2.2) == pytest.approx(10 ** -1.5, rel=1e-9)
    # direct evaluation: sqrt(C0 * d^-alpha)
    assert path_loss_amplitude(15.0, 2.2) == pytest.approx(math.sqrt(1e-3 * 15.0 ** -2.2), rel=1e-12)
    assert path_loss_amplitude(15.0, 2.2) == pytest.approx(1.608e-3, rel=1e-3)
    assert path_loss_amplitude(15.0, 2.0) == pytest.approx(math.sqrt(1e-3 / 225), rel=1e-12)
    assert path_loss_amplitude(15.0, 2.0) == pytest.approx(2.108e-3, rel=1e-3)
    with pytest.raises(ValueError):
        path_loss_amplitude(0.0, 2.0)


def test_rayleigh_unit_power():
    H = sample_channel(1000, 100, 0.0, rng=0)
    assert np.mean(np.abs(H) ** 2) == pytest.approx(1.0, rel=0.02)


def test_rician_limit_is_los():
    los = np.exp(1j * np.linspace(0, 3, 12)).reshape(3, 4)
    H = sample_channel(3, 4, 1e9, los_component=los, rng=1)
    assert np.max(np.abs(H - los)) <= 1e-4


def test_rician_power_ratio():
    kappa = 2.0
    los = np.exp(1j * np.arange(4.0))[None, :]
    draws = np.array([sample_channel(1, 4, kappa, los_component=los, rng=s) for s in range(25000)])
    deterministic = np.mean(draws, axis=0)
    scattered = np.mean(np.abs(draws - deterministic) ** 2)
    assert np.mean(np.abs(deterministic) ** 2) / scattered == pytest.approx(kappa, rel=0.05)


def test_place_users_degenerate_and_disk_statistics():
    cfg = SystemConfig(user_region_radius=0.0)
    pos = place_users(cfg, 0)
    assert np.array_equal(pos[:2], np.array([cfg.user_region_centers[0]] * 2))
    assert np.array_equal(pos[2:], np.array([cfg.user_region_centers[1]] * 2))

    cfg = SystemConfig(K_r=5000, K_t=5000)
    pos = place_users(cfg, 3)
    d2 = np.sum((pos[:5000, :2] - np.array(cfg.user_region_centers[0][:2])) ** 2, axis=1)
    assert np.mean(d2) == pytest.approx(0.5, rel=0.03)
    assert np.all(pos[:, 2] == 1.0)
    assert np.array_equal(place_users(cfg, 3), pos)


def test_build_channels_shapes_and_determinism():
    cfg = SystemConfig()
    ch = build_channels(cfg, 1)
    assert isinstance(ch, ChannelSet)
    assert ch.G.shape == (cfg.N, cfg.M) and ch.h.shape == (cfg.K, cfg.M) and ch.g.shape == (cfg.K, cfg.N)
    assert list(ch.sides) == ["r", "r", "t", "t"]
    assert np.all(np.isfinite(ch.G)) and np.all(np.isfinite(ch.h)) and np.all(np.isfinite(ch.g))
    assert ch.tobytes() == build_channels(cfg, 1).tobytes()
    assert ch.tobytes() != build_channels(cfg, 2).tobytes()


def test_bs_surface_channel_power():
    cfg = SystemConfig(M=4, N=4)
    power = np.mean([np.mean(np.abs(build_channels(cfg, s).G) ** 2) for s in range(1000)])
    expected = 10 ** (cfg.C0_db / 10) * 15.0 ** -2.2
    assert power == pytest.approx(expected, rel=0.05)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2 ** 32))
def test_direct_links_do_not_depend_on_surface_size(n, seed):
    a = build_channels(SystemConfig(N=8), seed)
    b = build_channels(SystemConfig(N=n), seed)
    assert np.array_equal(a.h, b.h)
    assert np.array_equal(a.positions, b.positions)


def test_without_surface_zeroes_cascade_only():
    ch = build_channels(SystemConfig(), 0)
    bare = ch.without_surface()
    assert np.all(bare.g == 0) and np.array_equal(bare.h, ch.h) and np.array_equal(bare.G, ch.G)
