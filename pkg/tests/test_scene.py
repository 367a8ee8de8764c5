"""Configuration loading, geometry construction, and scenario sampling."""

import math
from dataclasses import replace

import numpy as np
import pytest

from metasense.errors import ConfigError, GeometryError
from metasense.scene import (
    ExperimentConfig,
    build_scene,
    load_config,
    rectangular_offsets,
    sample_jammer_position,
    sample_scenarios,
    validate_config,
)

SPEED_OF_LIGHT = 299_792_458.0


# ---------------------------------------------------------------------------
# load_config
# ---------------------------------------------------------------------------

def test_empty_document_gives_catalog_defaults():
    cfg = load_config(None)
    assert cfg.tx_power_mw == 100.0
    assert cfg.n_rf == 3
    assert cfg.n_elements == 16
    assert cfg.n_states == 4
    assert cfg.n_frames == 20
    assert cfg.learning_rate == 0.001
    assert cfg.n_scenarios == 100
    assert cfg.p_occupied == 0.5
    assert cfg.tx_gain_dbi == 21.0
    assert cfg.jam_power_mw == 100.0
    assert cfg.noise_power_w == 1e-12
    assert cfg.carrier_hz == 3.198e9
    assert cfg.n_cells == 27


def test_empty_string_document_equals_defaults():
    assert load_config("") == load_config(None) == ExperimentConfig()


def test_state_count_must_match_phase_count():
    with pytest.raises(ConfigError, match="n_states"):
        load_config("n_states: 4\nphase_set: [0.0, 1.0, 2.0]\n")


def test_beta_override():
    cfg = load_config("beta: 1.0\n")
    assert cfg.beta == 1.0
    cfg = load_config("beta: 0.25\n")
    assert cfg.beta == 0.25


def test_unknown_key_is_rejected_by_name():
    with pytest.raises(ConfigError, match="not_a_field"):
        load_config("not_a_field: 3\n")


def test_validation_reports_every_violation_at_once():
    bad = replace(
        ExperimentConfig(), tx_power_mw=-1.0, n_frames=0, p_occupied=2.0
    )
    with pytest.raises(ConfigError) as err:
        validate_config(bad)
    message = str(err.value)
    assert "tx_power_mw" in message
    assert "n_frames" in message
    assert "p_occupied" in message


def test_json_document_also_loads():
    cfg = load_config('{"n_frames": 7, "seed": 3}')
    assert cfg.n_frames == 7
    assert cfg.seed == 3


def test_config_round_trips_through_its_dict_form():
    cfg = ExperimentConfig(seed=5, beta=0.5)
    import json

    again = load_config(json.dumps(cfg.to_dict()))
    assert again == cfg


# ---------------------------------------------------------------------------
# build_scene
# ---------------------------------------------------------------------------

def test_wavelength_matches_carrier():
    cfg = ExperimentConfig()
    scene = build_scene(cfg)
    expected = SPEED_OF_LIGHT / 3.198e9
    assert abs(scene.wavelength - expected) / expected < 1e-12
    assert abs(scene.wavelength - 0.093744) < 1e-6


def test_lattice_spacing_is_half_wavelength():
    scene = build_scene(ExperimentConfig())
    # 16 elements on a 4x4 lattice: nearest-neighbor spacing is wavelength/2.
    for c in range(scene.element_pos.shape[0]):
        pos = scene.element_pos[c]
        d = np.linalg.norm(pos[None, :, :] - pos[:, None, :], axis=-1)
        d[d == 0] = np.inf
        assert abs(d.min() - scene.wavelength / 2.0) < 1e-12
        assert abs(d.min() - 0.046872) < 1e-6


def test_element_planes_pass_through_panel_centers():
    scene = build_scene(ExperimentConfig())
    target = np.array([1.0, 0.5, 1.5])
    for c in range(scene.element_pos.shape[0]):
        normal = target - scene.panel_centers[c]
        normal = normal / np.linalg.norm(normal)
        offsets = scene.element_pos[c] - scene.panel_centers[c]
        assert np.abs(offsets @ normal).max() < 1e-12
        assert np.allclose(offsets.mean(axis=0), 0.0, atol=1e-12)


def test_grid_is_27_cells_with_min_pairwise_spacing():
    scene = build_scene(ExperimentConfig())
    assert scene.grid_centers.shape == (27, 3)
    d = np.linalg.norm(
        scene.grid_centers[None, :, :] - scene.grid_centers[:, None, :], axis=-1
    )
    d[d == 0] = np.inf
    assert abs(d.min() - 0.1) < 1e-12
    assert np.allclose(scene.grid_centers.mean(axis=0), [1.0, 0.5, 1.5])


def test_default_positions():
    scene = build_scene(ExperimentConfig())
    assert np.allclose(scene.tx_pos, [0.87, -0.84, 0.0])
    assert np.allclose(
        scene.panel_centers, [[0, 2, 2], [2, 2, 2], [1, 1, 3]]
    )
    assert np.allclose(scene.jammer_center, [-1.0, 0.0, 0.0])
    assert np.allclose(scene.jammer_side, [1.0, 1.0, 1.0])


def test_attacked_chain_is_nearest_panel_to_jammer():
    scene = build_scene(ExperimentConfig())
    d = np.linalg.norm(scene.panel_centers - scene.jammer_center, axis=1)
    assert scene.attacked_chain == int(np.argmin(d))
    forced = build_scene(replace(ExperimentConfig(), attacked_chain=2))
    assert forced.attacked_chain == 2


def test_fewer_chains_use_leading_panel_centers():
    scene = build_scene(replace(ExperimentConfig(), n_rf=2))
    assert scene.panel_centers.shape == (2, 3)
    assert np.allclose(scene.panel_centers, [[0, 2, 2], [2, 2, 2]])


def test_chain_count_above_panel_count_is_rejected():
    with pytest.raises(ConfigError, match="panel centers"):
        validate_config(replace(ExperimentConfig(), n_rf=4))


def test_non_square_element_count_needs_explicit_offsets():
    with pytest.raises(GeometryError, match="perfect square"):
        build_scene(replace(ExperimentConfig(), n_elements=12))


def test_rectangular_offsets_cover_any_count():
    for n in (2, 6, 12, 48):
        offs = rectangular_offsets(n, 0.05)
        assert offs.shape == (n, 2)
        assert np.allclose(offs.mean(axis=0), 0.0, atol=1e-12)
        d = np.linalg.norm(offs[None, :, :] - offs[:, None, :], axis=-1)
        d[d == 0] = np.inf
        assert abs(d.min() - 0.05) < 1e-12


def test_near_field_guard_rejects_cramped_geometry():
    geometry = replace(
        ExperimentConfig().geometry, target_center=(1.0, 1.0, 2.95)
    )
    with pytest.raises(GeometryError, match="near-field"):
        build_scene(replace(ExperimentConfig(), geometry=geometry))


# ---------------------------------------------------------------------------
# sample_scenarios
# ---------------------------------------------------------------------------

def test_degenerate_occupancy_probabilities():
    empty_cfg = replace(ExperimentConfig(), p_occupied=0.0)
    scenarios = sample_scenarios(empty_cfg, np.random.default_rng(0))
    assert all(not s.occupancy.any() for s in scenarios)
    assert all(np.all(s.reflection == 0) for s in scenarios)

    full_cfg = replace(ExperimentConfig(), p_occupied=1.0)
    scenarios = sample_scenarios(full_cfg, np.random.default_rng(0))
    assert all(s.occupancy.all() for s in scenarios)


def test_scenario_count_and_empirical_occupancy():
    scenarios = sample_scenarios(ExperimentConfig(), np.random.default_rng(0))
    assert len(scenarios) == 100
    # 2700 Bernoulli(0.5) draws: the observed fraction stays within 5 sigma.
    occ = np.stack([s.occupancy for s in scenarios])
    assert occ.shape == (100, 27)
    assert abs(occ.mean() - 0.5) < 0.05


def test_scenario_labels_match_reflections():
    scenarios = sample_scenarios(ExperimentConfig(), np.random.default_rng(1))
    for s in scenarios:
        assert np.array_equal(s.occupancy, np.abs(s.reflection) > 0)
        mags = np.abs(s.reflection[s.occupancy])
        assert np.allclose(mags, 0.8)
        assert np.abs(s.reflection).max(initial=0.0) <= 1.0


def test_scenario_sampling_is_seed_deterministic():
    a = sample_scenarios(ExperimentConfig(), np.random.default_rng(7))
    b = sample_scenarios(ExperimentConfig(), np.random.default_rng(7))
    assert all(
        np.array_equal(x.reflection, y.reflection) for x, y in zip(a, b)
    )
    c = sample_scenarios(ExperimentConfig(), np.random.default_rng(8))
    assert any(
        not np.array_equal(x.reflection, y.reflection) for x, y in zip(a, c)
    )


def test_scenario_count_override():
    scenarios = sample_scenarios(
        ExperimentConfig(), np.random.default_rng(0), count=13
    )
    assert len(scenarios) == 13


# ---------------------------------------------------------------------------
# sample_jammer_position
# ---------------------------------------------------------------------------

def test_jammer_positions_fill_the_default_box():
    scene = build_scene(ExperimentConfig())
    rng = np.random.default_rng(0)
    points = np.stack(
        [sample_jammer_position(scene, rng) for _ in range(500)]
    )
    assert points[:, 0].min() >= -1.5 and points[:, 0].max() <= -0.5
    assert points[:, 1].min() >= -0.5 and points[:, 1].max() <= 0.5
    assert points[:, 2].min() >= -0.5 and points[:, 2].max() <= 0.5
    # the draws actually spread through the box rather than collapsing
    assert points.std(axis=0).min() > 0.2


def test_zero_side_box_returns_center():
    cfg = ExperimentConfig()
    scene = build_scene(cfg)
    collapsed = replace(
        scene, jammer_side=np.zeros(3), jammer_center=np.array([-1.0, 0.0, 0.0])
    )
    point = sample_jammer_position(collapsed, np.random.default_rng(0))
    assert np.allclose(point, [-1.0, 0.0, 0.0])


def test_jammer_draws_are_seed_deterministic():
    scene = build_scene(ExperimentConfig())
    a = sample_jammer_position(scene, np.random.default_rng(3))
    b = sample_jammer_position(scene, np.random.default_rng(3))
    c = sample_jammer_position(scene, np.random.default_rng(4))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_jammer_side_must_be_positive_in_config():
    geometry = replace(ExperimentConfig().geometry, jammer_side_m=(0.0, 1.0, 1.0))
    with pytest.raises(ConfigError, match="jammer_side_m"):
        validate_config(replace(ExperimentConfig(), geometry=geometry))
