"""Two-hop path gains, projection matrices, and the jammer direct path."""

import json
from dataclasses import replace

import numpy as np
import pytest

from metasense.channel import (
    build_jammer_los,
    build_projection,
    build_response_table,
    gain_constant,
    path_gain,
    projection_from_document,
    projection_to_document,
    response_table_for,
    source_leg,
    two_hop_gain_basis,
)
from metasense.errors import ConfigError
from metasense.scene import ExperimentConfig, build_scene

WAVELENGTH = 0.093744


# ---------------------------------------------------------------------------
# path_gain
# ---------------------------------------------------------------------------

def test_path_gain_magnitude_reference_value():
    # Hand-evaluated: 0.093744**2 * sqrt(10**2.1) / ((4*pi)**2 * 2 * 3)
    gain = path_gain(WAVELENGTH, 2.0, 3.0, 10**2.1)
    assert abs(abs(gain) - 1.0407e-4) < 1e-8


def test_path_gain_phase_vanishes_at_integer_wavelength_sums():
    for k in (1, 7, 500):
        total = k * WAVELENGTH
        gain = path_gain(WAVELENGTH, total / 2.0, total / 2.0, 1.0)
        assert abs(np.angle(gain)) < 1e-7


def test_path_gain_quarter_magnitude_when_both_distances_double():
    g1 = path_gain(WAVELENGTH, 2.0, 3.0, 125.893)
    g2 = path_gain(WAVELENGTH, 4.0, 6.0, 125.893)
    assert abs(abs(g1) / abs(g2) - 4.0) < 1e-12


def test_path_gain_rejects_nonpositive_distances():
    with pytest.raises(ValueError, match="positive"):
        path_gain(WAVELENGTH, 0.0, 3.0, 1.0)
    with pytest.raises(ValueError, match="positive"):
        path_gain(WAVELENGTH, 2.0, -1.0, 1.0)


def test_path_gain_applies_element_response():
    r = np.exp(1j * 0.7)
    plain = path_gain(WAVELENGTH, 2.0, 3.0, 2.0)
    with_r = path_gain(WAVELENGTH, 2.0, 3.0, 2.0, response=r)
    assert abs(with_r - r * plain) < 1e-18


# ---------------------------------------------------------------------------
# response tables
# ---------------------------------------------------------------------------

def test_default_response_table_is_unit_modulus_phase_set():
    cfg = ExperimentConfig()
    table = response_table_for(cfg)
    assert table.n_states == 4
    assert np.allclose(np.abs(table.values), 1.0)
    assert np.allclose(np.angle(table.values) % (2 * np.pi), cfg.phase_set)


def test_response_table_file_override(tmp_path):
    path = tmp_path / "responses.json"
    path.write_text(json.dumps([[0.9, 0.0], [0.0, -0.8]]))
    table = build_response_table(path=path)
    assert table.n_states == 2
    assert table.response(1) == 0.9
    assert table.response(2) == -0.8j

    cfg = replace(
        ExperimentConfig(), n_states=2, phase_set=(0.0, np.pi),
        response_table_path=str(path),
    )
    assert np.array_equal(response_table_for(cfg).values, table.values)


def test_response_table_rejects_active_elements(tmp_path):
    path = tmp_path / "responses.json"
    path.write_text(json.dumps([[1.2, 0.0], [0.0, 1.0]]))
    with pytest.raises(ConfigError, match="magnitude"):
        build_response_table(path=path)


def test_response_table_size_must_match_config(tmp_path):
    path = tmp_path / "responses.json"
    path.write_text(json.dumps([[1.0, 0.0], [0.0, 1.0]]))
    cfg = replace(ExperimentConfig(), response_table_path=str(path))
    with pytest.raises(ConfigError, match="states"):
        response_table_for(cfg)


def test_out_of_range_configuration_index_rejected():
    table = response_table_for(ExperimentConfig())
    with pytest.raises(ValueError, match="outside"):
        table.response(0)
    with pytest.raises(ValueError, match="outside"):
        table.response(5)


# ---------------------------------------------------------------------------
# build_projection
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def scene():
    return build_scene(ExperimentConfig())


@pytest.fixture(scope="module")
def table():
    return response_table_for(ExperimentConfig())


@pytest.fixture(scope="module")
def projection(scene, table):
    return build_projection(scene, table, ExperimentConfig())


def test_projection_shape(projection):
    assert projection.blocks.shape == (3, 64, 27)
    assert projection.source_tag == "transmitter"
    assert np.all(np.isfinite(projection.blocks.view(float)))


def test_projection_entries_match_path_gain(projection, scene, table):
    cfg = ExperimentConfig()
    rng = np.random.default_rng(0)
    g_lin = 10 ** (cfg.tx_gain_dbi / 10.0)
    for _ in range(50):
        c = rng.integers(0, 3)
        n = rng.integers(0, 16)
        i = rng.integers(0, 4)
        m = rng.integers(0, 27)
        d1 = np.linalg.norm(scene.grid_centers[m] - scene.tx_pos)
        d2 = np.linalg.norm(scene.grid_centers[m] - scene.element_pos[c, n])
        expected = path_gain(
            scene.wavelength, d1, d2, g_lin, response=table.values[i]
        )
        got = projection.blocks[c, n * 4 + i, m]
        assert abs(got - expected) < 1e-16


def test_projection_factorizes_over_responses(projection, scene, table):
    basis = two_hop_gain_basis(scene, scene.tx_pos, 21.0)
    for i in range(4):
        rows = projection.blocks[:, i::4, :]
        assert np.allclose(rows, basis * table.values[i], rtol=0, atol=1e-18)


def test_source_position_is_the_only_difference_between_sources(scene, table):
    # With equal source gains the two projections share every receiver-side
    # factor, so their ratio reduces to the source-leg ratio per cell.
    cfg = replace(ExperimentConfig(), jammer_gain_dbi=21.0)
    jam_pos = np.array([-1.0, 0.0, 0.0])
    a_tx = build_projection(scene, table, cfg).blocks
    a_j = build_projection(
        scene, table, cfg, source="jammer", jammer_pos=jam_pos
    ).blocks
    ratio = a_tx / a_j  # varies over cells only, through the source leg
    expected = source_leg(scene, scene.tx_pos) / source_leg(scene, jam_pos)
    assert np.allclose(ratio, expected[None, None, :], rtol=1e-12, atol=0)


def test_projection_rebuild_is_bit_identical(scene, table):
    cfg = ExperimentConfig()
    a = build_projection(scene, table, cfg).blocks
    b = build_projection(scene, table, cfg).blocks
    assert np.array_equal(a, b)


def test_projection_magnitude_bound(projection, scene):
    d_tx = np.linalg.norm(scene.grid_centers - scene.tx_pos, axis=1).min()
    d_rx = np.linalg.norm(
        scene.grid_centers[None, None, :, :] - scene.element_pos[:, :, None, :],
        axis=-1,
    ).min()
    bound = gain_constant(scene, 21.0) / (d_tx * d_rx)
    assert np.abs(projection.blocks).max() <= bound + 1e-18


def test_projection_phase_equals_minus_path_length_plus_response(
    projection, scene, table
):
    rng = np.random.default_rng(1)
    for _ in range(100):
        c = rng.integers(0, 3)
        n = rng.integers(0, 16)
        i = rng.integers(0, 4)
        m = rng.integers(0, 27)
        d1 = np.linalg.norm(scene.grid_centers[m] - scene.tx_pos)
        d2 = np.linalg.norm(scene.grid_centers[m] - scene.element_pos[c, n])
        entry = projection.blocks[c, n * 4 + i, m]
        residual = (
            np.angle(entry)
            + 2 * np.pi * (d1 + d2) / scene.wavelength
            - np.angle(table.values[i])
        )
        assert abs((residual + np.pi) % (2 * np.pi) - np.pi) < 1e-6


def test_projection_document_round_trip(projection):
    doc = projection_to_document(projection)
    again = projection_from_document(doc)
    assert np.array_equal(again.blocks, projection.blocks)
    assert again.source_tag == projection.source_tag


def test_jammer_source_requires_position(scene, table):
    with pytest.raises(ValueError, match="jammer_pos"):
        build_projection(scene, table, ExperimentConfig(), source="jammer")


# ---------------------------------------------------------------------------
# build_jammer_los
# ---------------------------------------------------------------------------

def test_jammer_los_hits_exactly_one_chain(scene):
    cfg = ExperimentConfig()
    h = build_jammer_los(scene, cfg, np.array([-1.0, 0.0, 0.0]))
    assert h.shape == (3,)
    nonzero = np.flatnonzero(np.abs(h) > 0)
    assert list(nonzero) == [scene.attacked_chain]


def test_jammer_los_far_field_inverse_distance(scene):
    cfg = ExperimentConfig()
    center = scene.panel_centers[scene.attacked_chain]
    direction = np.array([-1.0, -0.7, -0.3])
    direction /= np.linalg.norm(direction)
    near = build_jammer_los(scene, cfg, center + 5.0 * direction)
    far = build_jammer_los(scene, cfg, center + 50.0 * direction)
    ratio = abs(near[scene.attacked_chain]) / abs(far[scene.attacked_chain])
    assert 9.5 < ratio < 10.5


def test_jammer_los_vanishes_without_source_gain(scene):
    cfg = replace(ExperimentConfig(), jammer_gain_dbi=float("-inf"))
    h = build_jammer_los(scene, cfg, np.array([-1.0, 0.0, 0.0]))
    assert np.all(h == 0)


def test_jammer_los_batched_matches_single(scene):
    cfg = ExperimentConfig()
    rng = np.random.default_rng(2)
    positions = rng.uniform(-1.5, -0.5, size=(5, 3))
    batched = build_jammer_los(scene, cfg, positions)
    assert batched.shape == (5, 3)
    for s in range(5):
        single = build_jammer_los(scene, cfg, positions[s])
        assert np.array_equal(batched[s], single)


def test_jammer_los_sums_per_element_one_hop_gains(scene):
    cfg = ExperimentConfig()
    pos = np.array([-0.9, 0.1, -0.2])
    h = build_jammer_los(scene, cfg, pos)
    d = np.linalg.norm(scene.element_pos[scene.attacked_chain] - pos, axis=1)
    g = np.sqrt(10 ** (cfg.jammer_gain_dbi / 10.0))
    expected = (
        scene.wavelength / (4 * np.pi) * g
        * np.exp(-2j * np.pi * d / scene.wavelength) / d
    ).sum()
    assert abs(h[scene.attacked_chain] - expected) < 1e-12
