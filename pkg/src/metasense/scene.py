"""Experiment configuration and physical scene construction.

The scene couples a transmitter, a set of metasurface receive panels (one RF
chain per panel), a voxel grid of target cells, and a box-shaped region in
which a jammer may appear.  All geometry is expressed in meters in a shared
Cartesian frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, GeometryError

# Exact vacuum speed of light (m/s); wavelength = SPEED_OF_LIGHT / carrier_hz.
SPEED_OF_LIGHT = 299792458.0


# ---------------------------------------------------------------------------
# Unit helpers
# ---------------------------------------------------------------------------

def dbi_to_linear(gain_dbi: float) -> float:
    """Antenna gain in dBi to linear power gain."""
    return 10.0 ** (gain_dbi / 10.0)


def linear_to_db(value: float) -> float:
    """Linear power ratio to decibels."""
    return 10.0 * math.log10(value)


def mw_to_w(power_mw: float) -> float:
    """Milliwatts to watts."""
    return power_mw * 1e-3


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_DEFAULT_PHASES = (math.pi / 4, 3 * math.pi / 4, 5 * math.pi / 4, 7 * math.pi / 4)


@dataclass(frozen=True)
class GeometryConfig:
    """Positions of the transmitter, receive panels, target grid, and jammer box.

    ``element_offsets`` optionally pins per-element local coordinates (meters)
    in each panel's plane; when omitted, elements are laid out on a centered
    square lattice with half-wavelength spacing, which requires ``n_elements``
    to be a perfect square.
    """

    tx_pos: tuple[float, float, float] = (0.87, -0.84, 0.0)
    panel_centers: tuple[tuple[float, float, float], ...] = (
        (0.0, 2.0, 2.0),
        (2.0, 2.0, 2.0),
        (1.0, 1.0, 3.0),
    )
    target_center: tuple[float, float, float] = (1.0, 0.5, 1.5)
    jammer_center: tuple[float, float, float] = (-1.0, 0.0, 0.0)
    jammer_side_m: tuple[float, float, float] = (1.0, 1.0, 1.0)
    element_offsets: tuple[tuple[float, float], ...] | None = None


@dataclass(frozen=True)
class NetworkConfig:
    """Hidden-layer widths for the sensing and policy networks."""

    sensing_hidden: tuple[int, ...] = (256, 128, 64)
    feature_hidden: tuple[int, ...] = (64,)
    feature_dim: int = 16
    policy_hidden: tuple[int, ...] = (256, 128)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description with canonical field names.

    Power levels are stated in the units of their suffix (``_mw``, ``_w``,
    ``_dbi``).  ``n_states`` must equal ``len(phase_set)``; each configuration
    index ``i`` (one-based) maps to the complex element response
    ``exp(1j * phase_set[i - 1])`` unless a response table file overrides it.
    """

    tx_gain_dbi: float = 21.0
    # Composite gain along the jammer's direct path: the jammer sits behind
    # the panels, far off the element boresight aimed at the target region,
    # so the effective gain is a back/sidelobe level rather than the
    # transmitter's 21 dBi mainlobe figure.
    jammer_gain_dbi: float = -20.0
    tx_power_mw: float = 100.0
    jam_power_mw: float = 100.0
    n_rf: int = 3
    n_elements: int = 16
    n_states: int = 4
    phase_set: tuple[float, ...] = _DEFAULT_PHASES
    carrier_hz: float = 3.198e9
    n_frames: int = 20
    p_occupied: float = 0.5
    n_scenarios: int = 100
    subset_size: int = 100
    n_mc: int = 10
    noise_power_w: float = 1e-12
    cell_size_m: tuple[float, float, float] = (0.1, 0.1, 0.1)
    grid_dims: tuple[int, int, int] = (3, 3, 3)
    learning_rate: float = 0.001
    beta: float = 1.0
    # Horizon of the reward baseline (exponential moving average); None means
    # a plain running mean over the whole run.
    baseline_decay: float | None = 0.9
    # Weight of the per-step action-entropy bonus in the policy objective.
    entropy_weight: float = 0.01
    reflection_magnitude: float = 0.8
    seed: int = 0
    mrc_reference: str = "genie"
    combiner: str = "mrc"
    attacked_chain: int | None = None
    response_table_path: str | None = None
    lr_decay_enabled: bool = True
    lr_decay_every: int = 500
    lr_decay_factor: float = 0.5
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)

    @property
    def n_cells(self) -> int:
        """Number of grid cells M."""
        return int(np.prod(self.grid_dims))

    @property
    def wavelength(self) -> float:
        """Carrier wavelength in meters."""
        return SPEED_OF_LIGHT / self.carrier_hz

    def to_dict(self) -> dict:
        """Plain nested-dict form, suitable for serialization."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("geometry", "network"):
                out[f.name] = {
                    g.name: _plain(getattr(value, g.name)) for g in fields(value)
                }
            else:
                out[f.name] = _plain(value)
        return out


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def _as_tuple(value, depth=1):
    """Convert (nested) lists from a parsed document into (nested) tuples."""
    if depth > 1:
        return tuple(_as_tuple(v, depth - 1) for v in value)
    return tuple(value)


_TUPLE_FIELDS = {
    "phase_set": 1,
    "cell_size_m": 1,
    "grid_dims": 1,
    "sensing_hidden": 1,
    "feature_hidden": 1,
    "policy_hidden": 1,
    "tx_pos": 1,
    "target_center": 1,
    "jammer_center": 1,
    "jammer_side_m": 1,
    "panel_centers": 2,
    "element_offsets": 2,
}


def _coerce_scalar(default_value, value, key: str, section: str):
    """Coerce a parsed scalar to the field's default type.

    YAML 1.1 reads bare scientific notation such as ``1e-12`` as a string;
    numeric fields therefore accept number-shaped strings.
    """
    if value is None or default_value is None:
        return value
    if isinstance(default_value, bool):
        if not isinstance(value, bool):
            raise ConfigError(
                f"configuration key '{section}{key}' must be a boolean; got {value!r}"
            )
        return value
    if isinstance(default_value, float) and not isinstance(value, float):
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(
                f"configuration key '{section}{key}' must be a number; got {value!r}"
            ) from None
    if isinstance(default_value, int) and not isinstance(value, int):
        try:
            as_float = float(value)
        except (TypeError, ValueError):
            raise ConfigError(
                f"configuration key '{section}{key}' must be an integer; got {value!r}"
            ) from None
        if as_float != int(as_float):
            raise ConfigError(
                f"configuration key '{section}{key}' must be an integer; got {value!r}"
            )
        return int(as_float)
    return value


def _merge_section(cls, defaults, overrides: dict, section: str):
    known = {f.name for f in fields(cls)}
    updates = {}
    for key, value in overrides.items():
        if key not in known:
            raise ConfigError(f"unknown configuration key '{section}{key}'")
        if value is not None and key in _TUPLE_FIELDS:
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"configuration key '{section}{key}' must be a list")
            value = _as_tuple(value, _TUPLE_FIELDS[key])
        else:
            value = _coerce_scalar(getattr(defaults, key), value, key, section)
        updates[key] = value
    return replace(defaults, **updates)


def load_config(document: str | None = None) -> ExperimentConfig:
    """Parse a configuration document (YAML or JSON text) into a validated config.

    An empty document yields the defaults.  Unknown keys, unparsable text,
    and constraint violations all raise :class:`ConfigError`; validation
    reports every violated constraint at once.
    """
    if document is None or document.strip() == "":
        raw = {}
    else:
        try:
            raw = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise ConfigError(f"unparsable configuration document: {exc}") from exc
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("configuration document must be a key/value mapping")

    geometry = _merge_section(
        GeometryConfig, GeometryConfig(), raw.pop("geometry", {}) or {}, "geometry."
    )
    network = _merge_section(
        NetworkConfig, NetworkConfig(), raw.pop("network", {}) or {}, "network."
    )
    cfg = _merge_section(ExperimentConfig, ExperimentConfig(), raw, "")
    cfg = replace(cfg, geometry=geometry, network=network)
    validate_config(cfg)
    return cfg


def load_config_file(path: str | Path) -> ExperimentConfig:
    """Load and validate a configuration document from a file."""
    return load_config(Path(path).read_text())


def validate_config(cfg: ExperimentConfig) -> None:
    """Check every declared constraint; raise ConfigError listing all violations."""
    v = []
    if cfg.n_states != len(cfg.phase_set):
        v.append(
            f"n_states ({cfg.n_states}) must equal len(phase_set) ({len(cfg.phase_set)})"
        )
    for i, phase in enumerate(cfg.phase_set):
        if not (0.0 <= phase < 2 * math.pi):
            v.append(f"phase_set[{i}] = {phase} outside [0, 2*pi)")
    if cfg.n_frames < 1:
        v.append(f"n_frames ({cfg.n_frames}) must be >= 1")
    if cfg.n_rf < 1:
        v.append(f"n_rf ({cfg.n_rf}) must be >= 1")
    if cfg.n_elements < 1:
        v.append(f"n_elements ({cfg.n_elements}) must be >= 1")
    if cfg.n_states < 1:
        v.append(f"n_states ({cfg.n_states}) must be >= 1")
    if any(d < 1 for d in cfg.grid_dims):
        v.append(f"grid_dims {cfg.grid_dims} must all be >= 1")
    if any(s <= 0 for s in cfg.cell_size_m):
        v.append(f"cell_size_m {cfg.cell_size_m} must all be > 0")
    if cfg.tx_power_mw <= 0:
        v.append(f"tx_power_mw ({cfg.tx_power_mw}) must be > 0")
    if cfg.jam_power_mw < 0:
        v.append(f"jam_power_mw ({cfg.jam_power_mw}) must be >= 0")
    if cfg.noise_power_w <= 0:
        v.append(f"noise_power_w ({cfg.noise_power_w}) must be > 0")
    if not (0.0 <= cfg.p_occupied <= 1.0):
        v.append(f"p_occupied ({cfg.p_occupied}) must be in [0, 1]")
    if cfg.n_scenarios < 1:
        v.append(f"n_scenarios ({cfg.n_scenarios}) must be >= 1")
    if not (1 <= cfg.subset_size <= cfg.n_scenarios):
        v.append(
            f"subset_size ({cfg.subset_size}) must be in [1, n_scenarios={cfg.n_scenarios}]"
        )
    if cfg.n_mc < 1:
        v.append(f"n_mc ({cfg.n_mc}) must be >= 1")
    if cfg.learning_rate <= 0:
        v.append(f"learning_rate ({cfg.learning_rate}) must be > 0")
    if cfg.beta < 0:
        v.append(f"beta ({cfg.beta}) must be >= 0")
    if not (0.0 < cfg.reflection_magnitude <= 1.0):
        v.append(
            f"reflection_magnitude ({cfg.reflection_magnitude}) must be in (0, 1]"
        )
    if cfg.carrier_hz <= 0:
        v.append(f"carrier_hz ({cfg.carrier_hz}) must be > 0")
    if cfg.seed < 0:
        v.append(f"seed ({cfg.seed}) must be >= 0")
    if cfg.n_rf > len(cfg.geometry.panel_centers):
        v.append(
            f"n_rf ({cfg.n_rf}) exceeds the number of configured panel centers "
            f"({len(cfg.geometry.panel_centers)})"
        )
    if cfg.mrc_reference not in ("genie", "nominal"):
        v.append(f"mrc_reference ('{cfg.mrc_reference}') must be 'genie' or 'nominal'")
    if cfg.combiner not in ("mrc", "sum"):
        v.append(f"combiner ('{cfg.combiner}') must be 'mrc' or 'sum'")
    if cfg.attacked_chain is not None and not (0 <= cfg.attacked_chain < cfg.n_rf):
        v.append(
            f"attacked_chain ({cfg.attacked_chain}) must be in [0, n_rf={cfg.n_rf})"
        )
    if cfg.geometry.element_offsets is not None:
        offs = cfg.geometry.element_offsets
        if len(offs) != cfg.n_elements or any(len(o) != 2 for o in offs):
            v.append(
                "geometry.element_offsets must have shape (n_elements, 2); got "
                f"{len(offs)} rows"
            )
    if any(s <= 0 for s in cfg.geometry.jammer_side_m):
        v.append(f"geometry.jammer_side_m {cfg.geometry.jammer_side_m} must all be > 0")
    if cfg.lr_decay_every < 1:
        v.append(f"lr_decay_every ({cfg.lr_decay_every}) must be >= 1")
    if not (0.0 < cfg.lr_decay_factor <= 1.0):
        v.append(f"lr_decay_factor ({cfg.lr_decay_factor}) must be in (0, 1]")
    if cfg.baseline_decay is not None and not (0.0 < cfg.baseline_decay < 1.0):
        v.append(f"baseline_decay ({cfg.baseline_decay}) must be in (0, 1) or null")
    if cfg.entropy_weight < 0:
        v.append(f"entropy_weight ({cfg.entropy_weight}) must be >= 0")
    if v:
        raise ConfigError(v)


# ---------------------------------------------------------------------------
# Scene
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scene:
    """Built geometry: all positions in meters, wavelength resolved from the config.

    ``element_pos[c, n]`` is the position of element ``n`` (zero-based) of
    panel ``c``; ``attacked_chain`` is the zero-based index of the RF chain
    whose panel sits nearest the jammer region (unless overridden).
    """

    wavelength: float
    tx_pos: np.ndarray          # (3,)
    panel_centers: np.ndarray   # (n_rf, 3)
    element_pos: np.ndarray     # (n_rf, n_elements, 3)
    grid_centers: np.ndarray    # (n_cells, 3)
    jammer_center: np.ndarray   # (3,)
    jammer_side: np.ndarray     # (3,)
    attacked_chain: int
    element_spacing: float


def _panel_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two orthonormal in-plane axes for a panel with the given unit normal."""
    ref = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(normal, ref)) > 0.9:
        ref = np.array([1.0, 0.0, 0.0])
    u = np.cross(normal, ref)
    u /= np.linalg.norm(u)
    w = np.cross(normal, u)
    return u, w


def _lattice_offsets(n_elements: int, spacing: float) -> np.ndarray:
    """Centered square-lattice local coordinates, or raise if N is not square."""
    side = math.isqrt(n_elements)
    if side * side != n_elements:
        raise GeometryError(
            f"n_elements = {n_elements} is not a perfect square; supply "
            "geometry.element_offsets for a non-square layout"
        )
    coords = (np.arange(side) - (side - 1) / 2.0) * spacing
    aa, bb = np.meshgrid(coords, coords, indexing="ij")
    return np.stack([aa.ravel(), bb.ravel()], axis=1)


def rectangular_offsets(n_elements: int, spacing: float) -> np.ndarray:
    """Centered rectangular-lattice local coordinates for any element count.

    Rows x columns are chosen as the most nearly square factorization of
    ``n_elements``.  Useful for layouts (for example, a single merged panel)
    where the element count is not a perfect square.
    """
    rows = math.isqrt(n_elements)
    while n_elements % rows != 0:
        rows -= 1
    cols = n_elements // rows
    ra = (np.arange(rows) - (rows - 1) / 2.0) * spacing
    ca = (np.arange(cols) - (cols - 1) / 2.0) * spacing
    aa, bb = np.meshgrid(ra, ca, indexing="ij")
    return np.stack([aa.ravel(), bb.ravel()], axis=1)


def _grid_centers(cfg: ExperimentConfig) -> np.ndarray:
    """Cell centers of the target voxel grid, x index fastest."""
    center = np.asarray(cfg.geometry.target_center, dtype=float)
    dims = cfg.grid_dims
    sizes = cfg.cell_size_m
    axes = [
        (np.arange(dims[a]) - (dims[a] - 1) / 2.0) * sizes[a] for a in range(3)
    ]
    zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    offsets = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
    return center + offsets


def _min_distance_to_box(points: np.ndarray, center: np.ndarray, side: np.ndarray):
    """Minimum distance from each point to an axis-aligned box."""
    lo = center - side / 2.0
    hi = center + side / 2.0
    clamped = np.clip(points, lo, hi)
    return np.linalg.norm(points - clamped, axis=-1)


def build_scene(cfg: ExperimentConfig) -> Scene:
    """Resolve the configured geometry into explicit positions.

    Panels face the target-region center; elements sit on a half-wavelength
    lattice in each panel plane.  Raises :class:`GeometryError` if the layout
    is impossible or if any propagation distance falls inside the near-field
    guard ``10 * max(cell_size_m)``.
    """
    wavelength = cfg.wavelength
    spacing = wavelength / 2.0
    tx_pos = np.asarray(cfg.geometry.tx_pos, dtype=float)
    panel_centers = np.asarray(cfg.geometry.panel_centers, dtype=float)[: cfg.n_rf]
    target_center = np.asarray(cfg.geometry.target_center, dtype=float)
    grid_centers = _grid_centers(cfg)

    if cfg.geometry.element_offsets is not None:
        local = np.asarray(cfg.geometry.element_offsets, dtype=float)
    else:
        local = _lattice_offsets(cfg.n_elements, spacing)

    element_pos = np.empty((cfg.n_rf, cfg.n_elements, 3))
    for c in range(cfg.n_rf):
        normal = target_center - panel_centers[c]
        norm = np.linalg.norm(normal)
        if norm == 0.0:
            raise GeometryError(
                f"panel {c} center coincides with the target-region center"
            )
        normal = normal / norm
        u, w = _panel_basis(normal)
        element_pos[c] = panel_centers[c] + local[:, :1] * u + local[:, 1:] * w

    jammer_center = np.asarray(cfg.geometry.jammer_center, dtype=float)
    jammer_side = np.asarray(cfg.geometry.jammer_side_m, dtype=float)

    if cfg.attacked_chain is not None:
        attacked = int(cfg.attacked_chain)
    else:
        attacked = int(
            np.argmin(np.linalg.norm(panel_centers - jammer_center, axis=1))
        )

    guard = 10.0 * max(cfg.cell_size_m)
    d_tx_grid = np.linalg.norm(grid_centers - tx_pos, axis=1)
    d_grid_elem = np.linalg.norm(
        grid_centers[None, None, :, :] - element_pos[:, :, None, :], axis=-1
    )
    d_jam_elem = _min_distance_to_box(
        element_pos.reshape(-1, 3), jammer_center, jammer_side
    )
    d_jam_grid = _min_distance_to_box(grid_centers, jammer_center, jammer_side)
    dmin = min(
        d_tx_grid.min(), d_grid_elem.min(), d_jam_elem.min(), d_jam_grid.min()
    )
    if dmin <= guard:
        raise GeometryError(
            f"minimum propagation distance {dmin:.3f} m is inside the near-field "
            f"guard {guard:.3f} m; move the transmitter, panels, grid, or jammer apart"
        )

    return Scene(
        wavelength=wavelength,
        tx_pos=tx_pos,
        panel_centers=panel_centers,
        element_pos=element_pos,
        grid_centers=grid_centers,
        jammer_center=jammer_center,
        jammer_side=jammer_side,
        attacked_chain=attacked,
        element_spacing=spacing,
    )


def scene_to_document(scene: Scene) -> dict:
    """Self-describing dict form of a scene (positions as nested lists)."""
    return {
        "kind": "metasense.scene",
        "units": "meters",
        "wavelength": scene.wavelength,
        "tx_pos": scene.tx_pos.tolist(),
        "panel_centers": scene.panel_centers.tolist(),
        "element_pos": scene.element_pos.tolist(),
        "grid_centers": scene.grid_centers.tolist(),
        "jammer_center": scene.jammer_center.tolist(),
        "jammer_side": scene.jammer_side.tolist(),
        "attacked_chain": scene.attacked_chain,
        "element_spacing": scene.element_spacing,
    }


def scene_from_document(doc: dict) -> Scene:
    """Inverse of :func:`scene_to_document`."""
    return Scene(
        wavelength=float(doc["wavelength"]),
        tx_pos=np.asarray(doc["tx_pos"], dtype=float),
        panel_centers=np.asarray(doc["panel_centers"], dtype=float),
        element_pos=np.asarray(doc["element_pos"], dtype=float),
        grid_centers=np.asarray(doc["grid_centers"], dtype=float),
        jammer_center=np.asarray(doc["jammer_center"], dtype=float),
        jammer_side=np.asarray(doc["jammer_side"], dtype=float),
        attacked_chain=int(doc["attacked_chain"]),
        element_spacing=float(doc["element_spacing"]),
    )


def save_scene(scene: Scene, path: str | Path) -> None:
    """Write the scene document as JSON."""
    Path(path).write_text(json.dumps(scene_to_document(scene), indent=2))


def load_scene(path: str | Path) -> Scene:
    """Read a scene document written by :func:`save_scene`."""
    return scene_from_document(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Scenarios and jammer draws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    """One target configuration over the voxel grid.

    ``occupancy[m]`` is True when cell ``m`` holds a scatterer;
    ``reflection[m]`` is that cell's complex reflection coefficient (fixed
    magnitude, uniform random phase) and exactly 0 for empty cells.
    """

    occupancy: np.ndarray   # (n_cells,) bool
    reflection: np.ndarray  # (n_cells,) complex128


def sample_scenarios(
    cfg: ExperimentConfig, rng: np.random.Generator, count: int | None = None
) -> list[Scenario]:
    """Draw independent scenarios: per-cell Bernoulli occupancy, random phases.

    The same generator state always yields the same scenario list bit for bit.
    """
    count = cfg.n_scenarios if count is None else count
    m = cfg.n_cells
    out = []
    for _ in range(count):
        occupancy = rng.random(m) < cfg.p_occupied
        phases = rng.uniform(0.0, 2 * math.pi, size=m)
        reflection = cfg.reflection_magnitude * np.exp(1j * phases)
        reflection[~occupancy] = 0.0
        out.append(Scenario(occupancy=occupancy, reflection=reflection))
    return out


def stack_scenarios(scenarios: list[Scenario]) -> tuple[np.ndarray, np.ndarray]:
    """Stack a scenario list into (occupancy, reflection) arrays of shape (S, M)."""
    occ = np.stack([s.occupancy for s in scenarios])
    refl = np.stack([s.reflection for s in scenarios])
    return occ, refl


def sample_jammer_position(scene: Scene, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw of the jammer location inside its configured box."""
    lo = scene.jammer_center - scene.jammer_side / 2.0
    hi = scene.jammer_center + scene.jammer_side / 2.0
    return rng.uniform(lo, hi)
