"""Line-of-sight channel gains between sources, grid cells, and panel elements.

Every source-to-cell-to-element path is a two-hop far-field link: the complex
gain of element ``n`` under configuration ``i`` for cell ``m`` is

    wavelength**2 * r(i) * sqrt(g_src)
    * exp(-2j*pi*(d_src_cell + d_cell_elem) / wavelength)
    / ((4*pi)**2 * d_src_cell * d_cell_elem)

where ``r(i)`` is the element's complex response in state ``i``.  Because
``r(i)`` multiplies a configuration-independent factor, the per-chain gains
factor as ``response[i] * basis[n, m]``; :func:`two_hop_gain_basis` exposes
that basis and :func:`build_projection` expands it into the full
``(n_elements * n_states) x n_cells`` projection block per chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .scene import ExperimentConfig, Scene, dbi_to_linear

FOUR_PI = 4.0 * np.pi


# ---------------------------------------------------------------------------
# Element response table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ElementResponseTable:
    """Lookup from one-based configuration index to complex element response."""

    values: np.ndarray  # (n_states,) complex128

    @property
    def n_states(self) -> int:
        return len(self.values)

    def response(self, config: int) -> complex:
        """Response for a one-based configuration index."""
        if not (1 <= config <= self.n_states):
            raise ValueError(
                f"configuration index {config} outside [1, {self.n_states}]"
            )
        return complex(self.values[config - 1])


def build_response_table(
    phase_set=None, path: str | Path | None = None
) -> ElementResponseTable:
    """Build the response table from a phase set or from a JSON data file.

    The file form is a list of ``[re, im]`` pairs.  Responses are passive:
    any magnitude above 1 (beyond rounding) is rejected.
    """
    if path is not None:
        data = json.loads(Path(path).read_text())
        values = np.array([complex(re, im) for re, im in data], dtype=complex)
    elif phase_set is not None:
        values = np.exp(1j * np.asarray(phase_set, dtype=float))
    else:
        raise ValueError("either phase_set or path must be given")
    if np.any(np.abs(values) > 1.0 + 1e-12):
        raise ConfigError(
            f"element responses must have magnitude <= 1; got max "
            f"{np.abs(values).max():.6f}"
        )
    return ElementResponseTable(values=values)


def response_table_for(cfg: ExperimentConfig) -> ElementResponseTable:
    """Response table implied by a config (file override wins over phase_set)."""
    if cfg.response_table_path is not None:
        table = build_response_table(path=cfg.response_table_path)
        if table.n_states != cfg.n_states:
            raise ConfigError(
                f"response table file has {table.n_states} states but "
                f"n_states = {cfg.n_states}"
            )
        return table
    return build_response_table(phase_set=cfg.phase_set)


# ---------------------------------------------------------------------------
# Path gains
# ---------------------------------------------------------------------------

def path_gain(
    wavelength: float,
    d_src_cell: float,
    d_cell_elem: float,
    gain_linear: float,
    response: complex = 1.0 + 0.0j,
):
    """Two-hop complex gain for one source -> cell -> element path.

    Accepts scalars or broadcastable arrays for the distances.  Distances
    must be strictly positive.
    """
    d1 = np.asarray(d_src_cell, dtype=float)
    d2 = np.asarray(d_cell_elem, dtype=float)
    if np.any(d1 <= 0) or np.any(d2 <= 0):
        raise ValueError("path distances must be strictly positive")
    amplitude = wavelength**2 * np.sqrt(gain_linear) / (FOUR_PI**2 * d1 * d2)
    phase = np.exp(-2j * np.pi * (d1 + d2) / wavelength)
    return response * amplitude * phase


def receiver_leg(scene: Scene) -> np.ndarray:
    """Cell-to-element propagation factor ``exp(-2j*pi*d/wl) / d``.

    Shape (n_rf, n_elements, n_cells).  Together with :func:`source_leg`
    and the constant ``wavelength**2 * sqrt(gain) / (4*pi)**2`` this
    reconstructs the full two-hop gain; splitting the legs lets callers
    reuse the receiver side across many source positions.
    """
    d = np.linalg.norm(
        scene.grid_centers[None, None, :, :] - scene.element_pos[:, :, None, :],
        axis=-1,
    )
    return np.exp(-2j * np.pi * d / scene.wavelength) / d


def source_leg(scene: Scene, source_pos: np.ndarray) -> np.ndarray:
    """Source-to-cell propagation factor ``exp(-2j*pi*d/wl) / d``.

    ``source_pos`` may be a single point (3,) or a stack (S, 3); the result
    has shape (n_cells,) or (S, n_cells) accordingly.
    """
    source_pos = np.asarray(source_pos, dtype=float)
    d = np.linalg.norm(scene.grid_centers - source_pos[..., None, :], axis=-1)
    if np.any(d <= 0):
        raise ValueError("source position coincides with a grid cell center")
    return np.exp(-2j * np.pi * d / scene.wavelength) / d


def gain_constant(scene: Scene, gain_dbi: float) -> float:
    """Two-hop amplitude constant ``wavelength**2 * sqrt(gain) / (4*pi)**2``."""
    return scene.wavelength**2 * np.sqrt(dbi_to_linear(gain_dbi)) / FOUR_PI**2


def two_hop_gain_basis(
    scene: Scene, source_pos: np.ndarray, gain_dbi: float
) -> np.ndarray:
    """Configuration-independent gain factors, shape (n_rf, n_elements, n_cells).

    ``basis[c, n, m] * response[i]`` equals the full path gain of element
    ``n`` of chain ``c`` in state ``i + 1`` for cell ``m``.  A stack of
    source positions (S, 3) yields shape (S, n_rf, n_elements, n_cells).
    """
    src = source_leg(scene, source_pos)
    rx = receiver_leg(scene)
    const = gain_constant(scene, gain_dbi)
    if src.ndim == 1:
        return const * src[None, None, :] * rx
    return const * src[:, None, None, :] * rx[None]


# ---------------------------------------------------------------------------
# Projection matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectionMatrix:
    """Per-chain stacks of path gains over (element, configuration) rows.

    ``blocks[c]`` has shape ``(n_elements * n_states, n_cells)``; row
    ``n * n_states + i`` (zero-based) holds the gains of element ``n`` in
    configuration ``i + 1``.  A one-hot beamforming row picks exactly one
    configuration per element, so ``onehot @ blocks[c]`` is that chain's
    effective cell-response row.
    """

    blocks: np.ndarray  # (n_rf, n_elements * n_states, n_cells) complex128
    source_tag: str     # "transmitter" | "jammer"

    @property
    def n_rf(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_cells(self) -> int:
        return self.blocks.shape[2]


def _expand_basis(basis: np.ndarray, table: ElementResponseTable) -> np.ndarray:
    n_rf, n_elem, n_cells = basis.shape
    n_states = table.n_states
    blocks = basis[:, :, None, :] * table.values[None, None, :, None]
    return blocks.reshape(n_rf, n_elem * n_states, n_cells)


def build_projection(
    scene: Scene,
    table: ElementResponseTable,
    cfg: ExperimentConfig,
    source: str = "transmitter",
    jammer_pos: np.ndarray | None = None,
) -> ProjectionMatrix:
    """Projection matrix for the transmitter or for a jammer at a known position."""
    if source == "transmitter":
        basis = two_hop_gain_basis(scene, scene.tx_pos, cfg.tx_gain_dbi)
    elif source == "jammer":
        if jammer_pos is None:
            raise ValueError("jammer_pos is required when source='jammer'")
        basis = two_hop_gain_basis(scene, jammer_pos, cfg.jammer_gain_dbi)
    else:
        raise ValueError(f"unknown source '{source}'")
    return ProjectionMatrix(blocks=_expand_basis(basis, table), source_tag=source)


def build_jammer_los(
    scene: Scene, cfg: ExperimentConfig, jammer_pos: np.ndarray
) -> np.ndarray:
    """Direct jammer-to-receiver path, one entry per RF chain.

    Only the attacked chain is nonzero; its value sums the one-hop free-space
    gains from the jammer to each element of that chain's panel.  A stack of
    jammer positions (S, 3) yields shape (S, n_rf).
    """
    jammer_pos = np.asarray(jammer_pos, dtype=float)
    batched = jammer_pos.ndim == 2
    positions = jammer_pos if batched else jammer_pos[None, :]
    d = np.linalg.norm(
        scene.element_pos[scene.attacked_chain][None, :, :] - positions[:, None, :],
        axis=-1,
    )  # (S, n_elements)
    if np.any(d <= 0):
        raise ValueError("jammer position coincides with a receive element")
    gains = (
        scene.wavelength
        / FOUR_PI
        * np.sqrt(dbi_to_linear(cfg.jammer_gain_dbi))
        * np.exp(-2j * np.pi * d / scene.wavelength)
        / d
    )
    h = np.zeros((positions.shape[0], scene.element_pos.shape[0]), dtype=complex)
    h[:, scene.attacked_chain] = gains.sum(axis=1)
    return h if batched else h[0]


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def projection_to_document(proj: ProjectionMatrix) -> dict:
    """Structured-text form: per-chain column-major [re, im] pair lists."""
    n_rf, n_rows, n_cols = proj.blocks.shape
    chains = []
    for c in range(n_rf):
        flat = proj.blocks[c].ravel(order="F")
        chains.append([[float(z.real), float(z.imag)] for z in flat])
    return {
        "kind": "metasense.projection",
        "source": proj.source_tag,
        "rows": n_rows,
        "cols": n_cols,
        "order": "column-major",
        "chains": chains,
    }


def projection_from_document(doc: dict) -> ProjectionMatrix:
    """Inverse of :func:`projection_to_document`."""
    rows, cols = int(doc["rows"]), int(doc["cols"])
    blocks = []
    for chain in doc["chains"]:
        flat = np.array([complex(re, im) for re, im in chain])
        blocks.append(flat.reshape((rows, cols), order="F"))
    return ProjectionMatrix(blocks=np.stack(blocks), source_tag=doc["source"])


def save_projection(proj: ProjectionMatrix, path: str | Path) -> None:
    """Write the projection document as JSON."""
    Path(path).write_text(json.dumps(projection_to_document(proj)))


def load_projection(path: str | Path) -> ProjectionMatrix:
    """Read a projection document written by :func:`save_projection`."""
    return projection_from_document(json.loads(Path(path).read_text()))
