"""Beamforming patterns, receive combining, and measurement synthesis.

A panel's beamforming pattern chooses one configuration per element and is
encoded one-hot over ``n_elements * n_states`` slots.  Stacking the per-chain
patterns row-wise gives the control matrix of one frame; a control sequence
holds one control matrix per frame.  Measurements are synthesized per frame by
combining the per-chain narrowband responses with maximum-ratio-combining
(MRC) weights and adding circularly symmetric complex Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ElementResponseTable
from .errors import DegenerateChannelError


# ---------------------------------------------------------------------------
# Patterns and control sequences
# ---------------------------------------------------------------------------

def encode_pattern(configs, n_states: int) -> np.ndarray:
    """One-hot encode per-element configuration choices.

    ``configs`` holds one-based configuration indices, one per element; the
    result has length ``len(configs) * n_states`` with a single 1 in each
    element's block of ``n_states`` slots.
    """
    configs = np.asarray(configs, dtype=int)
    if configs.ndim != 1:
        raise ValueError("configs must be a flat sequence, one entry per element")
    if np.any(configs < 1) or np.any(configs > n_states):
        bad = configs[(configs < 1) | (configs > n_states)][0]
        raise ValueError(
            f"configuration index {bad} outside [1, {n_states}]"
        )
    n = len(configs)
    onehot = np.zeros(n * n_states)
    onehot[np.arange(n) * n_states + (configs - 1)] = 1.0
    return onehot


def decode_pattern(onehot: np.ndarray, n_states: int) -> np.ndarray:
    """Inverse of :func:`encode_pattern`; returns one-based indices."""
    onehot = np.asarray(onehot)
    if onehot.size % n_states != 0:
        raise ValueError("one-hot length is not a multiple of n_states")
    blocks = onehot.reshape(-1, n_states)
    if not np.all(blocks.sum(axis=1) == 1.0):
        raise ValueError("pattern is not one-hot per element block")
    return blocks.argmax(axis=1) + 1


@dataclass
class ControlSequence:
    """Per-frame, per-chain, per-element configuration choices (one-based).

    ``configs`` has shape ``(n_frames, n_rf, n_elements)`` and is the single
    mutable source of truth during an episode; the one-hot views are derived.
    """

    configs: np.ndarray  # (K, n_rf, n_elements) int16, values in [1, n_states]
    n_states: int

    @classmethod
    def initial(cls, n_frames: int, n_rf: int, n_elements: int, n_states: int):
        """All-ones starting sequence (every element in configuration 1)."""
        return cls(
            configs=np.ones((n_frames, n_rf, n_elements), dtype=np.int16),
            n_states=n_states,
        )

    @property
    def n_frames(self) -> int:
        return self.configs.shape[0]

    @property
    def n_rf(self) -> int:
        return self.configs.shape[1]

    @property
    def n_elements(self) -> int:
        return self.configs.shape[2]

    def control_matrix(self, frame: int) -> np.ndarray:
        """One-hot control matrix of one frame, shape (n_rf, n_elements*n_states)."""
        return np.stack(
            [
                encode_pattern(self.configs[frame, c], self.n_states)
                for c in range(self.n_rf)
            ]
        )

    def onehot(self) -> np.ndarray:
        """All frames' control matrices, shape (K, n_rf, n_elements*n_states)."""
        return np.stack([self.control_matrix(k) for k in range(self.n_frames)])

    def copy(self) -> "ControlSequence":
        return ControlSequence(configs=self.configs.copy(), n_states=self.n_states)

    def to_document(self) -> dict:
        return {
            "kind": "metasense.control_sequence",
            "n_states": self.n_states,
            "configs": self.configs.tolist(),
        }

    @classmethod
    def from_document(cls, doc: dict) -> "ControlSequence":
        return cls(
            configs=np.asarray(doc["configs"], dtype=np.int16),
            n_states=int(doc["n_states"]),
        )


# ---------------------------------------------------------------------------
# Effective channels and combining
# ---------------------------------------------------------------------------

def effective_channel(
    control_matrix: np.ndarray, blocks: np.ndarray, reflection: np.ndarray
) -> np.ndarray:
    """Per-chain scalar channel ``h[c] = control[c] @ blocks[c] @ reflection``."""
    return np.einsum("cr,crm,m->c", control_matrix, blocks, reflection)


def control_products(
    ctrl: ControlSequence, basis: np.ndarray, table: ElementResponseTable
) -> np.ndarray:
    """Per-frame chain response rows ``(control @ projection)``.

    Computed from the configuration-independent gain basis: selecting element
    responses by the chosen configuration and summing over elements gives the
    same rows as multiplying the one-hot control matrix with the full
    projection blocks, at a fraction of the cost.  ``basis`` may carry leading
    batch dimensions (e.g. one per jammer draw): shape ``(..., n_rf,
    n_elements, n_cells)`` yields ``(..., K, n_rf, n_cells)``.
    """
    r_sel = table.values[ctrl.configs - 1]  # (K, n_rf, n_elements)
    if basis.ndim == 3:
        return np.einsum("kcn,cnm->kcm", r_sel, basis)
    if basis.ndim == 4:
        return np.einsum("kcn,scnm->skcm", r_sel, basis)
    raise ValueError(f"basis must have 3 or 4 dims, got {basis.ndim}")


def control_products_from_blocks(
    ctrl: ControlSequence, blocks: np.ndarray
) -> np.ndarray:
    """Same rows as :func:`control_products`, via explicit one-hot selection.

    Exists as an independent route for cross-checking; shape (K, n_rf, n_cells).
    """
    onehot = ctrl.onehot()  # (K, n_rf, R)
    return np.einsum("kcr,crm->kcm", onehot, blocks)


def mrc_weights(h: np.ndarray) -> np.ndarray:
    """Maximum-ratio combining row ``w`` with ``w @ h == 1``: conj(h)/||h||^2."""
    h = np.asarray(h)
    norm_sq = np.real(np.vdot(h, h))
    if norm_sq == 0.0:
        raise DegenerateChannelError("cannot combine an all-zero channel")
    return np.conj(h) / norm_sq


def _weights_batched(h_ref: np.ndarray, combiner: str) -> np.ndarray:
    """Combining weights for a (..., n_rf) stack of reference channels.

    A zero reference channel (nothing occupied in the scene) has no matched
    combiner; those frames fall back to unweighted summation so that empty
    scenarios remain synthesizable.
    """
    if combiner == "sum":
        return np.ones_like(h_ref)
    norm_sq = np.sum(np.abs(h_ref) ** 2, axis=-1, keepdims=True)
    zero = norm_sq == 0.0
    weights = np.conj(h_ref) / np.where(zero, 1.0, norm_sq)
    if np.any(zero):
        weights = np.where(zero, np.ones_like(weights), weights)
    return weights


# ---------------------------------------------------------------------------
# Measurement synthesis
# ---------------------------------------------------------------------------

@dataclass
class ReceivedBatch:
    """One scenario's synthesized measurement batch over all frames.

    ``gamma_tx`` (and, when jammed, ``gamma_j``) already carry the square
    root of the corresponding transmit power, so ``y = gamma_tx @ v
    [+ gamma_j @ v + y_jlos] + combined noise``.  ``noise_power_eff[k]``
    is the post-combining noise power of frame ``k``.
    """

    y: np.ndarray                 # (K,) complex
    gamma_tx: np.ndarray          # (K, M) complex
    weights: np.ndarray           # (K, n_rf) complex
    noise_power_eff: np.ndarray   # (K,) float
    gamma_j: np.ndarray | None = None   # (K, M) complex
    y_jlos: np.ndarray | None = None    # (K,) complex

    @property
    def n_frames(self) -> int:
        return self.y.shape[0]

    @property
    def n_cells(self) -> int:
        return self.gamma_tx.shape[1]

    def to_document(self) -> dict:
        def cpx(a):
            return None if a is None else [[float(z.real), float(z.imag)] for z in a.ravel()]

        return {
            "kind": "metasense.received_batch",
            "n_frames": self.n_frames,
            "n_cells": self.n_cells,
            "y": cpx(self.y),
            "gamma_tx": cpx(self.gamma_tx),
            "weights": cpx(self.weights),
            "noise_power_eff": self.noise_power_eff.tolist(),
            "gamma_j": cpx(self.gamma_j),
            "y_jlos": cpx(self.y_jlos),
        }


@dataclass
class BatchSet:
    """Vectorized batches for S scenarios with ``n_mc`` noise draws each."""

    y: np.ndarray                 # (S, n_mc, K) complex
    gamma_tx: np.ndarray          # (S, K, M) complex
    weights: np.ndarray           # (S, K, n_rf) complex
    noise_power_eff: np.ndarray   # (S, K) float
    gamma_j: np.ndarray | None = None   # (S, K, M) complex
    y_jlos: np.ndarray | None = None    # (S, K) complex

    def batch(self, s: int, draw: int = 0) -> ReceivedBatch:
        """Extract one scenario/draw as a scalar :class:`ReceivedBatch`."""
        return ReceivedBatch(
            y=self.y[s, draw].copy(),
            gamma_tx=self.gamma_tx[s].copy(),
            weights=self.weights[s].copy(),
            noise_power_eff=self.noise_power_eff[s].copy(),
            gamma_j=None if self.gamma_j is None else self.gamma_j[s].copy(),
            y_jlos=None if self.y_jlos is None else self.y_jlos[s].copy(),
        )


def synthesize_batches(
    products_tx: np.ndarray,
    reflections: np.ndarray,
    tx_power_w: float,
    noise_power_w: float,
    n_mc: int,
    rng: np.random.Generator,
    *,
    products_jam: np.ndarray | None = None,
    h_los: np.ndarray | None = None,
    jam_power_w: float = 0.0,
    reference: str = "genie",
    combiner: str = "mrc",
) -> BatchSet:
    """Synthesize per-frame combined measurements for a stack of scenarios.

    Parameters
    ----------
    products_tx : (K, n_rf, M) complex
        Transmitter-side chain response rows from :func:`control_products`.
    reflections : (S, M) complex
        Scenario reflection vectors.
    products_jam : (S, K, n_rf, M) complex, optional
        Jammer-side response rows, one stack per scenario draw.
    h_los : (S, n_rf) complex, optional
        Direct jammer path per scenario draw.
    reference : "genie" | "nominal"
        Combine against the true reflection vector or against all-ones.
    combiner : "mrc" | "sum"
        MRC weights or a plain unweighted chain sum.

    Noise draws are consumed identically whether or not jamming inputs are
    supplied, so clean and jammed runs with the same generator state share
    the same noise realizations.
    """
    reflections = np.atleast_2d(reflections)
    s_count, n_cells = reflections.shape
    n_frames, n_rf, _ = products_tx.shape

    if reference == "genie":
        h_ref = np.einsum("kcm,sm->skc", products_tx, reflections)
    elif reference == "nominal":
        h_nom = products_tx.sum(axis=2)  # (K, n_rf)
        h_ref = np.broadcast_to(h_nom, (s_count, n_frames, n_rf))
    else:
        raise ValueError(f"unknown reference '{reference}'")

    weights = _weights_batched(h_ref, combiner)  # (S, K, n_rf)
    gamma_tx = np.sqrt(tx_power_w) * np.einsum("skc,kcm->skm", weights, products_tx)

    noise = rng.standard_normal((s_count, n_mc, n_frames, n_rf)) + 1j * (
        rng.standard_normal((s_count, n_mc, n_frames, n_rf))
    )
    noise *= np.sqrt(noise_power_w / 2.0)
    combined_noise = np.einsum("skc,sjkc->sjk", weights, noise)
    noise_power_eff = noise_power_w * np.sum(np.abs(weights) ** 2, axis=-1)

    # Per-scenario matvec keeps the noise-free identity y == gamma_tx @ v
    # bit-exact for callers re-deriving the signal the same way.
    signal = np.stack([gamma_tx[s] @ reflections[s] for s in range(s_count)])
    y = signal[:, None, :] + combined_noise

    gamma_j = None
    y_jlos = None
    if products_jam is not None:
        if h_los is None:
            raise ValueError("h_los must accompany products_jam")
        gamma_j = np.sqrt(jam_power_w) * np.einsum(
            "skc,skcm->skm", weights, products_jam
        )
        y_jlos = np.sqrt(jam_power_w) * np.einsum("skc,sc->sk", weights, h_los)
        jam_signal = (
            np.stack([gamma_j[s] @ reflections[s] for s in range(s_count)])
            + y_jlos
        )
        y = y + jam_signal[:, None, :]

    return BatchSet(
        y=y,
        gamma_tx=gamma_tx,
        weights=weights,
        noise_power_eff=noise_power_eff,
        gamma_j=gamma_j,
        y_jlos=y_jlos,
    )


def synthesize_batch(
    products_tx: np.ndarray,
    reflection: np.ndarray,
    tx_power_w: float,
    noise_power_w: float,
    rng: np.random.Generator,
    *,
    products_jam: np.ndarray | None = None,
    h_los: np.ndarray | None = None,
    jam_power_w: float = 0.0,
    reference: str = "genie",
    combiner: str = "mrc",
) -> ReceivedBatch:
    """Single-scenario convenience wrapper around :func:`synthesize_batches`."""
    batches = synthesize_batches(
        products_tx,
        reflection[None, :],
        tx_power_w,
        noise_power_w,
        1,
        rng,
        products_jam=None if products_jam is None else products_jam[None],
        h_los=None if h_los is None else np.atleast_2d(h_los),
        jam_power_w=jam_power_w,
        reference=reference,
        combiner=combiner,
    )
    return batches.batch(0, 0)


# ---------------------------------------------------------------------------
# SINR
# ---------------------------------------------------------------------------

def compute_sinr(batch: ReceivedBatch, reflection: np.ndarray) -> float:
    """Post-combining signal-to-interference-plus-noise ratio (linear).

    Power factors are already embedded in ``gamma_tx`` / ``gamma_j`` /
    ``y_jlos``, so each power level is counted exactly once.  Without jamming
    inputs this reduces to the plain SNR.
    """
    signal = float(np.sum(np.abs(batch.gamma_tx @ reflection) ** 2))
    noise = float(batch.noise_power_eff.sum())
    interference = 0.0
    if batch.gamma_j is not None:
        jam = batch.gamma_j @ reflection
        if batch.y_jlos is not None:
            jam = jam + batch.y_jlos
        interference = float(np.sum(np.abs(jam) ** 2))
    return signal / (interference + noise)


def compute_sinr_batched(batches: BatchSet, reflections: np.ndarray) -> np.ndarray:
    """Per-scenario linear SINR for a :class:`BatchSet`; shape (S,)."""
    reflections = np.atleast_2d(reflections)
    signal = np.sum(
        np.abs(np.einsum("skm,sm->sk", batches.gamma_tx, reflections)) ** 2, axis=1
    )
    noise = batches.noise_power_eff.sum(axis=1)
    interference = np.zeros_like(signal)
    if batches.gamma_j is not None:
        jam = np.einsum("skm,sm->sk", batches.gamma_j, reflections)
        if batches.y_jlos is not None:
            jam = jam + batches.y_jlos
        interference = np.sum(np.abs(jam) ** 2, axis=1)
    return signal / (interference + noise)


def sinr_db(sinr_linear) -> np.ndarray:
    """Linear SINR to decibels."""
    return 10.0 * np.log10(sinr_linear)
