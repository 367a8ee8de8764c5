"""Sequential decision process over beamforming configurations.

One episode writes every slot of a control sequence exactly once: the agent
visits frames outermost, chains within a frame, and elements fastest, choosing
one configuration index per step.  The reward arrives only at the terminal
state and scores the finished control sequence by synthesizing measurement
batches over a scenario subset, decoding them, and reading the sensing loss
(optionally plus an SINR bonus).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import losses
from .beamforming import (
    BatchSet,
    ControlSequence,
    compute_sinr_batched,
    synthesize_batches,
)
from .channel import (
    ElementResponseTable,
    build_jammer_los,
    gain_constant,
    receiver_leg,
    response_table_for,
    source_leg,
)
from .neuralnet import DenseNet, forward, pinv
from .scene import ExperimentConfig, Scenario, Scene, build_scene, mw_to_w, stack_scenarios


# ---------------------------------------------------------------------------
# Environment bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SensingEnvironment:
    """Immutable per-run cache of scene-derived channel factors.

    ``basis_tx[c, n, m]`` is the transmitter-side two-hop gain of element
    ``n`` on chain ``c`` for cell ``m`` (response factor excluded); the
    separated legs let jammer-side gains be composed per draw without
    recomputing the receiver side.
    """

    cfg: ExperimentConfig
    scene: Scene
    table: ElementResponseTable
    basis_tx: np.ndarray      # (n_rf, n_elements, n_cells) complex
    leg_rx: np.ndarray        # (n_rf, n_elements, n_cells) complex
    leg_src_tx: np.ndarray    # (n_cells,) complex
    const_tx: float
    const_jam: float

    @property
    def steps_per_episode(self) -> int:
        return self.cfg.n_frames * self.cfg.n_rf * self.cfg.n_elements


def build_environment(cfg: ExperimentConfig) -> SensingEnvironment:
    """Resolve a config into a scene plus cached channel factors."""
    scene = build_scene(cfg)
    table = response_table_for(cfg)
    leg_rx = receiver_leg(scene)
    leg_src_tx = source_leg(scene, scene.tx_pos)
    const_tx = gain_constant(scene, cfg.tx_gain_dbi)
    const_jam = gain_constant(scene, cfg.jammer_gain_dbi)
    basis_tx = const_tx * leg_src_tx[None, None, :] * leg_rx
    return SensingEnvironment(
        cfg=cfg,
        scene=scene,
        table=table,
        basis_tx=basis_tx,
        leg_rx=leg_rx,
        leg_src_tx=leg_src_tx,
        const_tx=const_tx,
        const_jam=const_jam,
    )


# ---------------------------------------------------------------------------
# States and transitions
# ---------------------------------------------------------------------------

@dataclass
class MdpState:
    """Cursor over the control sequence: frame, chain, element (all one-based).

    ``ctrl`` is the single mutable control sequence threaded through the
    episode.  The terminal state has ``frame == n_frames + 1``.
    """

    frame: int
    chain: int
    element: int
    ctrl: ControlSequence


def initial_state(cfg: ExperimentConfig) -> MdpState:
    """Fresh episode start: cursor at (1, 1, 1), every slot in configuration 1."""
    ctrl = ControlSequence.initial(
        cfg.n_frames, cfg.n_rf, cfg.n_elements, cfg.n_states
    )
    return MdpState(frame=1, chain=1, element=1, ctrl=ctrl)


def is_terminal(state: MdpState) -> bool:
    """True once every slot has been written."""
    return state.frame > state.ctrl.n_frames


def transition(state: MdpState, action: int) -> MdpState:
    """Write ``action`` into the current slot and advance the cursor in place.

    Elements advance fastest, then chains, then frames; the action is a
    one-based configuration index.
    """
    if is_terminal(state):
        raise ValueError("cannot transition from a terminal state")
    ctrl = state.ctrl
    if not (1 <= action <= ctrl.n_states):
        raise ValueError(
            f"action {action} outside [1, {ctrl.n_states}]"
        )
    ctrl.configs[state.frame - 1, state.chain - 1, state.element - 1] = action
    if state.element < ctrl.n_elements:
        state.element += 1
    elif state.chain < ctrl.n_rf:
        state.element = 1
        state.chain += 1
    else:
        state.element = 1
        state.chain = 1
        state.frame += 1
    return state


# ---------------------------------------------------------------------------
# Episode traces and rollouts
# ---------------------------------------------------------------------------

@dataclass
class TraceStep:
    """One decision: the slot visited, the action taken, and its log-probability."""

    frame: int
    chain: int
    element: int
    action: int
    logprob: float


@dataclass
class EpisodeTrace:
    """A completed episode: per-step records plus the finished control sequence."""

    steps: list[TraceStep]
    terminal_control: ControlSequence
    reward: float | None = None

    def actions(self) -> np.ndarray:
        return np.array([s.action for s in self.steps], dtype=np.int16)

    def to_document(self) -> dict:
        return {
            "kind": "metasense.episode_trace",
            "steps": [
                {
                    "frame": s.frame,
                    "chain": s.chain,
                    "element": s.element,
                    "action": s.action,
                    "logprob": s.logprob,
                }
                for s in self.steps
            ],
            "terminal_control": self.terminal_control.to_document(),
            "reward": self.reward,
        }


def rollout(
    policy, cfg: ExperimentConfig, rng: np.random.Generator, greedy: bool = False
) -> EpisodeTrace:
    """Run one full episode under ``policy``.

    The policy object provides ``begin_episode(ctrl) -> ctx``,
    ``distribution(ctx, state) -> probs`` over the one-based actions, and
    ``apply_action(ctx, frame, chain, element, old, new)`` so it can maintain
    incremental features.  With ``greedy=True`` the argmax action is taken
    (lowest index wins ties) and the generator is never consulted.
    """
    state = initial_state(cfg)
    ctx = policy.begin_episode(state.ctrl)
    steps: list[TraceStep] = []
    n_states = state.ctrl.n_states
    while not is_terminal(state):
        probs = policy.distribution(ctx, state)
        if greedy:
            action = int(np.argmax(probs)) + 1
        else:
            action = int(rng.choice(n_states, p=probs / probs.sum())) + 1
        old = int(state.ctrl.configs[state.frame - 1, state.chain - 1, state.element - 1])
        steps.append(
            TraceStep(
                frame=state.frame,
                chain=state.chain,
                element=state.element,
                action=action,
                logprob=float(np.log(probs[action - 1])),
            )
        )
        policy.apply_action(ctx, state.frame, state.chain, state.element, old, action)
        transition(state, action)
    return EpisodeTrace(steps=steps, terminal_control=state.ctrl)


class UniformPolicy:
    """Equal probability over all configurations; baseline for tests and oracles."""

    def __init__(self, n_states: int):
        self.n_states = n_states

    def begin_episode(self, ctrl: ControlSequence):
        return None

    def distribution(self, ctx, state: MdpState) -> np.ndarray:
        return np.full(self.n_states, 1.0 / self.n_states)

    def apply_action(self, ctx, frame, chain, element, old, new) -> None:
        pass


# ---------------------------------------------------------------------------
# Measurement evaluation and terminal reward
# ---------------------------------------------------------------------------

@dataclass
class MeasurementSet:
    """Synthesized and decoded measurements for a scenario subset.

    ``features`` stacks the real and imaginary parts of each decoded
    reflection estimate; rows are ordered scenario-major, noise-draw-minor.
    """

    batches: BatchSet
    features: np.ndarray    # (S * n_mc, 2 * M) float
    labels: np.ndarray      # (S * n_mc, M) float
    sinr: np.ndarray        # (S,) float, linear
    n_scenarios: int
    n_mc: int


def evaluate_measurements(
    ctrl: ControlSequence,
    scenarios: list[Scenario],
    env: SensingEnvironment,
    rng: np.random.Generator,
    n_mc: int | None = None,
    jam_power_mw: float | None = None,
) -> MeasurementSet:
    """Synthesize, decode, and package measurements for a scenario subset.

    Jammer positions are drawn (one per scenario) before the noise, and they
    are drawn even when the jam power is zero, so clean and jammed runs with
    the same generator state see identical noise realizations.
    """
    cfg = env.cfg
    n_mc = cfg.n_mc if n_mc is None else n_mc
    jam_power_mw = cfg.jam_power_mw if jam_power_mw is None else jam_power_mw
    occupancy, reflections = stack_scenarios(scenarios)
    s_count = reflections.shape[0]

    lo = env.scene.jammer_center - env.scene.jammer_side / 2.0
    hi = env.scene.jammer_center + env.scene.jammer_side / 2.0
    jam_pos = rng.uniform(lo, hi, size=(s_count, 3))

    r_sel = env.table.values[ctrl.configs - 1]  # (K, n_rf, n_elements)
    summed_leg = np.einsum("kcn,cnm->kcm", r_sel, env.leg_rx)
    products_tx = env.const_tx * env.leg_src_tx[None, None, :] * summed_leg

    jam_kwargs = {}
    if jam_power_mw > 0.0:
        leg_src_jam = source_leg(env.scene, jam_pos)  # (S, M)
        products_jam = (
            env.const_jam
            * leg_src_jam[:, None, None, :]
            * summed_leg[None, :, :, :]
        )
        h_los = build_jammer_los(env.scene, cfg, jam_pos)  # (S, n_rf)
        jam_kwargs = dict(
            products_jam=products_jam,
            h_los=h_los,
            jam_power_w=mw_to_w(jam_power_mw),
        )

    batches = synthesize_batches(
        products_tx,
        reflections,
        mw_to_w(cfg.tx_power_mw),
        cfg.noise_power_w,
        n_mc,
        rng,
        reference=cfg.mrc_reference,
        combiner=cfg.combiner,
        **jam_kwargs,
    )

    decoder = pinv(batches.gamma_tx)  # (S, M, K)
    vhat = np.einsum("smk,sjk->sjm", decoder, batches.y)  # (S, n_mc, M)
    features = np.concatenate([vhat.real, vhat.imag], axis=-1).reshape(
        s_count * n_mc, -1
    )
    # Cap each feature row at unit RMS.  Reflection magnitudes keep clean
    # decodes well inside the cap (identity there), but jamming or a badly
    # conditioned decode can blow v-hat up by orders of magnitude, and an
    # uncapped row saturates the untrained sensing net so hard that the
    # loss starts far above the no-information plateau.
    rms = np.sqrt(np.mean(features**2, axis=1, keepdims=True))
    features = features / np.maximum(1.0, rms)
    labels = np.repeat(
        occupancy.astype(float), n_mc, axis=0
    )  # (S * n_mc, M)
    sinr = compute_sinr_batched(batches, reflections)
    return MeasurementSet(
        batches=batches,
        features=features,
        labels=labels,
        sinr=sinr,
        n_scenarios=s_count,
        n_mc=n_mc,
    )


def reward_from_measurements(
    measurements: MeasurementSet,
    sensing_net: DenseNet,
    mode: str,
    beta: float,
) -> tuple[float, float, float]:
    """Score a measurement set: returns (reward, mean CE, mean linear SINR).

    Mode ``p1`` rewards the negative mean cross-entropy alone; mode ``p2``
    adds ``beta * log2(1 + SINR)`` averaged over the subset.  The SINR bonus
    is an anti-jamming objective, so it only applies when the measurements
    were actually synthesized with a jammer; with zero jam power the p2
    reward reduces to the p1 reward exactly.
    """
    probs, _ = forward(sensing_net, measurements.features)
    ce = losses.cross_entropy(probs, measurements.labels)
    mean_sinr = float(measurements.sinr.mean())
    if mode == "p1":
        reward = -ce
    elif mode == "p2":
        reward = -ce
        if measurements.batches.gamma_j is not None:
            reward += beta * float(np.mean(np.log2(1.0 + measurements.sinr)))
    else:
        raise ValueError(f"unknown mode '{mode}'")
    return reward, ce, mean_sinr


def terminal_reward(
    ctrl: ControlSequence,
    sensing_net: DenseNet,
    scenarios: list[Scenario],
    env: SensingEnvironment,
    rng: np.random.Generator,
    mode: str = "p1",
    n_mc: int | None = None,
    jam_power_mw: float | None = None,
) -> float:
    """Monte Carlo terminal reward of a finished control sequence."""
    measurements = evaluate_measurements(
        ctrl, scenarios, env, rng, n_mc=n_mc, jam_power_mw=jam_power_mw
    )
    reward, _, _ = reward_from_measurements(
        measurements, sensing_net, mode, env.cfg.beta
    )
    return reward
