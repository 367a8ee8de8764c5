"""Policy-gradient configuration search and sensing-network training.

The policy network maps an episode state to a distribution over configuration
choices.  Its input concatenates one-hot frame/element/chain indices with
per-frame channel features: the real and imaginary parts of each frame's
chain-response rows (``control @ projection``), each embedded by a shared
feature subnetwork.  The policy is trained by episodic REINFORCE against the
terminal reward; the sensing network is trained by supervised cross-entropy
on decoded measurements.  Both use plain SGD.

Rollouts keep the policy input up to date incrementally: writing one slot of
the control sequence changes one chain-response row, two feature-subnetwork
inputs, and a handful of one-hot coordinates, so each step touches only the
affected pieces rather than re-encoding the whole state.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import losses
from .beamforming import ControlSequence
from .errors import CheckpointError
from .mdp_env import (
    EpisodeTrace,
    MdpState,
    SensingEnvironment,
    build_environment,
    evaluate_measurements,
    reward_from_measurements,
    rollout,
)
from .neuralnet import (
    DenseNet,
    LayerGrads,
    _apply_activation,
    accumulate_grads,
    backward,
    forward,
    init_dense_net,
    net_from_document,
    net_to_document,
    scale_grads,
    sgd_step,
)
from .scene import ExperimentConfig, Scenario, sample_scenarios


# ---------------------------------------------------------------------------
# Policy network
# ---------------------------------------------------------------------------

@dataclass
class PolicyNetwork:
    """Feature subnetwork plus softmax head, bound to a channel basis.

    ``feature_scale`` normalizes the chain-response rows to unit order of
    magnitude before embedding; it is fixed at build time from the basis and
    stored in checkpoints.
    """

    feature_net: DenseNet
    head: DenseNet
    n_frames: int
    n_elements: int
    n_rf: int
    n_states: int
    n_cells: int
    feature_dim: int
    feature_scale: float
    basis: np.ndarray          # (n_rf, n_elements, n_cells) complex
    responses: np.ndarray      # (n_states,) complex

    @property
    def part_dim(self) -> int:
        """Width of one feature-subnetwork input (one frame's re or im part)."""
        return self.n_rf * self.n_cells

    @property
    def onehot_dim(self) -> int:
        return self.n_frames + self.n_elements + self.n_rf

    @property
    def input_dim(self) -> int:
        return self.onehot_dim + 2 * self.n_frames * self.feature_dim

    # -- episode context ----------------------------------------------------

    def begin_episode(self, ctrl: ControlSequence) -> "EpisodeContext":
        return EpisodeContext(self, ctrl)

    def distribution(self, ctx: "EpisodeContext", state: MdpState) -> np.ndarray:
        return ctx.distribution(state)

    def apply_action(self, ctx, frame, chain, element, old, new) -> None:
        ctx.apply_action(frame, chain, element, old, new)

    # -- reference (non-incremental) encoding --------------------------------

    def frame_parts(self, products: np.ndarray) -> np.ndarray:
        """Scaled re/im feature-net inputs, shape (2 * n_frames, part_dim).

        Row ``2k`` is frame ``k``'s real part, row ``2k + 1`` its imaginary
        part, matching the layout of the assembled policy input.
        """
        k = self.n_frames
        parts = np.empty((k, 2, self.part_dim))
        flat = products.reshape(k, -1)
        parts[:, 0, :] = flat.real
        parts[:, 1, :] = flat.imag
        return self.feature_scale * parts.reshape(2 * k, self.part_dim)

    def encode_input(self, state: MdpState, products: np.ndarray) -> np.ndarray:
        """Full policy input for one state, computed from scratch."""
        x = np.zeros(self.input_dim)
        x[state.frame - 1] = 1.0
        x[self.n_frames + state.element - 1] = 1.0
        x[self.n_frames + self.n_elements + state.chain - 1] = 1.0
        embeddings, _ = forward(self.feature_net, self.frame_parts(products))
        x[self.onehot_dim :] = embeddings.ravel()
        return x

    def products_for(self, ctrl: ControlSequence) -> np.ndarray:
        """Chain-response rows of every frame, shape (K, n_rf, n_cells)."""
        r_sel = self.responses[ctrl.configs - 1]
        return np.einsum("kcn,cnm->kcm", r_sel, self.basis)


class EpisodeContext:
    """Incremental policy-input state for one episode.

    Maintains the chain-response rows, the feature-subnetwork first-layer
    pre-activations per part, the embedded input vector, and the head's
    first-layer pre-activations, updating each piece only where a step
    actually changes it.
    """

    def __init__(self, policy: PolicyNetwork, ctrl: ControlSequence):
        self.policy = policy
        self.ctrl = ctrl
        self.products = policy.products_for(ctrl)  # (K, C, M)
        parts = policy.frame_parts(self.products)  # (2K, P)
        f0 = policy.feature_net.layers[0]
        self.part_pre = parts @ f0.w.T + f0.b  # (2K, h_f)
        self.embeddings = self._embed_from_pre(self.part_pre)  # (2K, d)

        self.x = np.zeros(policy.input_dim)
        self.x[0] = 1.0
        self.x[policy.n_frames] = 1.0
        self.x[policy.n_frames + policy.n_elements] = 1.0
        self.x[policy.onehot_dim :] = self.embeddings.ravel()
        h0 = policy.head.layers[0]
        self.head_pre = h0.w @ self.x + h0.b
        self.cursor = (1, 1, 1)

    def _embed_from_pre(self, pre: np.ndarray) -> np.ndarray:
        """Finish the feature-net forward from first-layer pre-activations."""
        net = self.policy.feature_net
        h = _apply_activation(net.layers[0].activation, pre)
        for layer in net.layers[1:]:
            h = _apply_activation(layer.activation, h @ layer.w.T + layer.b)
        return h

    def _move_onehot(self, offset: int, old: int, new: int) -> None:
        if old == new:
            return
        w0 = self.policy.head.layers[0].w
        self.x[offset + old - 1] = 0.0
        self.x[offset + new - 1] = 1.0
        self.head_pre += w0[:, offset + new - 1] - w0[:, offset + old - 1]

    def distribution(self, state: MdpState) -> np.ndarray:
        pol = self.policy
        frame, chain, element = self.cursor
        self._move_onehot(0, frame, state.frame)
        self._move_onehot(pol.n_frames, element, state.element)
        self._move_onehot(pol.n_frames + pol.n_elements, chain, state.chain)
        self.cursor = (state.frame, state.chain, state.element)

        head = pol.head
        h = _apply_activation(head.layers[0].activation, self.head_pre)
        for layer in head.layers[1:]:
            h = _apply_activation(layer.activation, layer.w @ h + layer.b)
        return h

    def apply_action(
        self, frame: int, chain: int, element: int, old: int, new: int
    ) -> None:
        if old == new:
            return
        pol = self.policy
        delta = (
            pol.responses[new - 1] - pol.responses[old - 1]
        ) * pol.basis[chain - 1, element - 1]  # (M,)
        self.products[frame - 1, chain - 1] += delta

        # The changed product row occupies columns [lo, hi) of frame ``frame``'s
        # two feature-net inputs; push the delta through the first layer only.
        lo = (chain - 1) * pol.n_cells
        hi = lo + pol.n_cells
        f0 = pol.feature_net.layers[0]
        w_cols = f0.w[:, lo:hi]
        re_idx = 2 * (frame - 1)
        for part, dvals in ((re_idx, delta.real), (re_idx + 1, delta.imag)):
            self.part_pre[part] += w_cols @ (pol.feature_scale * dvals)
            new_embed = self._embed_from_pre(self.part_pre[part][None, :])[0]
            slot = pol.onehot_dim + part * pol.feature_dim
            old_embed = self.x[slot : slot + pol.feature_dim]
            h0 = pol.head.layers[0]
            self.head_pre += h0.w[:, slot : slot + pol.feature_dim] @ (
                new_embed - old_embed
            )
            self.x[slot : slot + pol.feature_dim] = new_embed


def build_policy(
    env: SensingEnvironment, rng: np.random.Generator
) -> PolicyNetwork:
    """Initialize a policy for the given environment.

    Glorot weights with zero biases throughout, except the softmax output
    layer, which starts at zero so the initial action distribution is
    uniform.  The feature scale is set so a typical chain-response entry (a
    random-phase sum over the elements of one panel) lands near unit
    magnitude.
    """
    cfg = env.cfg
    net_cfg = cfg.network
    part_dim = cfg.n_rf * cfg.n_cells
    feature_dims = [part_dim, *net_cfg.feature_hidden, net_cfg.feature_dim]
    feature_acts = ["relu"] * len(net_cfg.feature_hidden) + ["identity"]
    feature_net = init_dense_net(feature_dims, feature_acts, rng)

    input_dim = (
        cfg.n_frames
        + cfg.n_elements
        + cfg.n_rf
        + 2 * cfg.n_frames * net_cfg.feature_dim
    )
    head_dims = [input_dim, *net_cfg.policy_hidden, cfg.n_states]
    head_acts = ["relu"] * len(net_cfg.policy_hidden) + ["softmax"]
    head = init_dense_net(head_dims, head_acts, rng)
    # Zero the softmax layer so the initial policy is exactly uniform at
    # every state.  The episode starts from the all-ones control, where the
    # element responses add coherently and the channel features run several
    # times hotter than under a mixed control; random final-layer weights
    # turn that into saturated logits, and a policy that starts saturated
    # at the very states it visits first never explores.
    head.layers[-1].w[:] = 0.0
    head.layers[-1].b[:] = 0.0

    rms = float(np.sqrt(np.mean(np.abs(env.basis_tx) ** 2)))
    feature_scale = 1.0 / (np.sqrt(cfg.n_elements) * rms)

    return PolicyNetwork(
        feature_net=feature_net,
        head=head,
        n_frames=cfg.n_frames,
        n_elements=cfg.n_elements,
        n_rf=cfg.n_rf,
        n_states=cfg.n_states,
        n_cells=cfg.n_cells,
        feature_dim=net_cfg.feature_dim,
        feature_scale=feature_scale,
        basis=env.basis_tx,
        responses=env.table.values.copy(),
    )


def build_sensing_net(
    cfg: ExperimentConfig, rng: np.random.Generator
) -> DenseNet:
    """Sensing network: stacked re/im reflection estimates to per-cell probabilities."""
    dims = [2 * cfg.n_cells, *cfg.network.sensing_hidden, cfg.n_cells]
    acts = ["relu"] * len(cfg.network.sensing_hidden) + ["sigmoid"]
    return init_dense_net(dims, acts, rng)


# ---------------------------------------------------------------------------
# REINFORCE update
# ---------------------------------------------------------------------------

@dataclass
class RunningBaseline:
    """Mean of episode rewards, used as the advantage baseline.

    With ``decay=None`` this is the plain running mean of everything pushed.
    With a decay in (0, 1) it is an exponential moving average (bias-corrected
    so early values are true means of what was seen).  Training uses the
    decayed form: the reward rises steadily while the sensing net improves,
    and a baseline that averages all history lags that rise, which makes the
    advantage positive epoch after epoch and lets REINFORCE reinforce every
    sampled trajectory into a premature deterministic policy.  A short-horizon
    average tracks the rise and leaves only the genuine per-episode credit.
    """

    decay: float | None = None
    total: float = 0.0
    count: int = 0
    weight: float = 0.0

    @property
    def value(self) -> float:
        if self.decay is None:
            return self.total / self.count if self.count else 0.0
        return self.total / self.weight if self.weight else 0.0

    def push(self, reward: float) -> None:
        if self.decay is None:
            self.total += reward
            self.count += 1
        else:
            self.total = self.decay * self.total + reward
            self.weight = self.decay * self.weight + 1.0


def _replay_trace(policy: PolicyNetwork, trace: EpisodeTrace):
    """Rebuild per-step policy inputs from a trace.

    Returns the distinct feature-subnetwork input rows, the per-step indices
    into them (ordered frame-major, re before im), and the per-step one-hot
    coordinates.  Distinct rows are shared across the many steps that leave a
    given frame untouched, which keeps the batched forward small.
    """
    k, two_k = policy.n_frames, 2 * policy.n_frames
    n_steps = len(trace.steps)
    ctrl = ControlSequence.initial(
        k, policy.n_rf, policy.n_elements, policy.n_states
    )
    products = policy.products_for(ctrl)
    parts = policy.frame_parts(products).copy()  # (2K, P) current values

    capacity = two_k + 2 * n_steps
    distinct = np.empty((capacity, policy.part_dim))
    distinct[:two_k] = parts
    n_distinct = two_k
    current = np.arange(two_k, dtype=np.int64)
    index_map = np.empty((n_steps, two_k), dtype=np.int64)
    onehots = np.empty((n_steps, 3), dtype=np.int64)

    for t, step in enumerate(trace.steps):
        index_map[t] = current
        onehots[t] = (step.frame - 1, step.element - 1, step.chain - 1)
        f, c, n = step.frame - 1, step.chain - 1, step.element - 1
        old = int(ctrl.configs[f, c, n])
        if step.action != old:
            delta = (
                policy.responses[step.action - 1] - policy.responses[old - 1]
            ) * pol_basis_row(policy, c, n)
            products[f, c] += delta
            lo = c * policy.n_cells
            scaled = policy.feature_scale * delta
            for offset, dvals in ((0, scaled.real), (1, scaled.imag)):
                row = 2 * f + offset
                parts[row, lo : lo + policy.n_cells] += dvals
                distinct[n_distinct] = parts[row]
                current = current.copy()
                current[row] = n_distinct
                n_distinct += 1
        ctrl.configs[f, c, n] = step.action
    return distinct[:n_distinct], index_map, onehots


def pol_basis_row(policy: PolicyNetwork, chain: int, element: int) -> np.ndarray:
    """One element's transmitter-side gain row (zero-based indices)."""
    return policy.basis[chain, element]


def _pool_rows(grad_rows: np.ndarray, indices: np.ndarray, n_distinct: int):
    """Sum gradient rows that refer to the same distinct input row."""
    pooled = np.empty((n_distinct, grad_rows.shape[1]))
    for col in range(grad_rows.shape[1]):
        pooled[:, col] = np.bincount(
            indices, weights=grad_rows[:, col], minlength=n_distinct
        )
    return pooled


def policy_gradients(
    policy: PolicyNetwork,
    traces: list[EpisodeTrace],
    baseline: float,
    entropy_weight: float = 0.0,
) -> tuple[list[LayerGrads], list[LayerGrads]]:
    """REINFORCE gradient of the expected terminal reward.

    Estimator: the mean over episode traces of
    ``(reward - baseline) * sum_t grad log pi(action_t | state_t)``.
    Returns (head gradients, feature-subnetwork gradients) pointing in the
    ascent direction.

    A positive ``explore_weight`` adds the direct gradient of
    ``explore_weight * sum_t mean_a log pi(a|s_t)`` over the visited states —
    the log-likelihood of the uniform action mixture.  With a single episode
    per update and a terminal-only reward, the advantage is noisy and often
    shares a sign across many consecutive episodes, which ratchets the action
    distribution toward whatever happened to be sampled.  In logit space this
    term contributes ``explore_weight * (uniform - pi)`` per step: unlike an
    entropy bonus, whose gradient vanishes as the distribution saturates, the
    restoring force stays finite at saturation, so a drift-saturated policy
    is always pulled back toward exploration unless the reward signal
    genuinely prefers an action.
    """
    head_total: list[LayerGrads] | None = None
    feat_total: list[LayerGrads] | None = None
    for trace in traces:
        if trace.reward is None:
            raise ValueError("trace has no terminal reward")
        distinct, index_map, onehots = _replay_trace(policy, trace)
        n_steps = len(trace.steps)
        omega = (trace.reward - baseline) / len(traces)

        embeddings, feat_tape = forward(policy.feature_net, distinct)

        x = np.zeros((n_steps, policy.input_dim))
        rows = np.arange(n_steps)
        x[rows, onehots[:, 0]] = 1.0
        x[rows, policy.n_frames + onehots[:, 1]] = 1.0
        x[rows, policy.n_frames + policy.n_elements + onehots[:, 2]] = 1.0
        x[:, policy.onehot_dim :] = embeddings[index_map].reshape(n_steps, -1)

        probs, head_tape = forward(policy.head, x)
        actions = np.array([s.action - 1 for s in trace.steps])
        grad_out = np.zeros_like(probs)
        grad_out[rows, actions] = omega / probs[rows, actions]
        if entropy_weight:
            # d/dp of -sum p ln p; the softmax backward absorbs the constant.
            grad_out -= (
                entropy_weight / len(traces) * (np.log(probs) + 1.0)
            )

        head_grads, dx = backward(policy.head, head_tape, grad_out)
        d_embed = dx[:, policy.onehot_dim :].reshape(-1, policy.feature_dim)
        d_distinct = _pool_rows(d_embed, index_map.ravel(), distinct.shape[0])
        feat_grads, _ = backward(policy.feature_net, feat_tape, d_distinct)

        head_total = accumulate_grads(head_total, head_grads)
        feat_total = accumulate_grads(feat_total, feat_grads)
    return head_total, feat_total


def policy_update(
    policy: PolicyNetwork,
    traces: list[EpisodeTrace],
    lr: float,
    baseline: float = 0.0,
    entropy_weight: float = 0.0,
) -> float:
    """One ascent step on the REINFORCE objective; returns the gradient norm."""
    head_grads, feat_grads = policy_gradients(policy, traces, baseline, entropy_weight)
    norm_sq = sum(float(np.sum(g.dw**2) + np.sum(g.db**2)) for g in head_grads)
    norm_sq += sum(float(np.sum(g.dw**2) + np.sum(g.db**2)) for g in feat_grads)
    sgd_step(policy.head, scale_grads(head_grads, -1.0), lr)
    sgd_step(policy.feature_net, scale_grads(feat_grads, -1.0), lr)
    return float(np.sqrt(norm_sq))


# ---------------------------------------------------------------------------
# Sensing update
# ---------------------------------------------------------------------------

def sensing_update(
    net: DenseNet, features: np.ndarray, labels: np.ndarray, lr: float
) -> float:
    """One SGD step on the mean cross-entropy of a decoded-measurement batch.

    Returns the pre-update loss (the quantity usually logged as the epoch's
    training loss).
    """
    probs, tape = forward(net, features)
    ce = losses.cross_entropy(probs, labels)
    grad = losses.cross_entropy_grad(probs, labels)
    grads, _ = backward(net, tape, grad)
    sgd_step(net, grads, lr)
    return ce


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainRunConfig:
    """Knobs of one training run that are not part of the experiment config.

    ``jam_power_mw=None`` resolves to the experiment's jam power in mode
    ``p2`` and to 0 (clean) in mode ``p1``; passing an explicit value trains
    either objective under that exposure.  ``fixed_reward_seed`` freezes the
    scenario subset (the full set, in order) and the Monte Carlo draws of
    every reward evaluation, turning the reward into a deterministic function
    of the control sequence.
    """

    mode: str = "p1"
    epochs: int = 1500
    subset_size: int | None = None
    n_mc: int | None = None
    jam_power_mw: float | None = None
    baseline_enabled: bool = True
    eval_every: int = 500
    fixed_reward_seed: int | None = None

    def resolved_jam_power(self, cfg: ExperimentConfig) -> float:
        if self.jam_power_mw is not None:
            return self.jam_power_mw
        return cfg.jam_power_mw if self.mode == "p2" else 0.0


@dataclass
class EpochRecord:
    """One metrics row."""

    epoch: int
    ce_loss: float
    combined_loss: float
    mean_sinr_db: float
    accuracy: float
    wall_ms: int


@dataclass
class RunReport:
    """Everything a finished training run produced."""

    cfg: ExperimentConfig
    run_cfg: TrainRunConfig
    records: list[EpochRecord]
    policy: PolicyNetwork
    sensing: DenseNet
    env: SensingEnvironment
    greedy_control: ControlSequence
    scenarios: list[Scenario]


def learning_rate_at(cfg: ExperimentConfig, epoch: int) -> float:
    """Step-decay schedule; ``epoch`` is one-based."""
    if not cfg.lr_decay_enabled:
        return cfg.learning_rate
    steps = (epoch - 1) // cfg.lr_decay_every
    return cfg.learning_rate * cfg.lr_decay_factor**steps


def train(
    cfg: ExperimentConfig,
    run_cfg: TrainRunConfig,
    checkpoint_dir: str | Path | None = None,
    progress_every: int = 0,
) -> RunReport:
    """Joint training: one episode, one sensing step, one policy step per epoch.

    Per epoch: roll out one episode; synthesize and decode measurement batches
    for a scenario subset (with jammer exposure per the run config); take one
    sensing-network SGD step; evaluate the terminal reward with the updated
    sensing network; take one REINFORCE step on the policy.  All randomness
    derives from ``cfg.seed`` through independent substreams, so identical
    configs yield identical runs.
    """
    env = build_environment(cfg)
    seeds = np.random.SeedSequence(cfg.seed).spawn(6)
    rng_scenarios = np.random.default_rng(seeds[0])
    rng_sensing = np.random.default_rng(seeds[1])
    rng_policy = np.random.default_rng(seeds[2])
    rng_rollout = np.random.default_rng(seeds[3])
    rng_subset = np.random.default_rng(seeds[4])
    rng_reward = np.random.default_rng(seeds[5])

    scenarios = sample_scenarios(cfg, rng_scenarios)
    sensing = build_sensing_net(cfg, rng_sensing)
    policy = build_policy(env, rng_policy)
    baseline = RunningBaseline(decay=cfg.baseline_decay)

    subset_size = run_cfg.subset_size or cfg.subset_size
    n_mc = run_cfg.n_mc or cfg.n_mc
    jam_power_mw = run_cfg.resolved_jam_power(cfg)

    records: list[EpochRecord] = []
    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    if run_cfg.epochs == 0:
        # No training: score the starting control sequence with the untrained
        # sensing net on one subset draw and report that as epoch 0.
        if run_cfg.fixed_reward_seed is not None:
            subset = scenarios
            reward_rng = np.random.default_rng(run_cfg.fixed_reward_seed)
        else:
            picks = rng_subset.choice(
                len(scenarios), size=subset_size, replace=False
            )
            subset = [scenarios[i] for i in picks]
            reward_rng = rng_reward
        ctrl0 = ControlSequence.initial(
            cfg.n_frames, cfg.n_rf, cfg.n_elements, cfg.n_states
        )
        measurements = evaluate_measurements(
            ctrl0, subset, env, reward_rng, n_mc=n_mc, jam_power_mw=jam_power_mw
        )
        probs, _ = forward(sensing, measurements.features)
        ce0 = losses.cross_entropy(probs, measurements.labels)
        mean_sinr0 = float(measurements.sinr.mean())
        records.append(
            EpochRecord(
                epoch=0,
                ce_loss=ce0,
                combined_loss=losses.combined_loss(ce0, mean_sinr0, cfg.beta),
                mean_sinr_db=float(10.0 * np.log10(mean_sinr0)),
                accuracy=losses.accuracy(probs, measurements.labels),
                wall_ms=0,
            )
        )
        greedy = rollout(policy, cfg, rng_rollout, greedy=True).terminal_control
        return RunReport(
            cfg=cfg,
            run_cfg=run_cfg,
            records=records,
            policy=policy,
            sensing=sensing,
            env=env,
            greedy_control=greedy,
            scenarios=scenarios,
        )

    for epoch in range(1, run_cfg.epochs + 1):
        t0 = time.perf_counter()
        lr = learning_rate_at(cfg, epoch)

        trace = rollout(policy, cfg, rng_rollout)

        if run_cfg.fixed_reward_seed is not None:
            subset = scenarios
            reward_rng = np.random.default_rng(run_cfg.fixed_reward_seed)
        else:
            picks = rng_subset.choice(
                len(scenarios), size=subset_size, replace=False
            )
            subset = [scenarios[i] for i in picks]
            reward_rng = rng_reward

        measurements = evaluate_measurements(
            trace.terminal_control,
            subset,
            env,
            reward_rng,
            n_mc=n_mc,
            jam_power_mw=jam_power_mw,
        )

        probs, tape = forward(sensing, measurements.features)
        ce_pre = losses.cross_entropy(probs, measurements.labels)
        acc = losses.accuracy(probs, measurements.labels)
        grads, _ = backward(
            sensing, tape, losses.cross_entropy_grad(probs, measurements.labels)
        )
        # The training objective sums the per-scenario loss over the subset
        # (noise draws averaged); on the batch-mean loss that sum is one step
        # of size lr * subset size.
        sgd_step(sensing, grads, lr * len(subset))

        reward, _, mean_sinr = reward_from_measurements(
            measurements, sensing, run_cfg.mode, cfg.beta
        )
        trace.reward = reward

        # Fold the reward into the baseline average before the update: the
        # first epoch then has zero advantage, which keeps the first policy
        # step from dwarfing later ones (rewards start around -M*ln 2).
        if run_cfg.baseline_enabled:
            baseline.push(reward)
        b = baseline.value if run_cfg.baseline_enabled else 0.0
        policy_update(policy, [trace], lr, b, cfg.entropy_weight)

        wall_ms = int(round((time.perf_counter() - t0) * 1000.0))
        records.append(
            EpochRecord(
                epoch=epoch,
                ce_loss=ce_pre,
                combined_loss=losses.combined_loss(ce_pre, mean_sinr, cfg.beta),
                mean_sinr_db=float(10.0 * np.log10(mean_sinr)),
                accuracy=acc,
                wall_ms=wall_ms,
            )
        )
        if progress_every and epoch % progress_every == 0:
            r = records[-1]
            print(
                f"epoch {epoch}: ce={r.ce_loss:.4f} sinr={r.mean_sinr_db:.2f} dB "
                f"acc={r.accuracy:.3f}",
                flush=True,
            )
        if ckpt_dir is not None and epoch % run_cfg.eval_every == 0:
            save_model(
                ckpt_dir / f"model_epoch_{epoch}.json",
                policy,
                sensing,
                cfg,
                run_cfg.mode,
            )

    greedy = rollout(policy, cfg, rng_rollout, greedy=True).terminal_control
    return RunReport(
        cfg=cfg,
        run_cfg=run_cfg,
        records=records,
        policy=policy,
        sensing=sensing,
        env=env,
        greedy_control=greedy,
        scenarios=scenarios,
    )


# ---------------------------------------------------------------------------
# Model checkpoints (policy + sensing + config)
# ---------------------------------------------------------------------------

def model_to_document(
    policy: PolicyNetwork, sensing: DenseNet, cfg: ExperimentConfig, mode: str
) -> dict:
    return {
        "kind": "metasense.model",
        "mode": mode,
        "config": cfg.to_dict(),
        "feature_scale": policy.feature_scale,
        "policy_feature": net_to_document(policy.feature_net),
        "policy_head": net_to_document(policy.head),
        "sensing": net_to_document(sensing),
    }


def save_model(
    path: str | Path,
    policy: PolicyNetwork,
    sensing: DenseNet,
    cfg: ExperimentConfig,
    mode: str,
) -> None:
    Path(path).write_text(json.dumps(model_to_document(policy, sensing, cfg, mode)))


def load_model(path: str | Path):
    """Load a composite model checkpoint.

    Returns ``(policy, sensing, cfg, mode, env)`` with the policy re-bound to
    the environment rebuilt from the embedded config snapshot.
    """
    from .scene import load_config

    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"model checkpoint is not valid JSON: {exc}") from exc
    if doc.get("kind") != "metasense.model":
        raise CheckpointError("not a model checkpoint document")
    cfg = load_config(json.dumps(doc["config"]))
    env = build_environment(cfg)
    policy = build_policy(env, np.random.default_rng(0))
    loaded_feature = net_from_document(doc["policy_feature"])
    loaded_head = net_from_document(doc["policy_head"])
    if (
        loaded_feature.spec_hash != policy.feature_net.spec_hash
        or loaded_head.spec_hash != policy.head.spec_hash
    ):
        raise CheckpointError(
            "model checkpoint architecture does not match its config snapshot"
        )
    policy.feature_net = loaded_feature
    policy.head = loaded_head
    policy.feature_scale = float(doc["feature_scale"])
    sensing = net_from_document(doc["sensing"])
    return policy, sensing, cfg, doc["mode"], env


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate_model(
    policy: PolicyNetwork,
    sensing: DenseNet,
    env: SensingEnvironment,
    jam_power_mw: float,
    n_trials: int,
    rng: np.random.Generator,
) -> tuple[float, float, float]:
    """Fixed-control evaluation over fresh trials.

    Uses the policy's greedy control sequence, draws ``n_trials`` fresh
    scenarios (one noise draw and one jammer position each), and returns
    ``(accuracy, mean SINR in dB, mean cross-entropy)``.
    """
    ctrl = rollout(policy, env.cfg, rng, greedy=True).terminal_control
    scenarios = sample_scenarios(env.cfg, rng, count=n_trials)
    measurements = evaluate_measurements(
        ctrl, scenarios, env, rng, n_mc=1, jam_power_mw=jam_power_mw
    )
    probs, _ = forward(sensing, measurements.features)
    acc = losses.accuracy(probs, measurements.labels)
    ce = losses.cross_entropy(probs, measurements.labels)
    sinr_db = float(10.0 * np.log10(measurements.sinr.mean()))
    return acc, sinr_db, ce
