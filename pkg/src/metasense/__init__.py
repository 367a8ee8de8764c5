"""Distributed reconfigurable-metasurface RF sensing: simulation and learning.

The package simulates a distributed set of phase-reconfigurable receive
panels sensing occupancy over a cubic grid, trains a policy-gradient
controller that picks per-element phase configurations and a dense network
that decodes occupancy from pseudoinverse-recovered reflections, and
evaluates anti-jamming behavior against conventional zero-forcing receivers.

Layout: ``scene`` (geometry and configuration), ``channel`` (two-hop and
direct LoS gains), ``beamforming`` (control sequences, combining, SINR),
``losses`` (objectives), ``neuralnet`` (dense-network engine with exact
backprop and finite-difference verification), ``mdp_env`` (episode state
machine and terminal rewards), ``agents`` (REINFORCE and supervised
training), ``baselines`` (zero-forcing comparison, system variants,
brute-force oracles), and ``cli`` (command-line harness).
"""

__version__ = "0.1.0"

from .agents import (
    EpochRecord,
    PolicyNetwork,
    RunReport,
    RunningBaseline,
    TrainRunConfig,
    build_policy,
    build_sensing_net,
    evaluate_model,
    learning_rate_at,
    load_model,
    policy_update,
    save_model,
    sensing_update,
    train,
)
from .baselines import (
    BruteForceResult,
    OracleRunResult,
    SinrRow,
    SinrTable,
    brute_force_best,
    comparison_table,
    conventional_sinr,
    evaluate_variant,
    mrc_combiner,
    oracle_suite,
    proposed_sinr,
    tiny_config,
    tiny_oracle_run,
    variant_config,
    zero_forcing_sinr,
    zf_combiner,
)
from .beamforming import (
    ControlSequence,
    ReceivedBatch,
    compute_sinr,
    compute_sinr_batched,
    decode_pattern,
    effective_channel,
    encode_pattern,
    mrc_weights,
    sinr_db,
    synthesize_batch,
    synthesize_batches,
)
from .channel import (
    ElementResponseTable,
    ProjectionMatrix,
    build_jammer_los,
    build_projection,
    build_response_table,
    load_projection,
    path_gain,
    response_table_for,
    save_projection,
    two_hop_gain_basis,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DegenerateChannelError,
    GeometryError,
    IncompatibleCheckpointError,
    MetasenseError,
    SearchSpaceError,
)
from .losses import accuracy, combined_loss, cross_entropy, cross_entropy_grad
from .mdp_env import (
    EpisodeTrace,
    MdpState,
    SensingEnvironment,
    UniformPolicy,
    build_environment,
    evaluate_measurements,
    initial_state,
    is_terminal,
    rollout,
    terminal_reward,
    transition,
)
from .neuralnet import (
    DenseNet,
    backward,
    decode_measurement,
    forward,
    gradient_check,
    init_dense_net,
    load_checkpoint,
    pinv,
    save_checkpoint,
    sgd_step,
)
from .scene import (
    ExperimentConfig,
    GeometryConfig,
    NetworkConfig,
    Scenario,
    Scene,
    build_scene,
    load_config,
    load_config_file,
    load_scene,
    sample_scenarios,
    save_scene,
    validate_config,
)
