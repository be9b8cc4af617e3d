"""Compressed-sensing channel estimation and conjugate analog beamforming for multi-user mmWave downlinks."""

__version__ = "0.1.0"

from .channel import (
    AngleModel,
    ChannelConfig,
    ChannelRealization,
    GainModel,
    LinkBudget,
    channel_matrix,
    los_path_gain,
    noise_power,
    nominal_snr,
    sample_channel,
)
from .geometry import AngleGrid, ArrayGeometry, dictionary, steering_vector, virtual_grid
from .rates import (
    BeamformingSolution,
    conjugate_beamformers,
    effective_rate,
    indicator_rate,
    rate_lower_bound,
    single_user_rate,
    sinr_rate,
)
from .recovery import SupportEstimate, correlate, recover_support_omp, recovery_success
from .sim import (
    ExperimentConfig,
    estimate_recovery_probability,
    find_m_epsilon,
    reference_config,
    run_trial,
    split_measurements,
    sweep_coherence,
    sweep_measurements,
)
from .training import (
    SensingOperator,
    TrainingConfig,
    build_sensing_operator,
    gen_training_matrix,
    synthesize_measurements,
)

__all__ = [
    "AngleGrid",
    "AngleModel",
    "ArrayGeometry",
    "BeamformingSolution",
    "ChannelConfig",
    "ChannelRealization",
    "ExperimentConfig",
    "GainModel",
    "LinkBudget",
    "SensingOperator",
    "SupportEstimate",
    "TrainingConfig",
    "build_sensing_operator",
    "channel_matrix",
    "conjugate_beamformers",
    "correlate",
    "dictionary",
    "effective_rate",
    "estimate_recovery_probability",
    "find_m_epsilon",
    "gen_training_matrix",
    "indicator_rate",
    "los_path_gain",
    "noise_power",
    "nominal_snr",
    "reference_config",
    "rate_lower_bound",
    "recover_support_omp",
    "recovery_success",
    "run_trial",
    "sample_channel",
    "single_user_rate",
    "sinr_rate",
    "split_measurements",
    "steering_vector",
    "sweep_coherence",
    "sweep_measurements",
    "synthesize_measurements",
    "virtual_grid",
]
