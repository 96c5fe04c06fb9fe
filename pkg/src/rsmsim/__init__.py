"""Link-level simulator and analysis toolkit for threshold-detected
receive spatial modulation over clustered mmWave MIMO downlinks."""

__version__ = "0.1.0"

from .analysis import (
    AbepBreakdown,
    TransitionCounts,
    abep,
    constellation_bep,
    modulation_error_prob,
    spatial_error_probs_estimated,
    spatial_error_probs_perfect,
)
from .baseline import RankDeficient, SvdLink, fd_ber, svd_link
from .channel import ChannelParams, ChannelRealization, array_response, draw_channel, sector_gain
from .mimo import (
    AntennaSelection,
    Precoder,
    SingularChannel,
    TooManySubsets,
    select_antennas,
    zf_precoder,
)
from .phy import (
    Constellation,
    IllegalSpatialWord,
    NoRoot,
    ThresholdSpec,
    UnsupportedOrder,
    build_constellation,
    combine_and_detect_modulation,
    decode,
    detect_spatial,
    encode,
    joint_ml_detect,
    receive_amplitudes,
    threshold,
    transmit,
)
from .power import PowerConfig, power_fd, power_proposed, power_ratio
from .simulate import (
    ErrorReport,
    FdConfig,
    PointAborted,
    RsmConfig,
    SnrPoint,
    run,
    run_fd,
)
from .training import (
    DegenerateSample,
    PilotObservation,
    SingularFisher,
    ThresholdEstimate,
    estimate_amplitude,
    estimate_noise,
    estimate_threshold,
    threshold_estimate_stats,
)

__all__ = [
    "__version__",
    "AbepBreakdown",
    "AntennaSelection",
    "ChannelParams",
    "ChannelRealization",
    "Constellation",
    "DegenerateSample",
    "ErrorReport",
    "FdConfig",
    "IllegalSpatialWord",
    "NoRoot",
    "PilotObservation",
    "PointAborted",
    "PowerConfig",
    "Precoder",
    "RankDeficient",
    "RsmConfig",
    "SingularChannel",
    "SingularFisher",
    "SnrPoint",
    "SvdLink",
    "ThresholdEstimate",
    "ThresholdSpec",
    "TooManySubsets",
    "TransitionCounts",
    "UnsupportedOrder",
    "abep",
    "array_response",
    "build_constellation",
    "combine_and_detect_modulation",
    "constellation_bep",
    "decode",
    "detect_spatial",
    "draw_channel",
    "encode",
    "estimate_amplitude",
    "estimate_noise",
    "estimate_threshold",
    "fd_ber",
    "joint_ml_detect",
    "modulation_error_prob",
    "power_fd",
    "power_proposed",
    "power_ratio",
    "receive_amplitudes",
    "run",
    "run_fd",
    "sector_gain",
    "select_antennas",
    "spatial_error_probs_estimated",
    "spatial_error_probs_perfect",
    "svd_link",
    "threshold",
    "threshold_estimate_stats",
    "transmit",
    "zf_precoder",
]
