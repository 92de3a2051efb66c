"""Joint constellation design for the multi-user MIMO broadcast channel.

Design a single transmit constellation indexed by the joint message of all
users by maximizing the minimum per-user mutual information with projected
stochastic gradient descent, and benchmark it against matched, zero-forcing
and MMSE linear precoding baselines via Monte Carlo mutual-information
estimation.
"""

from .metrics import (
    DEFAULT_KERNEL,
    DistanceKernel,
    LossReport,
    MiEstimate,
    batch_loss,
    estimate_mi,
    loss_report,
)
from .model import (
    ChannelSet,
    Constellation,
    MessageSpace,
    ObservationBatch,
    PowerConstraint,
    enumerate_joint_messages,
    noise_var_from_snr,
    normalize_channel,
    simulate_observations,
)
from .optimizer import (
    AdamState,
    OptimizationConfig,
    PlateauRule,
    RunResult,
    adam_step,
    loss_and_gradient,
    optimize,
    optimize_with_restarts,
    project_constraints,
    random_init,
)
from .precoders import (
    EncodingMatrix,
    RankDeficient,
    build_linear_constellation,
    bpsk_map,
    matched_encoder,
    mmse_encoder,
    zf_encoder,
)
from .streams import substream

__version__ = "0.1.0"
