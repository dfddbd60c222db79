"""Dynamic per-id embedding sizes for streaming recommendation.

A discounted disjoint-arm linear UCB policy decides, per user and per item,
whether to grow the id's embedding to the next candidate size.  Contexts
come from streaming frequency/diversity statistics, rewards from cloned
single-step probes of the grown structure, and a segmented harness
alternates policy validation on the previous time slice with model updates
on the current one.
"""

from .bandit import (
    ArmState,
    BanditConfig,
    ContextVector,
    DiscountedLinUCB,
    batch_solve,
    corollary_gamma,
)
from .harness import (
    AlwaysKeepPolicy,
    Interaction,
    RewardConfig,
    Segment,
    SegmentMetrics,
    StreamingExperiment,
    make_interaction,
    reward,
    segment_stream,
)
from .indicators import IndicatorConfig, InteractionStats, ItemFeatureStore
from .model import (
    AdaptiveEmbeddingModel,
    ModelConfig,
    SizeLadder,
    binary_mse_loss,
    multiclass_ce_loss,
)
from .synthetic import DriftingEnvironment, DriftSpec, make_env, run_experiment

__version__ = "0.1.0"

__all__ = [
    "ArmState", "BanditConfig", "ContextVector", "DiscountedLinUCB",
    "batch_solve", "corollary_gamma",
    "AlwaysKeepPolicy", "Interaction", "RewardConfig", "Segment",
    "SegmentMetrics", "StreamingExperiment", "make_interaction", "reward",
    "segment_stream",
    "IndicatorConfig", "InteractionStats", "ItemFeatureStore",
    "AdaptiveEmbeddingModel", "ModelConfig", "SizeLadder",
    "binary_mse_loss", "multiclass_ce_loss",
    "DriftingEnvironment", "DriftSpec", "make_env", "run_experiment",
]
