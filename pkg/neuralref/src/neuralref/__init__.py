"""Toy-scale pooled screening networks and calibration export."""

from .data import (
    Pool,
    group_inputs,
    group_labels,
    load_pools,
    sample_groups,
    subsample_prevalence,
)
from .macs import block_mac_counts
from .measure import (
    ConfusionMeasurement,
    SizeCounts,
    measure_confusion,
    write_cost_profile,
    write_oracle_profile,
)
from .network import (
    GroupNetwork,
    GroupNetworkSpec,
    LayeredClassifier,
    build_group_network,
    digits_classifier,
    merge_pixels,
    parameter_count,
)
from .pipeline import run_pipeline
from .training import finetune, predict_groups, train_individual

__version__ = "0.1.0"
