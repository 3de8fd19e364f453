"""Measured confusion rates per group size, exported in the engine's
profile schemas (the file formats are the contract; nothing here imports
the engine)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Pool, group_labels, sample_groups
from .macs import block_mac_counts
from .network import GroupNetwork, LayeredClassifier
from .training import predict_groups

ORACLE_SCHEMA_VERSION = 1
COST_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SizeCounts:
    """Confusion counts over evaluated groups of one size."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def sensitivity(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 1.0

    @property
    def specificity(self) -> float:
        return self.tn / (self.tn + self.fp) if self.tn + self.fp else 1.0


@dataclass
class ConfusionMeasurement:
    """Per-size confusion counts plus any sample-size warnings."""

    counts: dict[int, SizeCounts]
    warnings: list[str] = field(default_factory=list)

    def sensitivity(self, size: int) -> float:
        return self.counts[size].sensitivity

    def specificity(self, size: int) -> float:
        return self.counts[size].specificity


def measure_confusion(
    group_net: GroupNetwork,
    individual_net: LayeredClassifier,
    pool: Pool,
    sizes=(1, 2, 4),
    groups_per_size: int = 1000,
    seed: int = 0,
) -> ConfusionMeasurement:
    """Evaluate half positive / half negative groups at each size.

    Size 1 is scored with the individual network (its rates fill the
    engine's individual bucket); larger sizes reuse the same group network
    even below its training size.
    """
    rng = np.random.default_rng(seed)
    measurement = ConfusionMeasurement(counts={})
    for size in sizes:
        per_class = groups_per_size // 2
        if per_class < 100:
            measurement.warnings.append(
                f"size {size}: only {per_class} groups per class; rates unstable"
            )
        pos = sample_groups(pool, size, per_class, rng, label=True)
        neg = sample_groups(pool, size, per_class, rng, label=False)
        net = individual_net if size == 1 else group_net
        pos_hits = predict_groups(net, pool, pos).sum().item()
        neg_hits = predict_groups(net, pool, neg).sum().item()
        assert group_labels(pool, pos).all() and not group_labels(pool, neg).any()
        measurement.counts[size] = SizeCounts(
            tp=int(pos_hits),
            fn=per_class - int(pos_hits),
            fp=int(neg_hits),
            tn=per_class - int(neg_hits),
        )
    return measurement


def write_oracle_profile(
    measurement: ConfusionMeasurement,
    path,
    design: str = "feature_merge",
    notes: str = "",
) -> Path:
    """Write the measured rates as an engine oracle-profile document."""
    extra = ("; ".join(measurement.warnings)) if measurement.warnings else ""
    doc = {
        "version": ORACLE_SCHEMA_VERSION,
        "design": design,
        "rows": [
            {
                "size": size,
                "sensitivity": counts.sensitivity,
                "specificity": counts.specificity,
            }
            for size, counts in sorted(measurement.counts.items())
        ],
        "difficulty_weight": 0.0,
        "notes": (notes + (" | WARNING: " + extra if extra else "")).strip(),
    }
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)  # atomic publish
    return path


def write_cost_profile(
    net: LayeredClassifier,
    path,
    split_index: int,
    name: str = "neuralref-digits",
    notes: str = "",
) -> Path:
    """Write measured per-block MACs as an engine cost-profile document."""
    counts = block_mac_counts(net)
    doc = {
        "version": COST_SCHEMA_VERSION,
        "name": name,
        "layer_costs": counts,
        "boundary_presets": {"feature_split": [split_index]},
        "notes": (
            f"Measured per-block MACs of the toy digits classifier "
            f"(depth {len(counts)}, total {sum(counts)} MACs); feature split "
            f"at block {split_index} holds "
            f"{sum(counts[:split_index]) / sum(counts):.4f} of the MACs. "
            + notes
        ).strip(),
    }
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)
    return path
