"""Group-testing networks built from a layered individual classifier.

The individual classifier is an explicit stack of blocks.  A group variant
reuses those same blocks (no new parameters) and differs only in where the
set of inputs is pooled:

* ``pixel_merge``: inputs are averaged elementwise before block 0.
* ``feature_merge``: blocks 0..T-1 run per sample, the feature maps are
  pooled with a permutation-invariant operator, blocks T..L-1 run once.
* ``tree_merge``: inputs are pooled by fan-out at successive block
  boundaries; a single level is structurally identical to feature_merge.

Max pooling is the default aggregation; sum and mean are also supported.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import torch
from torch import nn

PIXEL_MERGE = "pixel_merge"
FEATURE_MERGE = "feature_merge"
TREE_MERGE = "tree_merge"

AGGREGATIONS = ("max", "sum", "mean")


class LayeredClassifier(nn.Module):
    """Binary classifier as an indexable stack of blocks; emits one logit."""

    def __init__(self, blocks):
        super().__init__()
        self.blocks = nn.ModuleList(blocks)

    @property
    def depth(self) -> int:
        return len(self.blocks)

    def forward_range(self, x: torch.Tensor, lo: int, hi: int) -> torch.Tensor:
        for block in self.blocks[lo:hi]:
            x = block(x)
        return x

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.forward_range(x, 0, self.depth).squeeze(-1)


def _conv(cin: int, cout: int) -> nn.Module:
    return nn.Sequential(nn.Conv2d(cin, cout, 3, padding=1), nn.ReLU())


def digits_classifier(seed: int | None = None) -> LayeredClassifier:
    """Small convnet for 1x8x8 inputs; 10 blocks so a 20% split is block 2.

    Weight initialization is drawn from ``seed`` when given, so a full
    train-and-measure run is reproducible end to end.
    """
    if seed is not None:
        torch.manual_seed(seed)
    return LayeredClassifier([
        _conv(1, 16),
        _conv(16, 16),
        nn.MaxPool2d(2),
        _conv(16, 32),
        _conv(32, 32),
        nn.MaxPool2d(2),
        _conv(32, 64),
        _conv(64, 64),
        nn.Sequential(nn.AdaptiveAvgPool2d(1), nn.Flatten()),
        nn.Linear(64, 1),
    ])


def merge_pixels(samples) -> torch.Tensor:
    """Elementwise mean of equally shaped samples (the pixel-space merge)."""
    if isinstance(samples, torch.Tensor):
        stacked = samples
    else:
        samples = list(samples)
        if not samples:
            raise ValueError("need at least one sample to merge")
        shapes = {tuple(s.shape) for s in samples}
        if len(shapes) > 1:
            raise ValueError(f"samples have mismatched shapes: {sorted(shapes)}")
        stacked = torch.stack(samples)
    return stacked.mean(dim=0)


@dataclass(frozen=True)
class GroupNetworkSpec:
    """How to turn the individual classifier into a set classifier."""

    base: LayeredClassifier
    kind: str
    group_size: int
    split_index: int | None = None
    level_boundaries: tuple[int, ...] | None = None
    fanouts: tuple[int, ...] | None = None
    aggregation: str = "max"

    def __post_init__(self):
        if self.kind not in (PIXEL_MERGE, FEATURE_MERGE, TREE_MERGE):
            raise ValueError(f"unknown design kind {self.kind!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if self.group_size < 1:
            raise ValueError("group_size must be >= 1")
        depth = self.base.depth
        if self.kind == FEATURE_MERGE:
            if self.split_index is None or not 0 <= self.split_index <= depth:
                raise ValueError(f"split index must lie in 0..{depth}")
        if self.kind == TREE_MERGE:
            bounds = tuple(self.level_boundaries or ())
            if not bounds:
                raise ValueError("tree_merge needs level boundaries")
            if list(bounds) != sorted(set(bounds)) or bounds[-1] > depth:
                raise ValueError(f"boundaries must ascend within 0..{depth}")
            fanouts = tuple(self.fanouts or (2,) * len(bounds))
            if len(fanouts) != len(bounds):
                raise ValueError("need one fan-out per boundary")
            if math.prod(fanouts) != self.group_size:
                raise ValueError(
                    f"tree capacity {math.prod(fanouts)} != group size {self.group_size}"
                )
            object.__setattr__(self, "level_boundaries", bounds)
            object.__setattr__(self, "fanouts", fanouts)


def _aggregate(stacked: torch.Tensor, op: str) -> torch.Tensor:
    # stacked: (batch, set, ...) -> (batch, ...)
    if op == "max":
        return stacked.amax(dim=1)
    if op == "sum":
        return stacked.sum(dim=1)
    return stacked.mean(dim=1)


class GroupNetwork(nn.Module):
    """Set classifier: (batch, m, C, H, W) -> (batch,) logit.

    Parameters are initialized as a copy of the individual classifier's, so
    the counts match exactly and fine-tuning the group network leaves the
    individual network untouched.  Accepts any 1 <= m <= group_size; tree
    levels with a single live node pass it through unmerged.
    """

    def __init__(self, spec: GroupNetworkSpec):
        super().__init__()
        self.spec = spec
        self.base = copy.deepcopy(spec.base)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 5:
            raise ValueError("expected (batch, set, C, H, W) input")
        m = x.shape[1]
        if not 1 <= m <= self.spec.group_size:
            raise ValueError(f"set size {m} outside 1..{self.spec.group_size}")
        if self.spec.kind == PIXEL_MERGE:
            return self.base(x.mean(dim=1))
        if self.spec.kind == FEATURE_MERGE:
            return self._forward_feature(x)
        return self._forward_tree(x)

    def _forward_feature(self, x: torch.Tensor) -> torch.Tensor:
        batch, m = x.shape[:2]
        t, depth = self.spec.split_index, self.base.depth
        flat = x.reshape(batch * m, *x.shape[2:])
        feats = self.base.forward_range(flat, 0, t)
        feats = feats.reshape(batch, m, *feats.shape[1:])
        merged = _aggregate(feats, self.spec.aggregation)
        return self.base.forward_range(merged, t, depth).squeeze(-1)

    def _forward_tree(self, x: torch.Tensor) -> torch.Tensor:
        bounds = self.spec.level_boundaries
        nodes = [x[:, j] for j in range(x.shape[1])]
        lo = 0
        for boundary, fanout in zip(bounds, self.spec.fanouts):
            nodes = [self.base.forward_range(n, lo, boundary) for n in nodes]
            nodes = [
                _aggregate(torch.stack(nodes[i : i + fanout], dim=1),
                           self.spec.aggregation)
                for i in range(0, len(nodes), fanout)
            ]
            lo = boundary
        assert len(nodes) == 1
        return self.base.forward_range(nodes[0], lo, self.base.depth).squeeze(-1)


def build_group_network(spec: GroupNetworkSpec) -> GroupNetwork:
    """Group network sharing every parameter with ``spec.base``."""
    return GroupNetwork(spec)


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
