"""Prices every forward pass in integer MAC units under the three designs.

Designs, for a network of layers 1..L with per-layer costs c_i:

* ``pixel_merge``: samples are averaged before layer 1, so one test runs the
  whole network once and costs C = sum(c_i) regardless of group size.
* ``feature_merge``: layers 1..T run once per sample, features are pooled at
  T, layers T+1..L run once.  A group of m samples costs
  m * sum(c_i, i<=T) + sum(c_i, i>T).
* ``tree_merge``: samples are pooled pairwise (or by fan-out) at successive
  boundaries T_0 < T_1 < ..., so the segment below T_0 runs per sample, the
  segment (T_0, T_1] once per surviving node, and so on; the trunk past the
  last boundary runs once.  A single boundary reduces to feature_merge, and
  T = 0 reduces feature_merge to pixel_merge.

All accounting is in exact integer MACs.  Feature caching credits samples
whose below-first-boundary features were checkpointed by an earlier test in
the same run.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ProfileError

PIXEL_MERGE = "pixel_merge"
FEATURE_MERGE = "feature_merge"
TREE_MERGE = "tree_merge"
DESIGN_KINDS = (PIXEL_MERGE, FEATURE_MERGE, TREE_MERGE)

COST_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CostProfile:
    """Per-layer compute costs (MAC units) plus named boundary presets."""

    layer_costs: tuple[int, ...]
    name: str = ""
    boundary_presets: dict[str, tuple[int, ...]] | None = None
    notes: str = ""

    def __post_init__(self):
        costs = tuple(int(c) for c in self.layer_costs)
        if len(costs) < 1:
            raise ProfileError("layer_costs: need at least one layer")
        if any(c < 0 for c in costs):
            raise ProfileError("layer_costs: costs must be nonnegative")
        if sum(costs) <= 0:
            raise ProfileError("layer_costs: total cost must be positive")
        object.__setattr__(self, "layer_costs", costs)
        object.__setattr__(
            self, "_cumulative", (0, *itertools.accumulate(costs))
        )
        presets = {}
        for key, indices in (self.boundary_presets or {}).items():
            indices = tuple(int(i) for i in indices)
            if list(indices) != sorted(set(indices)):
                raise ProfileError(f"boundary_presets[{key!r}]: indices must be strictly ascending")
            if indices and not 0 <= indices[0] <= indices[-1] <= len(costs):
                raise ProfileError(f"boundary_presets[{key!r}]: indices outside 0..{len(costs)}")
            presets[str(key)] = indices
        object.__setattr__(self, "boundary_presets", presets)

    @property
    def depth(self) -> int:
        return len(self.layer_costs)

    @property
    def total(self) -> int:
        return self._cumulative[-1]

    def cumulative(self, index: int) -> int:
        """MACs spent by layers 1..index (index 0 -> 0)."""
        if not 0 <= index <= self.depth:
            raise ValueError(f"layer index {index} outside 0..{self.depth}")
        return self._cumulative[index]

    def segment(self, lo: int, hi: int) -> int:
        """MACs spent by layers lo+1..hi."""
        return self.cumulative(hi) - self.cumulative(lo)

    def index_for_fraction(self, fraction: float) -> int:
        """Layer index whose cumulative MAC share is closest to ``fraction``."""
        target = fraction * self.total
        return min(range(self.depth + 1), key=lambda i: (abs(self._cumulative[i] - target), i))

    def preset(self, key: str) -> tuple[int, ...]:
        try:
            return self.boundary_presets[key]
        except KeyError:
            raise ProfileError(f"boundary preset {key!r} not in profile {self.name!r}") from None


@dataclass(frozen=True)
class DesignSpec:
    """How a group of up to ``group_size`` samples is merged in the network."""

    kind: str
    group_size: int
    split_index: int | None = None
    level_boundaries: tuple[int, ...] | None = None
    fanouts: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise ValueError(f"unknown design kind {self.kind!r}")
        if self.group_size < 1:
            raise ValueError("group_size must be >= 1")
        if self.kind == FEATURE_MERGE:
            if self.split_index is None or self.split_index < 0:
                raise ValueError("feature_merge needs split_index >= 0")
        if self.kind == TREE_MERGE:
            bounds = tuple(int(b) for b in self.level_boundaries or ())
            if not bounds and self.group_size > 1:
                raise ValueError("tree_merge needs at least one level boundary")
            if list(bounds) != sorted(set(bounds)):
                raise ValueError("tree boundaries must be strictly ascending")
            fanouts = tuple(int(f) for f in self.fanouts or (2,) * len(bounds))
            if len(fanouts) != len(bounds):
                raise ValueError("need one fan-out per level boundary")
            if any(f < 2 for f in fanouts):
                raise ValueError("fan-outs must be >= 2")
            capacity = math.prod(fanouts)
            if capacity != self.group_size and self.group_size > 1:
                raise ValueError(
                    f"tree capacity {capacity} != group_size {self.group_size}"
                )
            object.__setattr__(self, "level_boundaries", bounds)
            object.__setattr__(self, "fanouts", fanouts)

    @classmethod
    def pixel(cls, group_size: int) -> "DesignSpec":
        return cls(kind=PIXEL_MERGE, group_size=group_size)

    @classmethod
    def feature(cls, group_size: int, split_index: int) -> "DesignSpec":
        return cls(kind=FEATURE_MERGE, group_size=group_size, split_index=split_index)

    @classmethod
    def tree(
        cls, group_size: int, boundaries, fanouts=None
    ) -> "DesignSpec":
        return cls(
            kind=TREE_MERGE,
            group_size=group_size,
            level_boundaries=tuple(boundaries),
            fanouts=tuple(fanouts) if fanouts is not None else None,
        )

    @property
    def first_checkpoint(self) -> int | None:
        """Layer index of the per-sample feature checkpoint, if any."""
        if self.kind == FEATURE_MERGE and self.split_index:
            return self.split_index
        if self.kind == TREE_MERGE and self.level_boundaries:
            return self.level_boundaries[0]
        return None


class CacheState:
    """(sample id, layer index) feature checkpoints computed so far in a run.

    Owned and mutated by a single run's scheduler; pricing only reads it.
    """

    def __init__(self, entries=()):
        self._entries: set[tuple[int, int]] = set(entries)

    def __contains__(self, entry: tuple[int, int]) -> bool:
        return entry in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def add(self, entries) -> None:
        self._entries.update(entries)


@dataclass(frozen=True)
class GroupCost:
    """Price of one group test plus its cache bookkeeping."""

    macs: int
    cache_hits: tuple[bool, ...]
    new_checkpoints: tuple[tuple[int, int], ...]


def individual_cost(profile: CostProfile) -> int:
    """Cost of one unmodified forward pass: the full layer sum C."""
    return profile.total


def _tree_node_counts(n_members: int, fanouts: tuple[int, ...]) -> list[int]:
    # Empty branches are pruned: a node with one live child passes it
    # through at that child's segment cost.
    counts = [n_members]
    for fanout in fanouts[:-1]:
        counts.append(math.ceil(counts[-1] / fanout))
    return counts


def group_test_cost(
    design: DesignSpec, profile: CostProfile, cache: CacheState, members
) -> GroupCost:
    """Price one group forward pass under ``design``.

    Members whose first-boundary features are already checkpointed contribute
    nothing below that boundary; the result reports which checkpoints a cold
    member would newly create (committing them is the scheduler's job).
    """
    members = tuple(int(m) for m in members)
    if not members:
        raise ValueError("group test needs at least one member")
    if len(members) > design.group_size:
        raise ValueError(
            f"{len(members)} members exceed design capacity {design.group_size}"
        )
    if design.kind == PIXEL_MERGE:
        return GroupCost(
            macs=profile.total,
            cache_hits=(False,) * len(members),
            new_checkpoints=(),
        )

    checkpoint = design.first_checkpoint
    if checkpoint is None:
        hits = (False,) * len(members)
        cold = members
    else:
        if checkpoint > profile.depth:
            raise ValueError(
                f"boundary {checkpoint} deeper than profile depth {profile.depth}"
            )
        hits = tuple((m, checkpoint) in cache for m in members)
        cold = tuple(m for m, hit in zip(members, hits) if not hit)

    if design.kind == FEATURE_MERGE:
        t = design.split_index
        if t > profile.depth:
            raise ValueError(f"split index {t} deeper than profile depth {profile.depth}")
        macs = len(cold) * profile.cumulative(t) + profile.segment(t, profile.depth)
    else:
        bounds = design.level_boundaries
        if bounds and bounds[-1] > profile.depth:
            raise ValueError(
                f"boundary {bounds[-1]} deeper than profile depth {profile.depth}"
            )
        counts = _tree_node_counts(len(members), design.fanouts or ())
        macs = len(cold) * profile.cumulative(bounds[0]) if bounds else 0
        for level in range(1, len(bounds)):
            macs += counts[level] * profile.segment(bounds[level - 1], bounds[level])
        macs += profile.segment(bounds[-1] if bounds else 0, profile.depth)

    new = tuple((m, checkpoint) for m in cold) if checkpoint is not None else ()
    return GroupCost(macs=macs, cache_hits=hits, new_checkpoints=new)


def boundary_fractions(profile: CostProfile, indices) -> tuple[float, ...]:
    """Cumulative MAC share at each layer index (maps depth specs to cost specs)."""
    indices = tuple(int(i) for i in indices)
    if list(indices) != sorted(indices):
        raise ValueError("indices must be ascending")
    return tuple(profile.cumulative(i) / profile.total for i in indices)


def even_tree_boundaries(
    profile: CostProfile, group_size: int, leaf_index: int, fanout: int = 2
) -> tuple[int, ...]:
    """Default tree levels: evenly spaced by MAC fraction within the leaf
    segment ending at ``leaf_index``, one level per fan-out step."""
    levels = round(math.log(group_size, fanout))
    if fanout**levels != group_size:
        raise ValueError(f"group size {group_size} is not a power of fan-out {fanout}")
    leaf_fraction = profile.cumulative(leaf_index) / profile.total
    targets = [leaf_fraction * (i + 1) / levels for i in range(levels)]
    bounds = tuple(profile.index_for_fraction(f) for f in targets)
    if list(bounds) != sorted(set(bounds)):
        raise ValueError("profile too coarse for distinct level boundaries")
    return bounds


def save_cost_profile(profile: CostProfile, path) -> None:
    doc = {
        "version": COST_SCHEMA_VERSION,
        "name": profile.name,
        "layer_costs": list(profile.layer_costs),
        "boundary_presets": {k: list(v) for k, v in sorted(profile.boundary_presets.items())},
        "notes": profile.notes,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_cost_profile(path) -> CostProfile:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ProfileError(f"{path}: not valid JSON ({exc})") from exc
    return cost_profile_from_dict(doc, source=str(path))


def cost_profile_from_dict(doc: dict, source: str = "cost profile") -> CostProfile:
    if not isinstance(doc, dict):
        raise ProfileError(f"{source}: document must be an object")
    if doc.get("version") != COST_SCHEMA_VERSION:
        raise ProfileError(f"{source}: version: expected {COST_SCHEMA_VERSION}")
    costs = doc.get("layer_costs")
    if not isinstance(costs, list) or not costs:
        raise ProfileError(f"{source}: layer_costs: expected a non-empty list")
    for i, c in enumerate(costs):
        if not isinstance(c, int) or c < 0:
            raise ProfileError(f"{source}: layer_costs[{i}]: {c!r} is not a nonnegative integer")
    presets = doc.get("boundary_presets", {})
    if not isinstance(presets, dict):
        raise ProfileError(f"{source}: boundary_presets: expected an object")
    try:
        return CostProfile(
            layer_costs=tuple(costs),
            name=str(doc.get("name", "")),
            boundary_presets={str(k): tuple(v) for k, v in presets.items()},
            notes=str(doc.get("notes", "")),
        )
    except ProfileError as exc:
        raise ProfileError(f"{source}: {exc}") from None
