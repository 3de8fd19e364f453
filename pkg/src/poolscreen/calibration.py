"""Bundled reference benchmark and the calibration fits derived from it.

The engine ships one reference benchmark: a published measurement set for a
ResNeXt-101 image-moderation deployment screening N = 48,800 samples at 0.1%
prevalence, covering individual testing and the three merge designs under
the three schedulers.  Everything the bundled profiles contain is derived
from those rows:

* ``C``: per-pass cost of the unmodified network, from the individual row
  (exact integer division of total MACs by test count).
* leaf MAC fraction ``a``: single scalar fitted by least squares to the four
  two-round feature-merge rows; the feature split is placed at layer index
  0.2 * depth, so the bundled profile makes "20% of the layers" hold
  ``a`` = 22.14% of the MACs.
* group error rates: per-size specificity solving each two-round row's
  retest count as true-positive groups plus Bernoulli false positives;
  sensitivity comes from the row's recall column.
* tree level boundaries: the tree rows are not explained by any single
  size-independent boundary rule, so per-size boundary sets are fitted
  (evenly spaced levels scaled to match each row's implied group cost) and
  shipped as named presets next to the unfitted "even" rule.

The synthetic per-layer costs are shaped so every calibrated boundary lands
exactly on a layer edge, keeping all downstream identities exact in integer
arithmetic.  Regenerate the bundled data files with
``python -m poolscreen.calibration``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .cost_model import (
    CostProfile,
    even_tree_boundaries,
    load_cost_profile,
    save_cost_profile,
)
from .errors import ProfileError
from .oracle import OracleProfile, load_profile, save_profile

REFERENCE_N = 48_800
REFERENCE_PREVALENCE = 0.001

ALG_TWO_ROUND = "two_round"
ALG_MULTI_ROUND = "multi_round"
ALG_ONE_ROUND = "one_round_double_pool"

DATA_DIR = Path(__file__).parent / "data"
CONFIG_DIR = DATA_DIR / "configs"
COST_PROFILE_NAME = "resnext101-calibrated"


@dataclass(frozen=True)
class ReferenceRow:
    """One benchmark row.  ``tmac_tenths`` keeps the reported total exact."""

    key: str
    algorithm: str
    design: int | None
    group_size: int
    recall: float
    false_positive_rate: float
    tests_first_round: int
    tests_total: int
    tmac_tenths: int
    relative_pct: float

    @property
    def total_macs_reported(self) -> int:
        return self.tmac_tenths * 10**11

    @property
    def tmac(self) -> float:
        return self.tmac_tenths / 10.0


REFERENCE_ROWS: tuple[ReferenceRow, ...] = (
    ReferenceRow("individual", ALG_TWO_ROUND, None, 1, 1.00, 0.0018, 48800, 48800, 8052, 100.00),
    ReferenceRow("alg1_d1_m2", ALG_TWO_ROUND, 1, 2, 0.92, 0.0008, 24400, 27394, 4520, 56.14),
    ReferenceRow("alg1_d1_m4", ALG_TWO_ROUND, 1, 4, 0.64, 0.0007, 12200, 18864, 3113, 38.66),
    ReferenceRow("alg1_d2_m2", ALG_TWO_ROUND, 2, 2, 1.00, 0.0002, 24400, 24634, 4958, 61.57),
    ReferenceRow("alg1_d2_m4", ALG_TWO_ROUND, 2, 4, 1.00, 0.0003, 12200, 12980, 3479, 43.20),
    ReferenceRow("alg1_d2_m8", ALG_TWO_ROUND, 2, 8, 1.00, 0.0004, 6100, 8356, 2938, 36.49),
    ReferenceRow("alg1_d2_m16", ALG_TWO_ROUND, 2, 16, 1.00, 0.0007, 3050, 9338, 3211, 39.88),
    ReferenceRow("alg1_d3_m4", ALG_TWO_ROUND, 3, 4, 1.00, 0.0003, 12200, 12908, 2929, 36.38),
    ReferenceRow("alg1_d3_m8", ALG_TWO_ROUND, 3, 8, 1.00, 0.0005, 6100, 9308, 2558, 31.76),
    ReferenceRow("alg1_d3_m16", ALG_TWO_ROUND, 3, 16, 1.00, 0.0008, 3050, 15626, 3711, 46.09),
    ReferenceRow("alg2_d2_m8", ALG_MULTI_ROUND, 2, 8, 1.00, 0.0001, 6100, 7392, 2738, 34.00),
    ReferenceRow("alg2_d2_m16", ALG_MULTI_ROUND, 2, 16, 1.00, 0.0002, 3050, 5130, 2460, 30.55),
    ReferenceRow("alg2_d3_m8", ALG_MULTI_ROUND, 3, 8, 1.00, 0.0001, 6100, 7844, 2258, 28.04),
    ReferenceRow("alg2_d3_m16", ALG_MULTI_ROUND, 3, 16, 1.00, 0.0002, 3050, 6726, 2128, 26.43),
    ReferenceRow("alg3_d3_m4", ALG_ONE_ROUND, 3, 4, 1.00, 0.0011, 24400, 24400, 4918, 61.08),
)


def reference_row(key: str) -> ReferenceRow:
    for row in REFERENCE_ROWS:
        if row.key == key:
            return row
    raise KeyError(f"no reference row {key!r}")


def individual_mac_cost() -> int:
    """Per-pass cost C of the unmodified network, exact in MAC units."""
    row = reference_row("individual")
    macs, rem = divmod(row.total_macs_reported, row.tests_total)
    if rem:
        raise AssertionError("individual row does not divide to integer MACs")
    return macs


def hit_probability(prevalence: float, size: int) -> float:
    """Chance a uniformly drawn group of ``size`` holds >= 1 positive."""
    return 1.0 - (1.0 - prevalence) ** size


def fit_leaf_fraction() -> float:
    """Least-squares leaf MAC fraction over the two-round feature-merge rows.

    Each row's total is linear in the fraction a:
    total = C * (G * (1 + (M-1) a) + R), so the fit is closed-form.
    """
    c = individual_mac_cost()
    num = 0.0
    den = 0.0
    for row in REFERENCE_ROWS:
        if row.design != 2 or row.algorithm != ALG_TWO_ROUND:
            continue
        g, r = row.tests_first_round, row.tests_total - row.tests_first_round
        x = c * g * (row.group_size - 1)
        y = row.total_macs_reported - c * (g + r)
        num += x * y
        den += x * x
    return num / den


def fit_error_rates(design: int) -> dict[int, tuple[float, float]]:
    """Per-size (sensitivity, specificity) solving the two-round rows.

    Sensitivity is the row's recall (the individual round is error-free on
    positives, so overall recall equals the group-level hit rate).  Retested
    groups = sensitivity * expected true-positive groups + false positives,
    which pins the group false-positive rate.
    """
    row = reference_row("individual")
    rates: dict[int, tuple[float, float]] = {
        1: (row.recall, 1.0 - row.false_positive_rate)
    }
    for row in REFERENCE_ROWS:
        if row.design != design or row.algorithm != ALG_TWO_ROUND:
            continue
        g = row.tests_first_round
        flagged_groups = (row.tests_total - g) / row.group_size
        true_pos = g * hit_probability(REFERENCE_PREVALENCE, row.group_size)
        fpr = (flagged_groups - row.recall * true_pos) / (g - true_pos)
        rates[row.group_size] = (row.recall, 1.0 - fpr)
    return rates


def implied_group_cost(row: ReferenceRow) -> float:
    """Group-test cost in units of C implied by a two-round row's total."""
    c = individual_mac_cost()
    retests = row.tests_total - row.tests_first_round
    return (row.total_macs_reported / c - retests) / row.tests_first_round


def fit_tree_beta(group_size: int) -> float:
    """Last-boundary MAC fraction for evenly spaced tree levels matching the
    two-round tree row for ``group_size``.

    With levels at fractions beta * (i+1)/k the group cost is
    (1 + beta * ((2M - 2) / k - 1)) * C, linear in beta.
    """
    row = reference_row(f"alg1_d3_m{group_size}")
    levels = round(math.log2(group_size))
    slope = (2 * group_size - 2) / levels - 1
    return (implied_group_cost(row) - 1.0) / slope


def tree_fraction_targets(group_size: int) -> list[float]:
    beta = fit_tree_beta(group_size)
    levels = round(math.log2(group_size))
    return [beta * (i + 1) / levels for i in range(levels)]


def _spread(total: int, parts: int) -> list[int]:
    # Integer costs summing exactly to ``total``; remainder on the last part.
    base, rem = divmod(total, parts)
    return [base] * (parts - 1) + [base + rem]


def _segment_layers(knots: list[int], n_layers: int) -> list[int]:
    """Layer costs for one block: ``knots`` are cumulative MAC targets that
    must land exactly on layer edges; segments get layers proportional to
    their MAC share (at least one each, largest remainder)."""
    segments = [hi - lo for lo, hi in zip([0, *knots[:-1]], knots)]
    shares = [seg / knots[-1] * n_layers for seg in segments]
    alloc = [max(1, math.floor(s)) for s in shares]
    order = sorted(range(len(shares)), key=lambda i: shares[i] - math.floor(shares[i]),
                   reverse=True)
    i = 0
    while sum(alloc) < n_layers:
        alloc[order[i % len(order)]] += 1
        i += 1
    while sum(alloc) > n_layers:  # minimum-one floor can over-allocate
        j = max(range(len(alloc)), key=lambda idx: (alloc[idx], -idx))
        alloc[j] -= 1
    costs: list[int] = []
    for seg, n in zip(segments, alloc):
        costs.extend(_spread(seg, n))
    return costs


def build_cost_profile() -> CostProfile:
    """Construct the bundled calibrated cost profile.

    Depth 101, feature split at layer 20 (0.2 of the depth) holding the
    fitted leaf fraction of the MACs; all fitted tree boundaries fall on
    layer edges so preset pricing is exact.
    """
    c = individual_mac_cost()
    a = fit_leaf_fraction()
    leaf_index, depth = 20, 101

    fraction_targets = {f for m in (4, 8, 16) for f in tree_fraction_targets(m)}
    fraction_targets.add(a / 2)  # first even level for the 4-sample tree
    leaf_knots = sorted(round(f * c) for f in fraction_targets if f < a)
    trunk_knots = sorted(round(f * c) for f in fraction_targets if f > a)

    split_mac = round(a * c)
    layer_costs = _segment_layers([*leaf_knots, split_mac], leaf_index)
    trunk = _segment_layers(
        [k - split_mac for k in trunk_knots] + [c - split_mac], depth - leaf_index
    )
    layer_costs.extend(trunk)

    profile = CostProfile(layer_costs=tuple(layer_costs))
    presets: dict[str, tuple[int, ...]] = {"feature_split": (leaf_index,)}
    for m in (4, 8, 16):
        presets[f"tree_m{m}_fitted"] = tuple(
            profile.index_for_fraction(f) for f in tree_fraction_targets(m)
        )
        presets[f"tree_m{m}_even"] = even_tree_boundaries(profile, m, leaf_index)
    return CostProfile(
        layer_costs=tuple(layer_costs),
        name=COST_PROFILE_NAME,
        boundary_presets=presets,
        notes=(
            "Synthetic per-layer MAC costs calibrated to the bundled reference "
            "benchmark (ResNeXt-101 image-moderation deployment, N=48800, "
            "prevalence 0.1%). Total C = {c} MACs from the individual row; the "
            "feature split at layer 20 of 101 (20% of the depth) holds the "
            "fitted {a:.4f} of the MACs. tree_m*_fitted presets scale evenly "
            "spaced levels to match each two-round tree row; tree_m*_even "
            "presets follow the unfitted even-spacing rule."
        ).format(c=c, a=a),
    )


def build_oracle_profile(design: int) -> OracleProfile:
    """Bundled oracle calibration for one merge design."""
    rates = fit_error_rates(design)
    return OracleProfile(
        entries=rates,
        design={1: "pixel_merge", 2: "feature_merge", 3: "tree_merge"}[design],
        notes=(
            "Fitted from the bundled reference benchmark: sensitivity is the "
            "row recall; specificity solves the row's retest count as "
            "true-positive groups plus Bernoulli(0.001) false positives. "
            "Size-1 rates come from the individual-testing row."
        ),
    )


def _design_config(row: ReferenceRow) -> dict:
    if row.design in (None, 1):
        return {"kind": "pixel_merge"}
    if row.design == 2:
        return {"kind": "feature_merge", "preset": "feature_split"}
    variant = "even" if row.algorithm == ALG_ONE_ROUND else "fitted"
    return {"kind": "tree_merge", "preset": f"tree_m{row.group_size}_{variant}"}


def build_reference_configs() -> dict[str, dict]:
    """Experiment configs reproducing each benchmark row, plus a sweep config."""
    configs: dict[str, dict] = {}
    for row in REFERENCE_ROWS:
        name = f"reference_{row.key}"
        configs[name] = {
            "version": 1,
            "name": name,
            "n": REFERENCE_N,
            "prevalence": REFERENCE_PREVALENCE,
            "population_mode": "fixed_count",
            "group_size": row.group_size,
            "algorithm": row.algorithm,
            "split_factor": 2,
            "use_cache": True,
            "design": _design_config(row),
            "oracle_profile": f"design{row.design}" if row.design else "design2",
            "cost_profile": COST_PROFILE_NAME,
            "trials": 20,
        }
    sweep = dict(configs["reference_alg2_d3_m8"])
    sweep.update(name="sweep_alg2_d3_m8", trials=5)
    configs["sweep_alg2_d3_m8"] = sweep
    return configs


def bundled_cost_profile(name: str = COST_PROFILE_NAME) -> CostProfile:
    return load_cost_profile(DATA_DIR / f"{name}.json")


def bundled_oracle_profile(name: str) -> OracleProfile:
    path = DATA_DIR / f"oracle-{name}.json"
    if not path.exists():
        raise ProfileError(f"no bundled oracle profile {name!r}")
    return load_profile(path)


def write_bundled(data_dir: Path | None = None) -> list[Path]:
    """Regenerate every bundled data file; returns the paths written."""
    data_dir = Path(data_dir or DATA_DIR)
    config_dir = data_dir / "configs"
    config_dir.mkdir(parents=True, exist_ok=True)
    written = []

    path = data_dir / f"{COST_PROFILE_NAME}.json"
    save_cost_profile(build_cost_profile(), path)
    written.append(path)

    for design in (1, 2, 3):
        path = data_dir / f"oracle-design{design}.json"
        save_profile(build_oracle_profile(design), path)
        written.append(path)

    for name, config in build_reference_configs().items():
        path = config_dir / f"{name}.json"
        path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
        written.append(path)
    return written


if __name__ == "__main__":
    for p in write_bundled():
        print(p)
