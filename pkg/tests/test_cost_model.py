import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from poolscreen.cost_model import (
    CacheState,
    CostProfile,
    DesignSpec,
    boundary_fractions,
    even_tree_boundaries,
    group_test_cost,
    individual_cost,
    load_cost_profile,
    save_cost_profile,
)
from poolscreen.errors import ProfileError

UNIFORM = CostProfile(layer_costs=(10,) * 100)


def cost(design, profile, members, cache=None):
    return group_test_cost(design, profile, cache or CacheState(), members).macs


layer_costs = st.lists(st.integers(min_value=0, max_value=10**6), min_size=2, max_size=40).filter(
    lambda cs: sum(cs) > 0
)


class TestIndividualCost:
    def test_calibrated_profile_is_16_5_gmac(self, cost_profile):
        assert individual_cost(cost_profile) == 16_500_000_000

    def test_single_layer(self):
        assert individual_cost(CostProfile(layer_costs=(7,))) == 7

    def test_reference_individual_total(self, cost_profile):
        assert 48800 * individual_cost(cost_profile) == 805_200_000_000_000


class TestPixelMerge:
    @pytest.mark.parametrize("m", [1, 2, 4, 16])
    def test_cost_is_always_full_network(self, m, cost_profile):
        design = DesignSpec.pixel(m)
        assert cost(design, cost_profile, range(m)) == cost_profile.total

    def test_no_checkpoints(self):
        price = group_test_cost(DesignSpec.pixel(4), UNIFORM, CacheState(), range(4))
        assert price.new_checkpoints == ()


class TestFeatureMerge:
    def test_leaf_runs_per_sample_trunk_once(self):
        design = DesignSpec.feature(4, split_index=20)
        assert cost(design, UNIFORM, range(4)) == 4 * 200 + 800

    def test_split_at_zero_degenerates_to_pixel_merge(self):
        for m in (1, 2, 8):
            design = DesignSpec.feature(m, split_index=0)
            assert cost(design, UNIFORM, range(m)) == UNIFORM.total

    def test_single_member_costs_full_network(self, cost_profile):
        design = DesignSpec.feature(1, split_index=20)
        assert cost(design, cost_profile, [0]) == individual_cost(cost_profile)

    def test_strictly_increasing_in_member_count(self, cost_profile):
        design = DesignSpec.feature(16, split_index=20)
        costs = [cost(design, cost_profile, range(m)) for m in range(1, 17)]
        assert all(a < b for a, b in zip(costs, costs[1:]))

    def test_per_sample_cost_bounds_and_amortization(self, cost_profile):
        # Per-sample cost stays in (trunk/m, C] and decreases with m.
        t = 20
        trunk = cost_profile.total - cost_profile.cumulative(t)
        per_sample = []
        for m in range(1, 17):
            design = DesignSpec.feature(16, split_index=t)
            total = cost(design, cost_profile, range(m))
            per_sample.append(total / m)
            assert trunk / m < per_sample[-1] <= cost_profile.total
        assert all(a > b for a, b in zip(per_sample, per_sample[1:]))

    def test_rejects_members_over_capacity(self):
        design = DesignSpec.feature(2, split_index=10)
        with pytest.raises(ValueError, match="capacity"):
            cost(design, UNIFORM, range(3))

    def test_rejects_split_beyond_depth(self):
        design = DesignSpec.feature(2, split_index=101)
        with pytest.raises(ValueError, match="depth"):
            cost(design, UNIFORM, range(2))


class TestTreeMerge:
    def test_binary_tree_node_counts(self):
        # 8 leaves, then 4 and 2 transformed nodes, then the trunk once.
        design = DesignSpec.tree(8, boundaries=(10, 20, 30))
        expected = 8 * 100 + 4 * 100 + 2 * 100 + 700
        assert cost(design, UNIFORM, range(8)) == expected

    def test_partial_group_prunes_empty_branches(self):
        design = DesignSpec.tree(8, boundaries=(10, 20, 30))
        expected = 5 * 100 + 3 * 100 + 2 * 100 + 700
        assert cost(design, UNIFORM, range(5)) == expected

    def test_single_level_tree_equals_feature_merge_exactly(self, cost_profile):
        for m in (2, 4, 8, 16):
            tree = DesignSpec.tree(m, boundaries=(20,), fanouts=(m,))
            feat = DesignSpec.feature(m, split_index=20)
            for size in range(1, m + 1):
                assert cost(tree, cost_profile, range(size)) == cost(
                    feat, cost_profile, range(size)
                )

    def test_tree_with_no_boundaries_is_individual(self, cost_profile):
        design = DesignSpec.tree(1, boundaries=())
        assert cost(design, cost_profile, [3]) == individual_cost(cost_profile)

    def test_mixed_fanouts(self):
        # 12 = 3 * 4: 12 leaves, then 4 nodes, then trunk.
        design = DesignSpec.tree(12, boundaries=(10, 20), fanouts=(3, 4))
        assert cost(design, UNIFORM, range(12)) == 12 * 100 + 4 * 100 + 800

    def test_rejects_capacity_mismatch(self):
        with pytest.raises(ValueError, match="capacity"):
            DesignSpec.tree(8, boundaries=(10, 20))  # 2*2 != 8

    def test_rejects_unsorted_boundaries(self):
        with pytest.raises(ValueError, match="ascending"):
            DesignSpec.tree(4, boundaries=(20, 10))

    def test_rejects_boundary_beyond_depth(self):
        design = DesignSpec.tree(4, boundaries=(10, 200))
        with pytest.raises(ValueError, match="depth"):
            cost(design, UNIFORM, range(4))


class TestCache:
    def test_warm_members_skip_leaf_segment(self, cost_profile):
        design = DesignSpec.feature(8, split_index=20)
        leaf = cost_profile.cumulative(20)
        cache = CacheState([(0, 20), (1, 20)])
        price = group_test_cost(design, cost_profile, cache, range(8))
        cold = cost(design, cost_profile, range(8))
        assert cold - price.macs == 2 * leaf
        assert price.cache_hits == (True, True) + (False,) * 6

    def test_new_checkpoints_report_cold_members_only(self):
        design = DesignSpec.feature(4, split_index=10)
        cache = CacheState([(2, 10)])
        price = group_test_cost(design, UNIFORM, cache, [1, 2, 3])
        assert price.new_checkpoints == ((1, 10), (3, 10))

    def test_pricing_does_not_mutate_cache(self):
        design = DesignSpec.feature(4, split_index=10)
        cache = CacheState()
        group_test_cost(design, UNIFORM, cache, range(4))
        assert len(cache) == 0

    def test_tree_cache_uses_first_boundary(self, cost_profile):
        design = DesignSpec.tree(8, boundaries=cost_profile.preset("tree_m8_fitted"))
        first = design.level_boundaries[0]
        cold = group_test_cost(design, cost_profile, CacheState(), range(8))
        assert set(cold.new_checkpoints) == {(m, first) for m in range(8)}
        warm = group_test_cost(
            design, cost_profile, CacheState(cold.new_checkpoints), range(8)
        )
        assert cold.macs - warm.macs == 8 * cost_profile.cumulative(first)

    @given(costs=layer_costs, warm=st.sets(st.integers(min_value=0, max_value=7)))
    def test_cold_minus_warm_accounting_identity(self, costs, warm):
        profile = CostProfile(layer_costs=tuple(costs))
        split = len(costs) // 2
        design = DesignSpec.feature(8, split_index=split)
        cache = CacheState((m, split) for m in warm)
        cold_macs = cost(design, profile, range(8))
        warm_macs = cost(design, profile, range(8), cache)
        if split == 0:
            assert warm_macs == cold_macs
        else:
            assert cold_macs - warm_macs == len(warm) * profile.cumulative(split)
        assert warm_macs <= cold_macs


class TestBoundaryFractions:
    def test_uniform_profile_fifth_of_depth(self):
        assert boundary_fractions(UNIFORM, [20]) == (0.2,)

    def test_full_depth_is_one(self):
        assert boundary_fractions(UNIFORM, [100]) == (1.0,)

    def test_calibrated_split_holds_fitted_mac_share(self, cost_profile):
        # 20% of the layers carry ~22.14% of the MACs.
        (fraction,) = boundary_fractions(cost_profile, [20])
        assert math.isclose(fraction, 0.2214, abs_tol=5e-4)

    def test_monotone_nondecreasing(self, cost_profile):
        fractions = boundary_fractions(cost_profile, list(range(0, 102, 10)))
        assert all(a <= b for a, b in zip(fractions, fractions[1:]))
        assert all(0.0 <= f <= 1.0 for f in fractions)

    def test_rejects_unsorted_indices(self):
        with pytest.raises(ValueError, match="ascending"):
            boundary_fractions(UNIFORM, [30, 10])


class TestEvenBoundaries:
    def test_levels_evenly_spaced_within_leaf(self):
        bounds = even_tree_boundaries(UNIFORM, 4, leaf_index=20)
        assert bounds == (10, 20)

    def test_rejects_non_power_group_size(self):
        with pytest.raises(ValueError, match="power"):
            even_tree_boundaries(UNIFORM, 6, leaf_index=20)


class TestProfileIO:
    def test_round_trip(self, tmp_path, cost_profile):
        path = tmp_path / "cost.json"
        save_cost_profile(cost_profile, path)
        assert load_cost_profile(path) == cost_profile

    def test_rejects_negative_layer_cost(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"version": 1, "layer_costs": [5, -1]}')
        with pytest.raises(ProfileError, match=r"layer_costs\[1\]"):
            load_cost_profile(path)

    def test_rejects_empty_layers(self):
        with pytest.raises(ProfileError, match="at least one layer"):
            CostProfile(layer_costs=())

    def test_rejects_zero_total(self):
        with pytest.raises(ProfileError, match="positive"):
            CostProfile(layer_costs=(0, 0))

    def test_rejects_bad_preset_indices(self):
        with pytest.raises(ProfileError, match="ascending"):
            CostProfile(layer_costs=(1, 1), boundary_presets={"x": (2, 1)})

    def test_unknown_preset_lookup(self, cost_profile):
        with pytest.raises(ProfileError, match="nope"):
            cost_profile.preset("nope")
