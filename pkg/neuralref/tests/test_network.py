import pytest
import torch

from neuralref import (
    GroupNetworkSpec,
    build_group_network,
    digits_classifier,
    merge_pixels,
    parameter_count,
)
from neuralref.network import FEATURE_MERGE, PIXEL_MERGE, TREE_MERGE


class TestMergePixels:
    def test_mean_of_duplicates_is_the_image(self):
        x = torch.rand(1, 8, 8)
        assert torch.equal(merge_pixels([x, x.clone()]), x)

    def test_singleton_is_identity(self):
        x = torch.rand(1, 8, 8)
        assert torch.equal(merge_pixels([x]), x)

    def test_opposite_images_cancel(self):
        x = torch.rand(1, 8, 8)
        assert torch.allclose(merge_pixels([x, -x]), torch.zeros_like(x))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            merge_pixels([torch.rand(1, 8, 8), torch.rand(1, 4, 4)])

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            merge_pixels([])


class TestSpecValidation:
    def test_depth_and_seeded_construction(self):
        assert digits_classifier().depth == 10
        a = digits_classifier(seed=5)
        b = digits_classifier(seed=5)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_rejects_bad_kind_and_aggregation(self, base_net):
        with pytest.raises(ValueError, match="kind"):
            GroupNetworkSpec(base=base_net, kind="stack", group_size=2)
        with pytest.raises(ValueError, match="aggregation"):
            GroupNetworkSpec(base=base_net, kind=FEATURE_MERGE, group_size=2,
                             split_index=2, aggregation="median")

    def test_rejects_invalid_split_index(self, base_net):
        for split in (-1, 11, None):
            with pytest.raises(ValueError, match="split"):
                GroupNetworkSpec(base=base_net, kind=FEATURE_MERGE,
                                 group_size=2, split_index=split)

    def test_rejects_bad_tree_boundaries(self, base_net):
        with pytest.raises(ValueError, match="boundaries"):
            GroupNetworkSpec(base=base_net, kind=TREE_MERGE, group_size=4,
                             level_boundaries=(3, 2))
        with pytest.raises(ValueError, match="capacity"):
            GroupNetworkSpec(base=base_net, kind=TREE_MERGE, group_size=8,
                             level_boundaries=(1, 2))


class TestGroupNetwork:
    def test_parameter_count_identity(self, base_net, group_net_m4):
        assert parameter_count(group_net_m4) == parameter_count(base_net)

    def test_finetune_does_not_touch_the_individual_network(self, pools):
        from neuralref import finetune

        base = digits_classifier(seed=9)
        before = {k: v.clone() for k, v in base.state_dict().items()}
        spec = GroupNetworkSpec(base=base, kind=FEATURE_MERGE, group_size=2,
                                split_index=2)
        finetune(build_group_network(spec), pools[0], epochs=1, per_class=8, seed=9)
        for key, value in base.state_dict().items():
            assert torch.equal(before[key], value)

    def test_m1_output_equals_individual_network_exactly(self, base_net, pools):
        spec = GroupNetworkSpec(base=base_net, kind=FEATURE_MERGE, group_size=4,
                                split_index=2)
        net = build_group_network(spec)
        x = pools[1].images[:16]
        assert torch.equal(net(x.unsqueeze(1)), base_net(x))

    def test_permutation_invariance_feature_merge(self, group_net_m4, pools):
        x = pools[1].images[:32].reshape(8, 4, 1, 8, 8)
        reference = group_net_m4(x)
        for _ in range(200):
            perm = torch.randperm(4)
            assert (group_net_m4(x[:, perm]) - reference).abs().max() <= 1e-5

    def test_single_level_tree_matches_feature_merge(self, base_net, pools):
        feature = build_group_network(GroupNetworkSpec(
            base=base_net, kind=FEATURE_MERGE, group_size=4, split_index=2))
        tree = build_group_network(GroupNetworkSpec(
            base=base_net, kind=TREE_MERGE, group_size=4,
            level_boundaries=(2,), fanouts=(4,)))
        tree.base = feature.base  # same copied weights, different wiring
        torch.manual_seed(3)
        for _ in range(100):
            x = torch.rand(4, 4, 1, 8, 8)
            assert torch.allclose(feature(x), tree(x), atol=1e-5)

    def test_binary_tree_runs_and_prunes(self, base_net):
        tree = build_group_network(GroupNetworkSpec(
            base=base_net, kind=TREE_MERGE, group_size=4,
            level_boundaries=(1, 2)))
        for m in (1, 2, 3, 4):
            out = tree(torch.rand(2, m, 1, 8, 8))
            assert out.shape == (2,)

    def test_tree_invariant_under_subtree_swaps(self, base_net):
        # The merge tree commutes with within-pair swaps and pair swaps
        # (its automorphisms); arbitrary cross-pair permutations are not
        # structurally guaranteed.
        tree = build_group_network(GroupNetworkSpec(
            base=base_net, kind=TREE_MERGE, group_size=4,
            level_boundaries=(1, 2)))
        x = torch.rand(3, 4, 1, 8, 8)
        reference = tree(x)
        for perm in ([1, 0, 2, 3], [0, 1, 3, 2], [2, 3, 0, 1], [3, 2, 1, 0]):
            assert torch.allclose(tree(x[:, perm]), reference, atol=1e-6)

    def test_pixel_merge_uses_mean(self, base_net):
        net = build_group_network(GroupNetworkSpec(
            base=base_net, kind=PIXEL_MERGE, group_size=2))
        x = torch.rand(5, 2, 1, 8, 8)
        assert torch.equal(net(x), net.base(x.mean(dim=1)))

    @pytest.mark.parametrize("aggregation", ["sum", "mean"])
    def test_alternative_aggregations(self, base_net, aggregation):
        net = build_group_network(GroupNetworkSpec(
            base=base_net, kind=FEATURE_MERGE, group_size=4, split_index=2,
            aggregation=aggregation))
        assert net(torch.rand(2, 4, 1, 8, 8)).shape == (2,)

    def test_rejects_bad_input_shapes(self, group_net_m4):
        with pytest.raises(ValueError, match="batch, set"):
            group_net_m4(torch.rand(4, 1, 8, 8))
        with pytest.raises(ValueError, match="set size"):
            group_net_m4(torch.rand(2, 5, 1, 8, 8))

    def test_untrained_head_scores_near_chance(self, pools):
        # A random classifier on balanced groups sits near 50% accuracy.
        import numpy as np

        from neuralref.data import group_labels, sample_groups
        from neuralref.training import predict_groups

        net = build_group_network(GroupNetworkSpec(
            base=digits_classifier(seed=123), kind=FEATURE_MERGE,
            group_size=2, split_index=2))
        rng = np.random.default_rng(0)
        pos = sample_groups(pools[0], 2, 250, rng, label=True)
        neg = sample_groups(pools[0], 2, 250, rng, label=False)
        members = np.concatenate([pos, neg])
        correct = (predict_groups(net, pools[0], members).numpy()
                   == group_labels(pools[0], members).numpy()).mean()
        assert 0.3 <= correct <= 0.7
