import pytest

from neuralref import (
    GroupNetworkSpec,
    build_group_network,
    digits_classifier,
    finetune,
    load_pools,
    subsample_prevalence,
    train_individual,
)
from neuralref.network import FEATURE_MERGE

SEED = 0


@pytest.fixture(scope="session")
def pools():
    train, heldout = load_pools(positive_digit=3, seed=SEED)
    return train, heldout


@pytest.fixture(scope="session")
def screening_pool(pools):
    return subsample_prevalence(pools[1], 0.01, seed=SEED)


@pytest.fixture(scope="session")
def base_net(pools):
    net = digits_classifier(seed=SEED)
    return train_individual(net, pools[0], epochs=10, per_class=384, seed=SEED)


@pytest.fixture(scope="session")
def group_net_m2(base_net, pools):
    spec = GroupNetworkSpec(base=base_net, kind=FEATURE_MERGE, group_size=2,
                            split_index=2)
    return finetune(build_group_network(spec), pools[0], seed=SEED)


@pytest.fixture(scope="session")
def group_net_m4(base_net, pools):
    spec = GroupNetworkSpec(base=base_net, kind=FEATURE_MERGE, group_size=4,
                            split_index=2)
    return finetune(build_group_network(spec), pools[0], seed=SEED)
