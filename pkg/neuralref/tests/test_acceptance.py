"""Acceptance gate for the toy network package.

Run ``pytest tests/test_acceptance.py -v -s`` for one PASS/FAIL line per
clause.  The exported-profile clause drives the screening engine through its
command-line interface, which together with the profile file formats is the
only contract between the two packages.
"""

import functools
import json
import subprocess
import sys
import time

import numpy as np
import torch

from neuralref import (
    GroupNetworkSpec,
    build_group_network,
    measure_confusion,
    write_cost_profile,
    write_oracle_profile,
)
from neuralref.data import sample_groups
from neuralref.network import FEATURE_MERGE
from neuralref.training import predict_groups


def criterion(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.time()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\nACCEPTANCE FAIL: {name}")
                raise
            print(f"\nACCEPTANCE PASS: {name} ({time.time() - start:.1f}s)")
        return wrapper
    return decorate


@criterion("group network is permutation invariant within 1e-5 over 10^3 shuffles")
def test_permutation_invariance(group_net_m4, pools):
    x = pools[1].images[:32].reshape(8, 4, 1, 8, 8)
    torch.manual_seed(0)
    worst = 0.0
    with torch.no_grad():
        reference = group_net_m4(x)
        for _ in range(1000):
            perm = torch.randperm(4)
            diff = (group_net_m4(x[:, perm]) - reference).abs().max()
            worst = max(worst, float(diff))
    assert worst <= 1e-5, worst


@criterion("group network at set size 1 equals the individual network exactly")
def test_m1_equals_individual(base_net, pools):
    spec = GroupNetworkSpec(base=base_net, kind=FEATURE_MERGE, group_size=4,
                            split_index=2)
    net = build_group_network(spec)
    x = pools[1].images[:64]
    assert torch.equal(net(x.unsqueeze(1)), base_net(x))


@criterion("exported profiles load in the screening engine and drive a "
           "simulation end to end")
def test_export_drives_engine(base_net, group_net_m4, screening_pool, tmp_path):
    measurement = measure_confusion(group_net_m4, base_net, screening_pool,
                                    sizes=(1, 2, 4), groups_per_size=1000, seed=0)
    oracle_path = write_oracle_profile(measurement, tmp_path / "oracle.json",
                                       notes="toy digits measurement")
    cost_path = write_cost_profile(base_net, tmp_path / "cost.json", split_index=2)

    check = subprocess.run(
        ["poolscreen", "profile", "--check", str(oracle_path)],
        capture_output=True, text=True,
    )
    assert check.returncode == 0, check.stderr

    config = {
        "version": 1,
        "name": "toy_end_to_end",
        "n": 4000,
        "prevalence": 0.01,
        "population_mode": "fixed_count",
        "group_size": 4,
        "algorithm": "two_round",
        "split_factor": 2,
        "use_cache": True,
        "design": {"kind": "feature_merge", "preset": "feature_split"},
        "oracle_profile": str(oracle_path),
        "cost_profile": str(cost_path),
        "trials": 2,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    report_path = tmp_path / "report.json"
    run = subprocess.run(
        ["poolscreen", "run", "--config", str(config_path), "--seed", "11",
         "--out", str(report_path)],
        capture_output=True, text=True,
    )
    assert run.returncode == 0, run.stderr
    report = json.loads(report_path.read_text())
    for trial in report["trials"]:
        assert trial["tests_first_round"] == 1000
        assert 0.0 <= trial["recall"] <= 1.0
        assert trial["total_macs"] > 0
    assert report["aggregate"]["recall"]["mean"] > 0.5  # calibrated, not random


@criterion("group recall at set size 2 is at least 95% of the individual "
           "network's recall")
def test_group_recall_ratio(base_net, group_net_m2, pools):
    heldout = pools[1]
    rng = np.random.default_rng(0)
    singles = sample_groups(heldout, 1, 2000, rng, label=True)
    pairs = sample_groups(heldout, 2, 2000, rng, label=True)
    individual_recall = predict_groups(base_net, heldout, singles).float().mean()
    group_recall = predict_groups(group_net_m2, heldout, pairs).float().mean()
    print(f"\n  individual recall {individual_recall:.4f}, "
          f"group recall at size 2 {group_recall:.4f}")
    assert group_recall >= 0.95 * individual_recall
