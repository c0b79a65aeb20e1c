import itertools
import math
from collections import Counter

import numpy as np
import pytest

from kfselect import certificates, model, selection
from kfselect.errors import ConfigurationError, SizeError
from kfselect.objective import Objective, SelectionConfig, modular_reference_objective


def test_demo_instance(demo_system):
    cfg = SelectionConfig(s=2)
    res = selection.greedy_select(demo_system, cfg)
    assert res.chosen == (0, 1)
    assert res.value == pytest.approx(-0.8)
    assert res.objective_trajectory[0] == 0.0
    assert selection.exhaustive_select(demo_system, cfg) == ((0, 1), pytest.approx(-0.8))


def test_full_selection(demo_system):
    cfg = SelectionConfig(s=3)
    res = selection.greedy_select(demo_system, cfg)
    assert sorted(res.chosen) == [0, 1, 2]
    assert res.value == pytest.approx(Objective(demo_system, cfg)((0, 1, 2)))
    assert selection.exhaustive_select(demo_system, cfg)[0] == (0, 1, 2)


def test_first_pick_equals_best_singleton():
    sys = model.random_system(5, 6, output_mode="gaussian", sigma_v2_range=(0.1, 1), rng_seed=4)
    cfg = SelectionConfig(s=1, N=3)
    assert selection.greedy_select(sys, cfg).chosen == selection.exhaustive_select(sys, cfg)[0]


def test_greedy_errors(demo_system):
    with pytest.raises(ConfigurationError):
        selection.greedy_select(demo_system, SelectionConfig(s=2, r=4))


def test_exhaustive_cap():
    sys = model.random_system(22, 22, rng_seed=0)
    with pytest.raises(SizeError) as err:
        selection.exhaustive_select(sys, SelectionConfig(s=11))
    assert err.value.cap == selection.EXHAUSTIVE_MAX_SUBSETS


def test_tie_break_lowest_index():
    sys = model.random_system(4, 4, rng_seed=0, sigma_w2=1.0)
    sys = model.LinearSystem(F=np.zeros((4, 4)), R_w=sys.R_w, Pi0=np.eye(4), sensors=sys.sensors)
    res = selection.greedy_select(sys, SelectionConfig(s=2))
    assert res.chosen == (0, 1)
    assert selection.exhaustive_select(sys, SelectionConfig(s=2))[0] == (0, 1)


@pytest.mark.parametrize("h", ["trace", "specnorm", "logdet"])
@pytest.mark.parametrize("kind", ["filtering", "smoothing"])
def test_fast_and_direct_greedy_agree(h, kind):
    for seed in range(4):
        sys = model.random_system(4, 6, output_mode="gaussian", sigma_v2_range=(0.05, 1), rng_seed=seed)
        for N in (1, 3):
            cfg = SelectionConfig(scalarization=h, kind=kind, N=N, s=3)
            fast = selection.greedy_select(sys, cfg, fast=True)
            slow = selection.greedy_select(sys, cfg, fast=False)
            assert fast.chosen == slow.chosen
            assert fast.objective_trajectory == slow.objective_trajectory


def test_result_invariants():
    sys = model.random_system(5, 6, output_mode="gaussian", sigma_v2_range=(0.05, 1), rng_seed=3)
    res = selection.greedy_select(sys, SelectionConfig(s=4, N=4, scalarization="specnorm"))
    traj = res.objective_trajectory
    assert len(traj) == 5 and len(res.gains) == 4
    for j, g in enumerate(res.gains):
        assert g == pytest.approx(traj[j] - traj[j + 1])
        assert g >= -1e-9
    assert res.to_dict()["chosen"] == list(res.chosen)


def test_modular_greedy_is_optimal():
    sys = model.random_system(4, 7, output_mode="gaussian", sigma_v2_range=(0.1, 1), rng_seed=6)
    cfg = SelectionConfig(s=3, N=2)
    f = lambda X: modular_reference_objective(sys, cfg, X)  # noqa: E731
    chosen = []
    for _ in range(cfg.s):
        rest = [u for u in range(sys.p) if u not in chosen]
        chosen.append(min(rest, key=lambda u: f(tuple(sorted(chosen + [u])))))
    best = min(itertools.combinations(range(sys.p), 3), key=f)
    assert sorted(chosen) == list(best)


def test_relative_suboptimality():
    assert selection.relative_suboptimality(-1.0, -1.0) == 0.0
    assert selection.relative_suboptimality(0.0, -1.0) == 1.0
    assert selection.relative_suboptimality(-0.9, -1.0) == pytest.approx(0.1)
    with pytest.raises(ConfigurationError):
        selection.relative_suboptimality(0.0, 0.0)


def test_random_baseline_full_and_seeded():
    sys = model.random_system(5, 5, rng_seed=1)
    res = selection.random_baseline(sys, SelectionConfig(s=5), rng_seed=42)
    assert sorted(res.chosen) == list(range(5))
    a = selection.random_baseline(sys, SelectionConfig(s=2), rng_seed=7)
    b = selection.random_baseline(sys, SelectionConfig(s=2), rng_seed=7)
    assert a.chosen == b.chosen


def test_random_baseline_uniform_pairs():
    p, draws = 5, 10_000
    rng = np.random.default_rng(0)
    counts = Counter(tuple(sorted(rng.choice(p, size=2, replace=False))) for _ in range(draws))
    # same sampler as random_baseline: each of the 10 pairs has probability 1/10
    sd = math.sqrt(draws * 0.1 * 0.9)
    assert len(counts) == 10
    assert all(abs(c - draws / 10) <= 3 * sd for c in counts.values())


def test_random_baseline_matches_sampler():
    sys = model.random_system(5, 5, rng_seed=1)
    res = selection.random_baseline(sys, SelectionConfig(s=2), rng_seed=3)
    expect = np.random.default_rng(3).choice(5, size=2, replace=False)
    assert res.chosen == tuple(int(u) for u in expect)


def test_random_baseline_strata():
    sys = model.random_system(6, 6, rng_seed=1)
    strata = [[0, 1], [2, 3], [4, 5]]
    res = selection.random_baseline(sys, SelectionConfig(s=3), rng_seed=5, strata=strata)
    assert [u // 2 for u in res.chosen] == [0, 1, 2]
    with pytest.raises(ConfigurationError):
        selection.random_baseline(sys, SelectionConfig(s=2), rng_seed=5, strata=[[0], []])
    with pytest.raises(ConfigurationError):
        selection.random_baseline(sys, SelectionConfig(s=2), rng_seed=5, strata=[[0], [9]])


def test_contiguous_strata():
    chunks = selection.contiguous_strata(list(range(31)), 10)
    assert len(chunks) == 10 and sum(map(len, chunks)) == 31
    assert [u for c in chunks for u in c] == list(range(31))
    with pytest.raises(ConfigurationError):
        selection.contiguous_strata([1, 2], 3)


def test_greedy_beats_random_on_average():
    g, r = [], []
    for seed in range(50):
        sys = model.random_system(6, 6, output_mode="gaussian", sigma_v2_range=(0.01, 1), rng_seed=seed)
        cfg = SelectionConfig(s=2, N=2)
        f = Objective(sys, cfg)
        g.append(selection.greedy_select(sys, cfg, objective=f).value)
        r.append(selection.random_baseline(sys, cfg, rng_seed=seed, objective=f).value)
    assert np.mean(g) <= np.mean(r)


@pytest.mark.parametrize("h", ["trace", "specnorm"])
def test_guarantees_hold_on_small_instances(h):
    for seed in range(15):
        sys = model.random_system(3, 6, output_mode="gaussian", sigma_v2_range=(0.01, 1), rng_seed=seed)
        cfg = SelectionConfig(scalarization=h, s=3)
        f = Objective(sys, cfg)
        g = selection.greedy_select(sys, cfg, objective=f).value
        _, f_opt = selection.exhaustive_select(sys, cfg, objective=f)
        if h == "trace":
            alpha = certificates.alpha_exhaustive(f, sys.p)
            mult, _ = certificates.guarantees(min(alpha, 1.0), 0.0, f_opt, cfg.r, cfg.s)
            assert g <= mult * f_opt + 1e-9
        else:
            eps = certificates.epsilon_exhaustive(f, sys.p)
            _, bound = certificates.guarantees(1.0, eps, f_opt, cfg.r, cfg.s)
            assert g <= bound + 1e-9
