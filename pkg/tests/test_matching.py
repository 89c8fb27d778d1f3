import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treealign.matching import (
    RateEstimate,
    clear_weight_memo,
    edge_matching_weight,
    estimate_matching_rate,
    lap_max,
    matching_weight,
    subtree_away_from,
)
from treealign.models import ModelParams, RngStream, sample_gw
from treealign.trees import (
    LabeledTree,
    canonicalize,
    chain_tree,
    enumerate_trees,
    leaf,
    parse_encoding,
    prune_to_depth,
    star_tree,
)


def brute_lap(a):
    """Max-weight assignment by permutation enumeration (small inputs)."""
    a = np.asarray(a)
    r, c = a.shape
    if r > c:
        return brute_lap(a.T)
    best = 0
    for cols in itertools.permutations(range(c), r):
        best = max(best, sum(a[i, j] for i, j in enumerate(cols)))
    return best


def oracle_weight(a, b, d):
    """Independent reimplementation of the matching weight recursion."""
    if d == 0:
        return 1
    ca, cb = a.child_list(), b.child_list()
    if not ca or not cb:
        return 0
    m = np.array([[oracle_weight(x, y, d - 1) for y in cb] for x in ca])
    return brute_lap(m)


@given(st.integers(1, 5), st.integers(1, 5), st.randoms(use_true_random=False))
def test_lap_matches_brute_force(r, c, rnd):
    a = np.array([[rnd.randint(0, 9) for _ in range(c)] for _ in range(r)])
    assignment, value = lap_max(a)
    assert value == brute_lap(a)
    rows = [i for i, _ in assignment]
    cols = [j for _, j in assignment]
    assert len(set(rows)) == len(rows) and len(set(cols)) == len(cols)
    assert sum(a[i, j] for i, j in assignment) == value


def test_depth_zero_weight_is_one():
    assert matching_weight(leaf(), star_tree(3), 0) == 1
    assert matching_weight(chain_tree(2), chain_tree(5), 0) == 1


def test_depth_one_weight_is_min_degree():
    for k in range(1, 6):
        for j in range(1, 6):
            got = matching_weight(star_tree(k), star_tree(j), 1)
            assert got == min(k, j)


def test_weight_vanishes_when_one_side_too_shallow():
    assert matching_weight(chain_tree(1), chain_tree(3), 2) == 0
    assert matching_weight(star_tree(4), chain_tree(3), 2) == 0


def test_weight_matches_oracle_on_small_trees():
    trees = [t for t in enumerate_trees(6) if t.depth >= 1]
    for d in (1, 2, 3):
        for a in trees:
            for b in trees[::2]:
                clear_weight_memo()
                assert matching_weight(a, b, d) == oracle_weight(a, b, d)


def test_weight_symmetric():
    trees = enumerate_trees(6)
    for a in trees[::3]:
        for b in trees[::4]:
            for d in (1, 2):
                assert matching_weight(a, b, d) == matching_weight(b, a, d)


def test_self_weight_counts_deepest_leaves():
    # W_d(t, t) equals the number of depth-d leaves of the pruned tree
    for t in enumerate_trees(7):
        for d in range(1, t.depth + 1):
            p = prune_to_depth(t, d)
            n_leaves = 0
            stack = [(p, 0)]
            while stack:
                node, dep = stack.pop()
                if dep == d:
                    n_leaves += 1
                    continue
                for sub in node.child_list():
                    stack.append((sub, dep + 1))
            assert matching_weight(t, t, d) == n_leaves


def test_weight_invariant_under_pruning():
    rng = RngStream(41, 0)
    params = ModelParams(lam=2.0, s=0.0, d=5)
    for _ in range(40):
        t = sample_gw(params, rng)
        tp = sample_gw(params, rng)
        for d in (1, 2, 3):
            w = matching_weight(t, tp, d)
            pt, ptp = prune_to_depth(t, d), prune_to_depth(tp, d)
            if pt is None or ptp is None:
                assert w == 0
            else:
                assert matching_weight(pt, ptp, d) == w


def test_weight_accepts_labeled_trees():
    t = LabeledTree(parent=[None, 0, 0, 1, 1])
    assert matching_weight(t, t, 2) == matching_weight(
        canonicalize(t), canonicalize(t), 2)


def test_weight_monotone_in_depth_requirement():
    # deeper matchings can only use fewer leaves per branch: W_d <= product
    # bound via W_1 is too loose, but W_d <= W_{d-1} * max degree holds;
    # check the cheap coarse bound W_d <= size of either side
    trees = enumerate_trees(7)
    for a in trees[::5]:
        for b in trees[::7]:
            for d in (1, 2, 3):
                w = matching_weight(a, b, d)
                assert w <= min(a.size, b.size)


def test_subtree_away_from_splits_edge():
    # path 0-1-2 plus leaf 3 on vertex 1
    t = LabeledTree(parent=[None, 0, 1, 1])
    up = subtree_away_from(t, 0, 1)
    down = subtree_away_from(t, 1, 0)
    assert up.n == 1
    assert down.n == 3
    assert canonicalize(down) is parse_encoding("(()())")


def test_edge_matching_weight_consistency():
    t = LabeledTree(parent=[None, 0, 1, 1, 0])
    tp = LabeledTree(parent=[None, 0, 1, 2, 1])
    d = 2
    got = edge_matching_weight(t, 1, 0, tp, 1, 0, d)
    a = subtree_away_from(t, 1, 0)
    b = subtree_away_from(tp, 1, 0)
    assert got == matching_weight(a, b, d)


def test_estimate_matching_rate_fields():
    rng = RngStream(43, 0)
    params = ModelParams(lam=1.5, s=0.0, d=4)
    est = estimate_matching_rate("null", params, [2, 3, 4], 25, rng)
    assert isinstance(est, RateEstimate)
    assert est.depths == [2, 3, 4]
    assert est.n_survived == [25, 25, 25]
    assert len(est.mean_log_w) == 3 and len(est.stderr) == 3
    assert all(e >= 0 for e in est.stderr)
    # slope consistent with an OLS refit of the reported means
    xs, ys = est.depths, est.mean_log_w
    xbar, ybar = sum(xs) / 3, sum(ys) / 3
    slope = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys)) / sum(
        (x - xbar) ** 2 for x in xs)
    assert est.slope == pytest.approx(slope, abs=1e-12)


def test_estimate_matching_rate_rejects_unknown_model():
    rng = RngStream(47, 0)
    with pytest.raises(ValueError):
        estimate_matching_rate("bogus", ModelParams(lam=2.0, s=0.5, d=3),
                               [1, 2], 5, rng)
