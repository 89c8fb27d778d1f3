import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from treealign.series import tree_counts
from treealign.trees import (
    CanonicalTree,
    LabeledTree,
    canonicalize,
    chain_tree,
    enumerate_trees,
    intern_tree,
    leaf,
    parse_encoding,
    prune_to_depth,
    star_tree,
)


@st.composite
def labeled_trees(draw, max_n=24):
    # random rooted tree as a parent array with root 0
    n = draw(st.integers(1, max_n))
    parent = [None]
    for i in range(1, n):
        parent.append(draw(st.integers(0, i - 1)))
    return LabeledTree(parent=parent)


def relabel(t: LabeledTree, perm) -> LabeledTree:
    parent = [None] * t.n
    for v, p in enumerate(t.parent):
        if p is not None:
            parent[perm[v]] = perm[p]
    return LabeledTree(parent=parent, root=perm[t.root])


def test_interning_gives_identity():
    a = parse_encoding("((())())")
    b = parse_encoding("(()(()))")
    assert a is b
    assert a is not parse_encoding("((()))")


def test_basic_shapes():
    assert leaf().size == 1 and leaf().depth == 0
    s = star_tree(5)
    assert s.size == 6 and s.depth == 1 and s.degree == 5
    c = chain_tree(4)
    assert c.size == 5 and c.depth == 4 and c.degree == 1
    assert star_tree(1) is chain_tree(1)
    assert star_tree(0) is leaf()


def test_encoding_round_trip():
    for t in enumerate_trees(8):
        assert parse_encoding(t.encoding) is t


def test_children_sorted_and_merged():
    t = intern_tree([(leaf(), 1), (star_tree(2), 1), (leaf(), 2)])
    assert t.degree == 4
    assert dict(t.children)[leaf()] == 3
    encs = [sub.encoding for sub, _ in t.children]
    assert encs == sorted(encs)


def test_enumeration_counts_match_series():
    trees = enumerate_trees(9)
    by_size = [0] * 9
    for t in trees:
        by_size[t.size - 1] += 1
    assert by_size == tree_counts(float("inf"), 9)

    shallow = enumerate_trees(9, max_depth=2)
    by_size = [0] * 9
    for t in shallow:
        by_size[t.size - 1] += 1
    assert by_size == tree_counts(2, 9)
    assert all(t.depth <= 2 for t in shallow)


def test_enumeration_is_duplicate_free_and_ordered():
    trees = enumerate_trees(8)
    assert len(set(trees)) == len(trees)
    assert trees == sorted(trees)


def test_enumeration_size_guard():
    with pytest.raises(ValueError):
        enumerate_trees(30)
    # explicit guard override works
    assert len(enumerate_trees(12, size_guard=12)) == sum(tree_counts(float("inf"), 12))


@given(labeled_trees(), st.randoms(use_true_random=False))
def test_canonicalize_relabel_invariant(t, rnd):
    perm = list(range(t.n))
    rnd.shuffle(perm)
    assert canonicalize(relabel(t, perm)) is canonicalize(t)


@given(labeled_trees())
def test_canonicalize_preserves_size_and_depth(t):
    c = canonicalize(t)
    assert c.size == t.n
    assert c.depth == t.depth()


@given(labeled_trees(), st.integers(0, 6))
def test_prune_properties(t, d):
    c = canonicalize(t)
    p = prune_to_depth(c, d)
    if c.depth < d:
        assert p is None
    else:
        assert p.depth >= d
        assert prune_to_depth(p, d) is p


def test_prune_leaves_sit_at_or_below_target():
    # pruning drops exactly the vertices with no descendant at depth >= d,
    # so every leaf of the result is at depth >= d; with input depth == d
    # every leaf is at depth exactly d
    for t in enumerate_trees(7):
        for d in range(t.depth + 1):
            p = prune_to_depth(t, d)
            stack = [(p, 0)]
            while stack:
                node, dep = stack.pop()
                if node.degree == 0:
                    assert dep >= d
                    if t.depth == d:
                        assert dep == d
                for sub in node.child_list():
                    stack.append((sub, dep + 1))


def test_prune_examples():
    assert prune_to_depth(star_tree(4), 1) is star_tree(4)
    assert prune_to_depth(chain_tree(3), 2) is chain_tree(3)
    mixed = parse_encoding("((())()())")
    assert prune_to_depth(mixed, 2) is parse_encoding("((()))")


def test_prune_labeled_matches_canonical():
    t = LabeledTree(parent=[None, 0, 0, 1, 1, 2])
    for d in range(3):
        pl = prune_to_depth(t, d)
        assert canonicalize(pl) is prune_to_depth(canonicalize(t), d)


def test_from_edges_matches_parent_array():
    t = LabeledTree(parent=[None, 0, 0, 2, 2])
    edges = [(v, p) for v, p in enumerate(t.parent) if p is not None]
    u = LabeledTree.from_edges(edges, root=0)
    assert canonicalize(u) is canonicalize(t)


def test_labeled_tree_validation():
    with pytest.raises(ValueError):
        LabeledTree(parent=[None, None])
    with pytest.raises(ValueError):
        LabeledTree(parent=[0, 1])
    with pytest.raises(ValueError):
        LabeledTree(parent=[None, 2, 1]).depths()


def test_canonical_ordering_total():
    trees = enumerate_trees(6)
    for a, b in zip(trees, trees[1:]):
        assert a < b
