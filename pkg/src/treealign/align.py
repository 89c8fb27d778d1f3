"""Partial alignment of two correlated sparse graphs from local tree
matching weights.

Both algorithms look at balls B(u, d). Vertices whose ball contains a cycle
are left unmatched (in the sparse regime almost all balls are trees). The
first algorithm matches (u, u') when two distinct dangling subtrees of u
align with two distinct dangling subtrees of u' above the threshold
gamma^(d-1); requiring two disjoint witnesses suppresses false positives
from a single lucky branch. The second keeps (u, u') when W_d between the
full balls clears gamma^d and is simultaneously a row and column maximum of
the cross-weight matrix; collisions are deleted afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .models import SparseGraph
from .trees import CanonicalTree, LabeledTree, intern_tree, leaf
from .matching import _weight

__all__ = [
    "Neighborhood",
    "neighborhood",
    "dangling_trees",
    "ntma",
    "ntma2",
    "dedup_pairs",
    "score",
    "AlignmentResult",
]

DEFAULT_NODE_BUDGET = 5000


@dataclass
class Neighborhood:
    """BFS exploration of B(u, d): vertex list, parent map restricted to the
    BFS tree, whether the ball contains a cycle, and whether the node budget
    was exhausted (oversized balls are skipped by the alignment loops)."""

    center: int
    radius: int
    vertices: list
    parent: dict
    depth: dict
    has_cycle: bool
    oversized: bool


def neighborhood(g: SparseGraph, u: int, d: int,
                 node_budget: int = DEFAULT_NODE_BUDGET) -> Neighborhood:
    """BFS ball of radius d around u, counting internal edges to detect
    cycles (edge count exceeding |vertices| - 1 means the ball is no tree)."""
    parent = {u: None}
    depth = {u: 0}
    order = [u]
    head = 0
    oversized = False
    while head < len(order):
        x = order[head]
        head += 1
        if depth[x] == d:
            continue
        for y in g.adj[x]:
            if y not in depth:
                depth[y] = depth[x] + 1
                parent[y] = x
                order.append(y)
                if len(order) > node_budget:
                    oversized = True
                    break
        if oversized:
            break
    inner_edges = 0
    vset = depth
    for x in order:
        for y in g.adj[x]:
            if y in vset:
                inner_edges += 1
    # edges of the induced subgraph on the ball, each counted twice
    has_cycle = inner_edges // 2 > len(order) - 1
    return Neighborhood(center=u, radius=d, vertices=order, parent=parent,
                        depth=depth, has_cycle=has_cycle, oversized=oversized)


def _canonical_subtrees(nb: Neighborhood) -> dict:
    """Canonical form of the BFS subtree below each vertex of a tree ball
    (valid only when the ball is acyclic)."""
    children: dict = {v: [] for v in nb.vertices}
    for v in nb.vertices:
        p = nb.parent[v]
        if p is not None:
            children[p].append(v)
    canon: dict = {}
    for v in sorted(nb.vertices, key=lambda x: nb.depth[x], reverse=True):
        kids: dict = {}
        for w in children[v]:
            cw = canon[w]
            kids[cw] = kids.get(cw, 0) + 1
        canon[v] = intern_tree(tuple(kids.items()))
    return canon


def dangling_trees(g: SparseGraph, u: int, d: int,
                   node_budget: int = DEFAULT_NODE_BUDGET):
    """For a vertex with an acyclic ball B(u, d): the canonical subtrees
    hanging from u at each neighbor (depth d-1 trees, in BFS tree terms),
    plus the canonical form of the whole ball. Returns None when the ball
    has a cycle or exceeds the budget."""
    nb = neighborhood(g, u, d, node_budget)
    if nb.has_cycle or nb.oversized:
        return None
    canon = _canonical_subtrees(nb)
    hang = [canon[v] for v in g.adj[u]]
    return hang, canon[u]


@dataclass
class AlignmentResult:
    pairs: list  # deduplicated (u, u') pairs, injective both ways
    raw_pairs: int  # matches before collision removal
    overlap: float
    error: float
    skipped: int  # vertices whose ball was cyclic or oversized (both graphs)
    n: int


def dedup_pairs(pairs: Sequence[tuple]) -> list:
    """Drop every pair whose left or right vertex occurs more than once."""
    from collections import Counter

    left = Counter(u for u, _ in pairs)
    right = Counter(v for _, v in pairs)
    return sorted((u, v) for u, v in pairs if left[u] == 1 and right[v] == 1)


def score(pairs: Sequence[tuple], pi_star: Sequence[int], n: int) -> tuple:
    """(overlap, error): fraction of vertices correctly matched and fraction
    matched incorrectly, relative to the planted alignment pi_star."""
    good = sum(1 for u, v in pairs if pi_star[u] == v)
    return good / n, (len(pairs) - good) / n


def _two_disjoint(edges: Sequence[tuple]) -> bool:
    """Whether a bipartite edge set contains a matching of size 2; true iff
    the edges span at least two rows and two columns."""
    rows = {e[0] for e in edges}
    if len(rows) < 2:
        return False
    cols = {e[1] for e in edges}
    return len(cols) >= 2


def ntma(g: SparseGraph, h: SparseGraph, d: int, gamma: float,
         pi_star: Optional[Sequence[int]] = None,
         node_budget: int = DEFAULT_NODE_BUDGET) -> AlignmentResult:
    """Neighborhood tree matching: accept (u, u') when both balls are trees
    and two dangling subtrees of u match two distinct dangling subtrees of
    u' with weight above gamma^(d-1)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if gamma <= 1.0:
        raise ValueError("gamma must exceed 1")
    thr = gamma ** (d - 1)
    sides = []
    skipped = 0
    for graph in (g, h):
        rows = {}
        for u in range(graph.n):
            got = dangling_trees(graph, u, d, node_budget)
            if got is None:
                skipped += 1
                continue
            hang, _ = got
            if len(hang) >= 2:
                rows[u] = hang
        sides.append(rows)
    left, right = sides
    above: dict = {}

    def ok(a: CanonicalTree, b: CanonicalTree) -> bool:
        key = (a.id, b.id) if a.id <= b.id else (b.id, a.id)
        hit = above.get(key)
        if hit is None:
            hit = _weight(d - 1, a, b) > thr
            above[key] = hit
        return hit

    pairs = []
    for u, ta in left.items():
        for v, tb in right.items():
            edges = [(i, j) for i, a in enumerate(ta)
                     for j, b in enumerate(tb) if ok(a, b)]
            if len(edges) >= 2 and _two_disjoint(edges):
                pairs.append((u, v))
    deduped = dedup_pairs(pairs)
    overlap, error = score(deduped, pi_star, g.n) if pi_star is not None \
        else (float("nan"), float("nan"))
    return AlignmentResult(pairs=deduped, raw_pairs=len(pairs),
                           overlap=overlap, error=error, skipped=skipped,
                           n=g.n)


def ntma2(g: SparseGraph, h: SparseGraph, d: int, gamma: float,
          pi_star: Optional[Sequence[int]] = None,
          node_budget: int = DEFAULT_NODE_BUDGET) -> AlignmentResult:
    """Full-ball variant: compute W_d between every pair of acyclic balls
    and keep (u, u') when the weight exceeds gamma^d and is both a row and a
    column maximum; colliding pairs are removed afterwards."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if gamma <= 1.0:
        raise ValueError("gamma must exceed 1")
    thr = gamma ** d
    balls = []
    skipped = 0
    for graph in (g, h):
        rows = {}
        for u in range(graph.n):
            got = dangling_trees(graph, u, d, node_budget)
            if got is None:
                skipped += 1
                continue
            rows[u] = got[1]
        balls.append(rows)
    left, right = balls
    lu = sorted(left)
    rv = sorted(right)
    wcache: dict = {}

    def wval(a: CanonicalTree, b: CanonicalTree) -> int:
        key = (a.id, b.id) if a.id <= b.id else (b.id, a.id)
        hit = wcache.get(key)
        if hit is None:
            hit = _weight(d, a, b)
            wcache[key] = hit
        return hit

    weights = np.zeros((len(lu), len(rv)))
    for i, u in enumerate(lu):
        a = left[u]
        row = weights[i]
        for j, v in enumerate(rv):
            row[j] = wval(a, right[v])
    pairs = []
    if weights.size:
        row_max = weights.max(axis=1)
        col_max = weights.max(axis=0)
        for i, u in enumerate(lu):
            for j, v in enumerate(rv):
                w = weights[i, j]
                if w > thr and w == row_max[i] and w == col_max[j]:
                    pairs.append((u, v))
    deduped = dedup_pairs(pairs)
    overlap, error = score(deduped, pi_star, g.n) if pi_star is not None \
        else (float("nan"), float("nan"))
    return AlignmentResult(pairs=deduped, raw_pairs=len(pairs),
                           overlap=overlap, error=error, skipped=skipped,
                           n=g.n)
