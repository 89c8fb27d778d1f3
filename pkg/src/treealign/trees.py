"""Rooted unlabeled trees: canonical forms, labeled trees, pruning, enumeration.

A rooted unlabeled tree is identified with the multiset of its root subtrees.
Canonical instances are interned process-wide, so equality is identity and
every tree carries a dense integer id usable as a dictionary key.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

__all__ = [
    "CanonicalTree",
    "LabeledTree",
    "intern_tree",
    "leaf",
    "star_tree",
    "chain_tree",
    "parse_encoding",
    "canonicalize",
    "prune_to_depth",
    "enumerate_trees",
    "clear_intern_table",
]


class CanonicalTree:
    """Interned canonical form of a rooted unlabeled tree.

    children is a tuple of (subtree, multiplicity) pairs sorted by the
    subtree encoding. Instances are unique per shape, so `is` works as
    equality and `id_` indexes memo tables.
    """

    __slots__ = ("id", "children", "size", "depth", "encoding", "degree")

    def __init__(self, id_: int, children: tuple, size: int, depth: int,
                 encoding: str, degree: int):
        self.id = id_
        self.children = children
        self.size = size
        self.depth = depth
        self.encoding = encoding
        self.degree = degree

    def child_list(self) -> list["CanonicalTree"]:
        """Children expanded with multiplicity, in encoding order."""
        out = []
        for sub, mult in self.children:
            out.extend([sub] * mult)
        return out

    def __repr__(self):
        return f"CanonicalTree({self.encoding!r})"

    def __hash__(self):
        return self.id

    def __eq__(self, other):
        return self is other

    # total order: by size, then encoding (the enumeration order)
    def __lt__(self, other):
        if self.size != other.size:
            return self.size < other.size
        return self.encoding < other.encoding


_LOCK = threading.Lock()
_BY_KEY: dict = {}
_NEXT_ID = [0]


def intern_tree(children: Sequence[tuple]) -> CanonicalTree:
    """Intern a tree given (subtree, multiplicity) pairs. Order of the input
    pairs does not matter; multiplicities of equal subtrees are merged."""
    merged: dict = {}
    for sub, mult in children:
        if mult <= 0:
            raise ValueError("multiplicity must be positive")
        merged[sub] = merged.get(sub, 0) + mult
    ordered = tuple(sorted(merged.items(), key=lambda p: p[0].encoding))
    key = tuple((sub.id, mult) for sub, mult in ordered)
    with _LOCK:
        hit = _BY_KEY.get(key)
        if hit is not None:
            return hit
        parts = []
        size = 1
        depth = 0
        degree = 0
        for sub, mult in ordered:
            parts.append(sub.encoding * mult)
            size += sub.size * mult
            depth = max(depth, sub.depth + 1)
            degree += mult
        node = CanonicalTree(_NEXT_ID[0], ordered, size, depth,
                             "(" + "".join(parts) + ")", degree)
        _NEXT_ID[0] += 1
        _BY_KEY[key] = node
        return node


def clear_intern_table():
    """Drop all interned trees. Existing instances stay usable but become
    distinct from freshly interned shapes; meant for memory control in long
    simulation sessions and for test isolation."""
    with _LOCK:
        _BY_KEY.clear()


def leaf() -> CanonicalTree:
    return intern_tree(())


def star_tree(num_children: int) -> CanonicalTree:
    """Root with num_children leaf children."""
    if num_children < 0:
        raise ValueError("num_children must be >= 0")
    if num_children == 0:
        return leaf()
    return intern_tree(((leaf(), num_children),))


def chain_tree(depth: int) -> CanonicalTree:
    """Path of the given depth (depth 0 is the single node)."""
    t = leaf()
    for _ in range(depth):
        t = intern_tree(((t, 1),))
    return t


def parse_encoding(s: str) -> CanonicalTree:
    """Parse a balanced-parentheses encoding. The input need not list
    children in canonical order; the result is always canonical."""
    pos = [0]

    def parse_one() -> CanonicalTree:
        if pos[0] >= len(s) or s[pos[0]] != "(":
            raise ValueError(f"expected '(' at position {pos[0]}")
        pos[0] += 1
        kids = []
        while pos[0] < len(s) and s[pos[0]] == "(":
            kids.append((parse_one(), 1))
        if pos[0] >= len(s) or s[pos[0]] != ")":
            raise ValueError(f"expected ')' at position {pos[0]}")
        pos[0] += 1
        return intern_tree(kids)

    t = parse_one()
    if pos[0] != len(s):
        raise ValueError("trailing characters in encoding")
    return t


@dataclass
class LabeledTree:
    """Rooted tree on labeled vertices 0..n-1, stored as a parent array.

    parent[root] is None. Vertices may appear in any order.
    """

    parent: list
    root: int = 0
    _children: Optional[list] = field(default=None, repr=False, compare=False)
    _depths: Optional[list] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.parent)
        if not (0 <= self.root < n):
            raise ValueError("root out of range")
        if self.parent[self.root] is not None:
            raise ValueError("root must have parent None")
        roots = sum(1 for p in self.parent if p is None)
        if roots != 1:
            raise ValueError("tree must have exactly one root")

    @property
    def n(self) -> int:
        return len(self.parent)

    def children(self) -> list:
        if self._children is None:
            ch = [[] for _ in range(self.n)]
            for v, p in enumerate(self.parent):
                if p is not None:
                    ch[p].append(v)
            self._children = ch
        return self._children

    def depths(self) -> list:
        """Depth of every vertex; raises on a cycle or disconnected input."""
        if self._depths is None:
            ch = self.children()
            depth = [-1] * self.n
            depth[self.root] = 0
            stack = [self.root]
            seen = 1
            while stack:
                u = stack.pop()
                for v in ch[u]:
                    depth[v] = depth[u] + 1
                    seen += 1
                    stack.append(v)
            if seen != self.n:
                raise ValueError("parent array is not a connected tree")
            self._depths = depth
        return self._depths

    def depth(self) -> int:
        return max(self.depths())

    @staticmethod
    def from_edges(edges: Sequence[tuple], root: int, n: Optional[int] = None) -> "LabeledTree":
        if n is None:
            n = max((max(e) for e in edges), default=root) + 1
        adj = [[] for _ in range(n)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        parent: list = [None] * n
        order = [root]
        visited = [False] * n
        visited[root] = True
        for u in order:
            for v in adj[u]:
                if not visited[v]:
                    visited[v] = True
                    parent[v] = u
                    order.append(v)
        if len(order) != n:
            raise ValueError("edge list is not a connected tree")
        return LabeledTree(parent=parent, root=root)


def canonicalize(t: LabeledTree) -> CanonicalTree:
    """Canonical form of a labeled rooted tree, bottom-up."""
    depths = t.depths()
    ch = t.children()
    order = sorted(range(t.n), key=lambda u: depths[u], reverse=True)
    canon: list = [None] * t.n
    for u in order:
        kids: dict = {}
        for v in ch[u]:
            cv = canon[v]
            kids[cv] = kids.get(cv, 0) + 1
        canon[u] = intern_tree(tuple(kids.items()))
    return canon[t.root]


def prune_to_depth(t, d: int):
    """Keep only vertices having a descendant at depth >= d (so every leaf of
    the result sits at depth exactly d when the input has depth <= d).
    Returns None when the root itself does not survive. Accepts either tree
    representation and returns the same kind."""
    if d < 0:
        raise ValueError("d must be >= 0")
    if isinstance(t, CanonicalTree):
        return _prune_canonical(t, d)
    depths = t.depths()
    ch = t.children()
    # height[u]: max depth among descendants of u (absolute)
    reach = list(depths)
    order = sorted(range(t.n), key=lambda u: depths[u], reverse=True)
    for u in order:
        p = t.parent[u]
        if p is not None and reach[u] > reach[p]:
            reach[p] = reach[u]
    if reach[t.root] < d:
        return None
    keep = [u for u in range(t.n) if reach[u] >= d]
    remap = {u: i for i, u in enumerate(keep)}
    parent = [None if t.parent[u] is None else remap[t.parent[u]] for u in keep]
    return LabeledTree(parent=parent, root=remap[t.root])


def _prune_canonical(t: CanonicalTree, d: int):
    if t.depth < d:
        return None
    return _prune_canonical_keep(t, d)


def _prune_canonical_keep(t: CanonicalTree, d: int) -> CanonicalTree:
    if d <= 0:
        # every vertex at depth >= d has a descendant (itself) at depth >= d
        return t
    kept = []
    for sub, m in t.children:
        if sub.depth >= d - 1:
            kept.append((_prune_canonical_keep(sub, d - 1), m))
    return intern_tree(tuple(kept))


def enumerate_trees(max_size: int, max_depth: Optional[int] = None,
                    size_guard: int = 16) -> list:
    """All canonical trees with size <= max_size (and depth <= max_depth if
    given), ordered by size then encoding. size_guard protects against
    accidental exponential enumerations; raise it explicitly when the depth
    restriction keeps counts manageable."""
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    if max_depth is None and max_size > size_guard:
        raise ValueError(
            f"max_size={max_size} exceeds size_guard={size_guard}; pass a "
            "larger size_guard explicitly for big enumerations")
    if max_depth is not None and max_size > max(size_guard, 64):
        raise ValueError("max_size too large even for bounded depth; raise size_guard")

    # trees grouped by size; each new size n combines children of total
    # size n-1 drawn as a non-increasing sequence from earlier trees
    by_size: list = [[] for _ in range(max_size + 1)]
    by_size[1] = [leaf()]
    all_prev: list = [leaf()]

    for n in range(2, max_size + 1):
        found = []

        def extend(budget: int, max_idx: int, picked: list):
            if budget == 0:
                counts: dict = {}
                for tr in picked:
                    counts[tr] = counts.get(tr, 0) + 1
                cand = intern_tree(tuple(counts.items()))
                found.append(cand)
                return
            for i in range(max_idx, -1, -1):
                sub = all_prev[i]
                if sub.size > budget:
                    continue
                if max_depth is not None and sub.depth + 1 > max_depth:
                    continue
                picked.append(sub)
                extend(budget - sub.size, i, picked)
                picked.pop()

        extend(n - 1, len(all_prev) - 1, [])
        by_size[n] = sorted(set(found), key=lambda tr: tr.encoding)
        all_prev.extend(by_size[n])

    out = []
    for n in range(1, max_size + 1):
        out.extend(by_size[n])
    if max_depth is not None:
        out = [t for t in out if t.depth <= max_depth]
    return out
