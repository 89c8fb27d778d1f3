"""Random generators: Galton-Watson trees with Poisson offspring truncated
at a given depth, the correlated pair construction (shared intersection tree
plus independent augmentations), the shifted-root variant, and correlated
sparse Erdos-Renyi graph pairs.

All sampling goes through numpy Generators derived from (seed, stream index)
pairs so every experiment is reproducible and independent streams never
overlap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .trees import LabeledTree

__all__ = [
    "ModelParams",
    "RngStream",
    "extinction_prob",
    "sample_gw",
    "sample_gw_conditioned",
    "sample_null_pair",
    "sample_correlated_pair",
    "sample_shifted_pair",
    "SparseGraph",
    "sample_correlated_er",
    "write_graph",
    "read_graph",
]


@dataclass(frozen=True)
class ModelParams:
    """Parameters shared by the tree models: offspring mean lam > 0,
    correlation s in [0, 1], depth d >= 0, and root shift delta >= 0
    (used by the shifted model only)."""

    lam: float
    s: float = 1.0
    d: int = 1
    delta: int = 0

    def __post_init__(self):
        if not (self.lam > 0):
            raise ValueError("lam must be > 0")
        if not (0.0 <= self.s <= 1.0):
            raise ValueError("s must lie in [0, 1]")
        if self.d < 0:
            raise ValueError("d must be >= 0")
        if self.delta < 0 or self.delta > self.d:
            raise ValueError("delta must lie in [0, d]")


def RngStream(seed: int, index: int = 0) -> np.random.Generator:
    """Deterministic generator for (seed, stream index). Distinct indices
    give statistically independent streams."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def extinction_prob(lam: float, d: int) -> float:
    """p_d = probability that a Poisson(lam) branching process truncated at
    depth d has no vertex at depth d. p_0 = 0, p_d = exp(-lam (1 - p_{d-1}))."""
    if lam <= 0:
        raise ValueError("lam must be > 0")
    if d < 0:
        raise ValueError("d must be >= 0")
    p = 0.0
    for _ in range(d):
        p = math.exp(-lam * (1.0 - p))
    return p


class _TreeBuilder:
    """Grow a labeled tree one vertex at a time."""

    __slots__ = ("parent", "depth")

    def __init__(self):
        self.parent: list = [None]
        self.depth: list = [0]

    def add(self, par: int) -> int:
        v = len(self.parent)
        self.parent.append(par)
        self.depth.append(self.depth[par] + 1)
        return v

    def grow_gw(self, root_of_subtree: int, lam: float, budget: int,
                rng: np.random.Generator):
        """Attach an independent Poisson(lam) tree of depth <= budget below
        an existing vertex (which acts as its root)."""
        if budget <= 0:
            return
        frontier = [(root_of_subtree, budget)]
        while frontier:
            u, b = frontier.pop()
            k = int(rng.poisson(lam))
            for _ in range(k):
                v = self.add(u)
                if b > 1:
                    frontier.append((v, b - 1))

    def tree(self) -> LabeledTree:
        return LabeledTree(parent=list(self.parent), root=0)


def sample_gw(params: ModelParams, rng: np.random.Generator) -> LabeledTree:
    """One Poisson(lam) Galton-Watson tree truncated at depth params.d."""
    b = _TreeBuilder()
    b.grow_gw(0, params.lam, params.d, rng)
    return b.tree()


def sample_gw_conditioned(params: ModelParams, rng: np.random.Generator) -> LabeledTree:
    """GW(lam) tree truncated at depth d, conditioned on having a vertex at
    depth d, and pruned so every leaf sits at depth exactly d.

    Uses the recursive description of the pruned conditioned tree: the root
    takes Poisson(lam (1 - p_{d-1})) children conditioned positive, each
    carrying an independent copy one level shallower.
    """
    d = params.d
    lam = params.lam
    # survival-conditioned offspring means per remaining depth
    p = [extinction_prob(lam, k) for k in range(d + 1)]
    b = _TreeBuilder()
    stack = [(0, d)]
    while stack:
        u, k = stack.pop()
        if k == 0:
            continue
        mean = lam * (1.0 - p[k - 1])
        deg = 0
        while deg == 0:
            deg = int(rng.poisson(mean))
        for _ in range(deg):
            v = b.add(u)
            stack.append((v, k - 1))
    return b.tree()


def sample_null_pair(params: ModelParams, rng: np.random.Generator) -> tuple:
    """Two independent GW(lam)_d trees."""
    return sample_gw(params, rng), sample_gw(params, rng)


def _augment(base: LabeledTree, lam: float, s: float, d: int,
             rng: np.random.Generator) -> LabeledTree:
    """One (lam, s)-augmentation of an intersection tree: every vertex at
    depth < d receives Poisson(lam (1-s)) extra children, each carrying an
    independent GW(lam) subtree truncated at the remaining depth. The
    returned tree contains the base as its first base.n vertices."""
    if base.root != 0:
        raise ValueError("augmentation expects root 0")
    b = _TreeBuilder()
    depths = base.depths()
    # copy base with identical indices
    b.parent = list(base.parent)
    b.depth = list(depths)
    for v in range(base.n):
        dv = depths[v]
        if dv >= d:
            continue
        extra = int(rng.poisson(lam * (1.0 - s)))
        for _ in range(extra):
            w = b.add(v)
            b.grow_gw(w, lam, d - dv - 1, rng)
    return b.tree()


def sample_correlated_pair(params: ModelParams, rng: np.random.Generator) -> tuple:
    """Correlated pair: intersection tree tau* ~ GW(lam*s)_d, then two
    independent (lam, s)-augmentations. Returns (t, t_prime, tau_star);
    tau_star occupies the first tau_star.n vertex labels of both trees."""
    inter_params = ModelParams(lam=params.lam * params.s, d=params.d) \
        if params.s > 0 else None
    if params.s == 0.0:
        tau = LabeledTree(parent=[None], root=0)
    else:
        tau = sample_gw(inter_params, rng)
    t = _augment(tau, params.lam, params.s, params.d, rng)
    tp = _augment(tau, params.lam, params.s, params.d, rng)
    return t, tp, tau


def sample_shifted_pair(params: ModelParams, rng: np.random.Generator) -> tuple:
    """Shifted correlated pair: the roots are delta generations apart.

    t starts with a path root -> ... -> rho' of length delta; each path
    vertex before rho' gets Poisson(lam) extra children with independent
    GW(lam) subtrees filling the remaining depth. From rho' both trees share
    an intersection tree tau* ~ GW(lam*s), augmented to depth d - delta
    inside t and to depth d inside t_prime. Returns (t, t_prime).
    """
    lam, s, d, delta = params.lam, params.s, params.d, params.delta
    if s == 0.0:
        tau = LabeledTree(parent=[None], root=0)
    else:
        tau = sample_gw(ModelParams(lam=lam * s, d=d - delta), rng)
    sub_t = _augment(tau, lam, s, d - delta, rng)
    t_prime = _augment(tau, lam, s, d, rng)

    # build t: path of length delta, dressed with independent GW(lam) bushes,
    # then hang sub_t (already depth <= d - delta) below the path end
    b = _TreeBuilder()
    path_end = 0
    for i in range(delta):
        nxt = b.add(path_end)
        extra = int(rng.poisson(lam))
        for _ in range(extra):
            w = b.add(path_end)  # depth i+1, budget below is d-(i+1)
            b.grow_gw(w, lam, d - (i + 1), rng)
        path_end = nxt
    # splice sub_t below path_end (identify sub_t's root with path_end)
    sub_depths = sub_t.depths()
    remap = {sub_t.root: path_end}
    order = sorted(range(sub_t.n), key=lambda u: sub_depths[u])
    for u in order:
        if u != sub_t.root:
            remap[u] = b.add(remap[sub_t.parent[u]])
    return b.tree(), t_prime


@dataclass
class SparseGraph:
    """Simple undirected graph as sorted adjacency lists."""

    n: int
    adj: list

    @staticmethod
    def from_edges(n: int, edges: Sequence[tuple]) -> "SparseGraph":
        adj = [[] for _ in range(n)]
        seen = set()
        for u, v in edges:
            if u == v:
                raise ValueError("self-loop")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                continue
            seen.add(key)
            adj[u].append(v)
            adj[v].append(u)
        for lst in adj:
            lst.sort()
        return SparseGraph(n=n, adj=adj)

    def edges(self) -> list:
        out = []
        for u, nb in enumerate(self.adj):
            for v in nb:
                if u < v:
                    out.append((u, v))
        return out

    def num_edges(self) -> int:
        return sum(len(a) for a in self.adj) // 2


def _sample_pair_indices(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """m distinct unordered pairs out of C(n,2), uniformly."""
    total = n * (n - 1) // 2
    if m > total:
        raise ValueError("too many edges requested")
    if m == 0:
        return np.empty(0, dtype=np.int64)
    # rejection on duplicates; m << total in the sparse regime
    picked = rng.choice(total, size=m, replace=False)
    return picked


def _decode_pair(idx: np.ndarray, n: int) -> tuple:
    """Inverse of the row-major upper-triangle enumeration of pairs."""
    # pair (u,v), u<v, index = u*n - u(u+3)/2 + v - 1
    idxf = idx.astype(np.float64)
    u = np.floor(((2 * n - 1) - np.sqrt((2 * n - 1) ** 2 - 8 * idxf)) / 2).astype(np.int64)
    # row u starts at S(u) = u(n-1) - u(u-1)/2; guard against float rounding
    start = u * (n - 1) - (u * (u - 1)) // 2
    idx = idx.astype(np.int64)
    u = np.where(start > idx, u - 1, u)
    nxt = (u + 1) * (n - 1) - ((u + 1) * u) // 2
    u = np.where(idx >= nxt, u + 1, u)
    start = u * (n - 1) - (u * (u - 1)) // 2
    v = idx - start + u + 1
    return u, v


def sample_correlated_er(n: int, lam: float, s: float,
                         rng: np.random.Generator) -> tuple:
    """Correlated Erdos-Renyi pair G(n, lam/n, s).

    A parent graph F ~ G(n, lam/(n s)) is subsampled twice independently,
    keeping each edge with probability s; the second copy is relabeled by a
    uniform permutation pi_star. Returns (g, h, pi_star) where
    h's vertex u corresponds to g's vertex pi_star^{-1}(u), i.e. the planted
    alignment maps u in g to pi_star[u] in h.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not (0 < s <= 1.0):
        raise ValueError("s must lie in (0, 1]")
    q = lam / (n * s)
    if q > 1.0:
        raise ValueError("lam/(n s) must be <= 1")
    total = n * (n - 1) // 2
    m = int(rng.binomial(total, q))
    idx = _sample_pair_indices(n, m, rng)
    uu, vv = _decode_pair(idx, n)
    keep_g = rng.random(m) < s
    keep_h = rng.random(m) < s
    pi = rng.permutation(n)
    g_edges = [(int(u), int(v)) for u, v, k in zip(uu, vv, keep_g) if k]
    h_edges = [(int(pi[u]), int(pi[v])) for u, v, k in zip(uu, vv, keep_h) if k]
    g = SparseGraph.from_edges(n, g_edges)
    h = SparseGraph.from_edges(n, h_edges)
    return g, h, [int(x) for x in pi]


def write_graph(path: str, g: SparseGraph, meta: Optional[dict] = None):
    """Edge list, one 'u v' pair per line, vertices 0-based; a JSON sidecar
    (path + '.json') records n and any metadata (lambda, s, seed, pi_star)."""
    lines = [f"{u} {v}" for u, v in g.edges()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    side = {"n": g.n}
    if meta:
        side.update(meta)
    with open(path + ".json", "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_graph(path: str) -> tuple:
    with open(path + ".json") as fh:
        side = json.load(fh)
    edges = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u, v = line.split()
            edges.append((int(u), int(v)))
    return SparseGraph.from_edges(side["n"], edges), side
