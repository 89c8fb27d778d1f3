"""Tree matching weights.

W_0 = 1 and W_d(t, t') is the best total obtained by matching children of
the two roots injectively and summing W_{d-1} over matched pairs, i.e. a
linear assignment problem at every level. W_d(t, t') > 0 exactly when both
trees reach depth d. Values are exact integers.

Weights are computed on canonical forms and memoized process-wide, which is
what makes the all-pairs usage in graph alignment affordable: deep subtree
shapes repeat massively across a sparse graph.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .trees import CanonicalTree, LabeledTree, canonicalize, prune_to_depth
from .models import ModelParams, RngStream, sample_gw_conditioned, \
    sample_correlated_pair, sample_shifted_pair

__all__ = [
    "lap_max",
    "matching_weight",
    "edge_matching_weight",
    "subtree_away_from",
    "estimate_matching_rate",
    "RateEstimate",
    "clear_weight_memo",
]

_SUBSET_DP_LIMIT = 13


def lap_max(score) -> tuple:
    """Maximum-total partial matching of a rectangular score matrix with
    non-negative entries. Returns (pairs, value) where pairs is a list of
    (row, col). Exact for integer scores."""
    a = [list(row) for row in score]
    r = len(a)
    c = len(a[0]) if r else 0
    if any(len(row) != c for row in a):
        raise ValueError("score matrix must be rectangular")
    if any(x < 0 for row in a for x in row):
        raise ValueError("scores must be non-negative")
    if r == 0 or c == 0:
        return [], 0
    transposed = c > r
    if transposed:
        a = [list(col) for col in zip(*a)]
        r, c = c, r
    if c <= _SUBSET_DP_LIMIT:
        pairs, value = _lap_subset_dp(a, r, c)
    else:
        pairs, value = _lap_scipy(a)
    if transposed:
        pairs = [(j, i) for i, j in pairs]
    return sorted(pairs), value


def _lap_subset_dp(a, r, c):
    """dp over column subsets; rows may stay unmatched (partial matching).
    layers[i][S] = best value matching rows < i into column set S."""
    size = 1 << c
    layers = [[0] * size]
    for i in range(r):
        prev = layers[-1]
        cur = prev[:]
        row = a[i]
        for s in range(size):
            best = prev[s]
            rem = s
            while rem:
                jbit = rem & (-rem)
                rem -= jbit
                j = jbit.bit_length() - 1
                cand = prev[s ^ jbit] + row[j]
                if cand > best:
                    best = cand
            cur[s] = best
        layers.append(cur)
    full = size - 1
    value = layers[r][full]
    pairs = []
    s = full
    for i in range(r - 1, -1, -1):
        if layers[i + 1][s] == layers[i][s]:
            continue
        rem = s
        while rem:
            jbit = rem & (-rem)
            rem -= jbit
            j = jbit.bit_length() - 1
            if a[i][j] > 0 and layers[i][s ^ jbit] + a[i][j] == layers[i + 1][s]:
                pairs.append((i, j))
                s ^= jbit
                break
    return pairs, value


def _lap_scipy(a):
    from scipy.optimize import linear_sum_assignment

    arr = np.asarray(a, dtype=np.float64)
    rows, cols = linear_sum_assignment(arr, maximize=True)
    pairs = []
    value = 0
    for i, j in zip(rows, cols):
        w = a[i][j]
        if w > 0:  # zero-score matches are as good as unmatched
            pairs.append((int(i), int(j)))
            value += w
    return pairs, value


# value-only subset DP used in the inner loop (no assignment recovery)
def _lap_value(a, r, c) -> int:
    if c <= _SUBSET_DP_LIMIT:
        size = 1 << c
        dp = [0] * size
        for i in range(r):
            row = a[i]
            ndp = dp[:]
            for s in range(size):
                best = dp[s]
                rem = s
                while rem:
                    jbit = rem & (-rem)
                    rem -= jbit
                    j = jbit.bit_length() - 1
                    cand = dp[s ^ jbit] + row[j]
                    if cand > best:
                        best = cand
                ndp[s] = best
            dp = ndp
        return max(dp)
    return _lap_scipy(a)[1]


_WEIGHT_MEMO: dict = {}
_WEIGHT_LOCK = threading.Lock()


def clear_weight_memo():
    with _WEIGHT_LOCK:
        _WEIGHT_MEMO.clear()


def _weight(d: int, a: CanonicalTree, b: CanonicalTree) -> int:
    if d == 0:
        return 1
    if a.depth < d or b.depth < d:
        return 0
    key = (d, a.id, b.id) if a.id <= b.id else (d, b.id, a.id)
    hit = _WEIGHT_MEMO.get(key)
    if hit is not None:
        return hit
    ka = [sub for sub, m in a.children if sub.depth >= d - 1 for _ in range(m)]
    kb = [sub for sub, m in b.children if sub.depth >= d - 1 for _ in range(m)]
    if len(ka) > len(kb):
        ka, kb = kb, ka
    mat = [[_weight(d - 1, y, x) for x in ka] for y in kb]
    val = _lap_value(mat, len(kb), len(ka))
    with _WEIGHT_LOCK:
        _WEIGHT_MEMO[key] = val
    return val


def _as_canonical(t) -> CanonicalTree:
    if isinstance(t, CanonicalTree):
        return t
    if isinstance(t, LabeledTree):
        return canonicalize(t)
    raise TypeError("expected CanonicalTree or LabeledTree")


def matching_weight(t, t_prime, d: int) -> int:
    """W_d(t, t'). Positive iff both trees have a vertex at depth d;
    invariant under pruning to depth d."""
    if d < 0:
        raise ValueError("d must be >= 0")
    return _weight(d, _as_canonical(t), _as_canonical(t_prime))


def subtree_away_from(t: LabeledTree, u: int, v: int) -> LabeledTree:
    """Subtree of t rooted at u when the edge {u, v} is removed (v must be a
    neighbor of u; parent/child orientation does not matter)."""
    ch = t.children()
    if not (t.parent[u] == v or u in ch[v] or t.parent[v] == u):
        raise ValueError("u and v must be adjacent")
    # BFS from u ignoring v
    remap = {u: 0}
    parent: list = [None]
    queue = [u]
    while queue:
        x = queue.pop()
        nbrs = list(ch[x])
        if t.parent[x] is not None:
            nbrs.append(t.parent[x])
        for y in nbrs:
            if y == v or y in remap:
                continue
            remap[y] = len(parent)
            parent.append(remap[x])
            queue.append(y)
    return LabeledTree(parent=parent, root=0)


def edge_matching_weight(t: LabeledTree, u: int, v: int,
                         t_prime: LabeledTree, u_prime: int, v_prime: int,
                         d: int) -> int:
    """W_d between the subtrees hanging from the oriented edges v->u and
    v'->u' (the subtree containing u once {u,v} is cut, rooted at u)."""
    su = subtree_away_from(t, u, v)
    sp = subtree_away_from(t_prime, u_prime, v_prime)
    return matching_weight(su, sp, d)


@dataclass
class RateEstimate:
    """Per-depth mean of log W_d over surviving samples and the OLS slope of
    that mean against d (the exponential growth rate of the weight)."""

    depths: list
    mean_log_w: list
    stderr: list
    n_survived: list
    slope: float
    slope_stderr: float
    intercept: float


def _ols(xs, ys) -> tuple:
    n = len(xs)
    xbar = sum(xs) / n
    ybar = sum(ys) / n
    sxx = sum((x - xbar) ** 2 for x in xs)
    sxy = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    if sxx == 0:
        return float("nan"), ybar, float("nan")
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    if n > 2:
        resid = [y - (intercept + slope * x) for x, y in zip(xs, ys)]
        s2 = sum(r * r for r in resid) / (n - 2)
        se = math.sqrt(s2 / sxx)
    else:
        se = float("nan")
    return slope, intercept, se


def estimate_matching_rate(model: str, params: ModelParams,
                           d_values: Sequence[int], trials: int,
                           rng: np.random.Generator,
                           max_rejects: int = 100000) -> RateEstimate:
    """Monte Carlo estimate of the matching rate: for each depth d, sample
    `trials` surviving tree pairs from the model ('null', 'correlated' or
    'shifted'), record mean log W_d, then fit mean against d by OLS.

    Survival conditioning: null pairs are drawn from the pruned conditioned
    law directly; correlated pairs are rejection-sampled on the intersection
    tree reaching depth d; shifted pairs on both trees surviving.
    """
    if model not in ("null", "correlated", "shifted"):
        raise ValueError("unknown model " + repr(model))
    if trials < 1:
        raise ValueError("trials must be >= 1")
    depths, means, errs, surv = [], [], [], []
    for d in d_values:
        logs = []
        p = ModelParams(lam=params.lam, s=params.s, d=int(d),
                        delta=min(params.delta, int(d)))
        rejects = 0
        while len(logs) < trials:
            if model == "null":
                t = sample_gw_conditioned(p, rng)
                tp = sample_gw_conditioned(p, rng)
            elif model == "correlated":
                t, tp, tau = sample_correlated_pair(p, rng)
                if tau.depth() < d:
                    rejects += 1
                    if rejects > max_rejects:
                        raise RuntimeError("rejection sampling budget exhausted")
                    continue
            else:
                t, tp = sample_shifted_pair(p, rng)
                if t.depth() < d or tp.depth() < d:
                    rejects += 1
                    if rejects > max_rejects:
                        raise RuntimeError("rejection sampling budget exhausted")
                    continue
            pt = prune_to_depth(t, d)
            ptp = prune_to_depth(tp, d)
            w = matching_weight(pt, ptp, d)
            logs.append(math.log(w))
            # deep supercritical trees share almost no subtree pairs across
            # samples, so the memo only costs memory here
            clear_weight_memo()
        m = sum(logs) / len(logs)
        var = sum((x - m) ** 2 for x in logs) / max(len(logs) - 1, 1)
        depths.append(int(d))
        means.append(m)
        errs.append(math.sqrt(var / len(logs)))
        surv.append(len(logs))
    slope, intercept, se = _ols(depths, means)
    return RateEstimate(depths=depths, mean_log_w=means, stderr=errs,
                        n_survived=surv, slope=slope, slope_stderr=se,
                        intercept=intercept)
