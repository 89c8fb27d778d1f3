"""Likelihood ratio of the correlated tree model against independence, plus
the statistics built on it: cyclic moments, KL estimates, the one-sided
likelihood test and the centered count statistic Z_S.

The depth recursion for L_d sums over pairs of injections of a common child
set into both rooted child lists. Grouping by the induced partial matching
turns this into

    L_d(t, t') = e^{lam s} (1-s)^{c+c'} * sum_{partial matchings m}
                 prod_{(i,j) in m} s L_{d-1}(t_i, t'_j) / (lam (1-s)^2)

which a subset dynamic program evaluates in O(c 2^{c'} c') per node pair.
Everything is carried in log scale; the subset DP runs in a scaled linear
domain with a log-domain fallback when child values overflow floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .trees import CanonicalTree, LabeledTree, canonicalize, star_tree
from .models import ModelParams, sample_gw, sample_correlated_pair, \
    sample_null_pair
from .series import phi_eval, log_phi_value

__all__ = [
    "psi",
    "log_psi",
    "LikelihoodEvaluator",
    "likelihood_ratio",
    "log_likelihood_ratio",
    "cyclic_moment_analytic",
    "estimate_cyclic_moment_mc",
    "estimate_kl_mc",
    "one_sided_lr_test",
    "LrTestResult",
    "gw_prob",
    "child_type_counts",
    "z_statistic",
    "z_mean_alternative",
    "pair_probability_alternative",
    "propagation_constants",
    "PropagationConstants",
    "poisson_central_moment4",
    "MomentEstimate",
]

_DEGREE_GUARD = 22

_DP_INDEX_CACHE: dict = {}


def _dp_index(ncols: int) -> list:
    """For each column subset s, the list of (j, s without j) pairs."""
    hit = _DP_INDEX_CACHE.get(ncols)
    if hit is not None:
        return hit
    size = 1 << ncols
    idx = [[] for _ in range(size)]
    for s in range(1, size):
        for j in range(ncols):
            if s & (1 << j):
                idx[s].append((j, s ^ (1 << j)))
    _DP_INDEX_CACHE[ncols] = idx
    return idx


def psi(k: int, c: int, c_prime: int, lam: float, s: float) -> float:
    """Weight of matching k children on each side when the roots have c and
    c' children: e^{lam s} s^k (1-s)^(c+c'-2k) / (lam^k k!)."""
    return math.exp(log_psi(k, c, c_prime, lam, s))


def log_psi(k: int, c: int, c_prime: int, lam: float, s: float) -> float:
    if not (0 <= k <= min(c, c_prime)):
        raise ValueError("need 0 <= k <= min(c, c')")
    if s == 0.0:
        return 0.0 if k == 0 else -math.inf
    if s == 1.0 and c + c_prime - 2 * k > 0:
        return -math.inf
    out = lam * s + k * math.log(s) - k * math.log(lam) - math.lgamma(k + 1)
    if c + c_prime - 2 * k > 0:
        out += (c + c_prime - 2 * k) * math.log(1.0 - s)
    return out


class LikelihoodEvaluator:
    """Log likelihood ratio evaluator for fixed (lam, s), with memoisation
    on canonical subtree pairs and a closed form at depth 1 (where only the
    two root degrees matter)."""

    def __init__(self, lam: float, s: float, degree_guard: int = _DEGREE_GUARD):
        if not (lam > 0):
            raise ValueError("lam must be > 0")
        if not (0.0 <= s < 1.0):
            raise ValueError("s must lie in [0, 1)")
        self.lam = lam
        self.s = s
        self.degree_guard = degree_guard
        self._d1: dict = {}
        # cross-call tables: depth-2 truncation signatures repeat heavily
        # across samples, so their values are worth keeping for the whole
        # evaluator lifetime (deeper shapes rarely recur between samples)
        self._sig2: dict = {}
        self._memo2: dict = {}
        # log of the per-match factor s / (lam (1-s)^2)
        self._log_q = math.log(s) - math.log(lam) - 2.0 * math.log1p(-s) \
            if s > 0 else -math.inf
        self._log1ms = math.log1p(-s)

    # ---- depth 1 closed form ----------------------------------------
    def _log_l1(self, c: int, c_prime: int) -> float:
        key = (c, c_prime) if c <= c_prime else (c_prime, c)
        hit = self._d1.get(key)
        if hit is not None:
            return hit
        c, c_prime = key
        # sum_k C(c,k) C(c',k) k! q^k, computed with max-term scaling
        logs = []
        for k in range(c + 1):
            lt = (math.lgamma(c + 1) - math.lgamma(k + 1) - math.lgamma(c - k + 1)
                  + math.lgamma(c_prime + 1) - math.lgamma(c_prime - k + 1)
                  + k * self._log_q)
            logs.append(lt)
        m = max(logs)
        acc = math.fsum(math.exp(x - m) for x in logs)
        out = self.lam * self.s + (c + c_prime) * self._log1ms + m + math.log(acc)
        self._d1[key] = out
        return out

    def log_ratio(self, t, t_prime, d: int) -> float:
        """log L_d(t, t'). Accepts CanonicalTree or LabeledTree."""
        if d < 0:
            raise ValueError("d must be >= 0")
        if self.s == 0.0:
            return 0.0
        ct = t if isinstance(t, CanonicalTree) else None
        ctp = t_prime if isinstance(t_prime, CanonicalTree) else None
        if ct is not None and ctp is not None:
            return self._log_canonical(ct, ctp, d, {})
        lt = t if ct is None else None
        ltp = t_prime if ctp is None else None
        if lt is not None and ltp is not None:
            return self._log_labeled(lt, ltp, d)
        # mixed input: canonicalize the labeled one
        return self._log_canonical(
            ct if ct is not None else canonicalize(lt),
            ctp if ctp is not None else canonicalize(ltp), d, {})

    def ratio(self, t, t_prime, d: int) -> float:
        lv = self.log_ratio(t, t_prime, d)
        return math.exp(lv) if lv < 700 else math.inf

    # ---- canonical-tree path -----------------------------------------
    def _log_canonical(self, a: CanonicalTree, b: CanonicalTree, d: int,
                       memo: dict) -> float:
        if d == 0:
            return 0.0
        c, cp = a.degree, b.degree
        if d == 1 or c == 0 or cp == 0:
            return self._log_l1(c, cp)
        key = (a.id, b.id, d) if a.id <= b.id else (b.id, a.id, d)
        hit = memo.get(key)
        if hit is not None:
            return hit
        ka = a.child_list()
        kb = b.child_list()
        if len(ka) > len(kb):
            ka, kb = kb, ka
        if len(ka) > self.degree_guard:
            raise RuntimeError(
                f"minimum root degree {len(ka)} exceeds the subset-DP guard "
                f"({self.degree_guard})")
        ll = [[self._log_canonical(y, x, d - 1, memo) for x in ka] for y in kb]
        out = self._combine(c, cp, ll, len(kb), len(ka))
        memo[key] = out
        return out

    # ---- labeled-tree path (local truncated ids, no global interning) --
    def _log_labeled(self, t: LabeledTree, tp: LabeledTree, d: int) -> float:
        trunc_t, ch_t, deg_t = _truncated_ids(t, d, self._sig2)
        trunc_p, ch_p, deg_p = _truncated_ids(tp, d, self._sig2)
        memo: dict = {}
        memo2 = self._memo2
        d1 = self._d1
        log_l1 = self._log_l1

        def rec(u: int, v: int, dd: int) -> float:
            # memo keys use depth-dd truncations: nothing deeper matters
            cx, cy = deg_t[u], deg_p[v]
            if dd == 0:
                return 0.0
            if dd == 1 or cx == 0 or cy == 0:
                k1 = (cx, cy) if cx <= cy else (cy, cx)
                hit = d1.get(k1)
                return hit if hit is not None else log_l1(cx, cy)
            if dd == 2:
                a, b = trunc_t[2][u], trunc_p[2][v]
                key2 = (a, b) if a <= b else (b, a)
                hit = memo2.get(key2)
                if hit is not None:
                    return hit
            else:
                key = (trunc_t[dd][u], trunc_p[dd][v], dd)
                hit = memo.get(key)
                if hit is not None:
                    return hit
            ka = ch_t[u]
            kb = ch_p[v]
            if min(cx, cy) > self.degree_guard:
                raise RuntimeError(
                    f"minimum root degree {min(cx, cy)} exceeds the "
                    f"subset-DP guard ({self.degree_guard})")
            ll = [[rec(aa, bb, dd - 1) for bb in kb] for aa in ka]
            if cx < cy:  # rows must be the larger side
                ll = [list(col) for col in zip(*ll)]
            out = self._combine(cx, cy, ll, max(cx, cy), min(cx, cy))
            if dd == 2:
                memo2[key2] = out
            else:
                memo[key] = out
            return out

        return rec(t.root, tp.root, d)

    # ---- partial-matching subset DP ------------------------------------
    def _combine(self, c: int, cp: int, ll, r: int, ncols: int) -> float:
        """log L given the matrix ll of child log-ratios (r x ncols,
        ncols = smaller side)."""
        base = self.lam * self.s + (c + cp) * self._log1ms
        if ncols == 0:
            return base
        mx = max(max(row) for row in ll)
        # the DP multiplies up to ncols matrix entries together
        if ncols * max(mx + self._log_q, 0.0) + (mx + self._log_q) < 600.0:
            # linear domain, in place: states visited in decreasing order so
            # dp[s - j] is still the previous-row value when dp[s] updates
            size = 1 << ncols
            idx = _dp_index(ncols)
            dp = [0.0] * size
            dp[0] = 1.0
            lq = self._log_q
            exp = math.exp
            for i in range(r):
                row = [exp(v + lq) for v in ll[i]]
                for s in range(size - 1, 0, -1):
                    acc = 0.0
                    for j, s0 in idx[s]:
                        acc += dp[s0] * row[j]
                    if acc:
                        dp[s] += acc
            return base + math.log(math.fsum(dp))
        # log-domain fallback for huge child ratios
        NEG = -math.inf
        size = 1 << ncols
        dp = [NEG] * size
        dp[0] = 0.0
        la = [[v + self._log_q for v in row] for row in ll]
        for i in range(r):
            row = la[i]
            ndp = dp[:]
            for sbit in range(size):
                acc = ndp[sbit]
                rem = sbit
                while rem:
                    jbit = rem & (-rem)
                    rem -= jbit
                    j = jbit.bit_length() - 1
                    prev = dp[sbit ^ jbit]
                    if prev > NEG:
                        acc = np.logaddexp(acc, prev + row[j])
                ndp[sbit] = acc
            dp = ndp
        m = max(dp)
        total = m + math.log(math.fsum(math.exp(x - m) for x in dp if x > NEG))
        return base + total

    # ---- literal double-injection sum, for cross-checks -----------------
    def log_ratio_literal(self, t: CanonicalTree, tp: CanonicalTree,
                          d: int) -> float:
        """Direct evaluation of the injection-sum recursion using psi, no
        resummation. Exponential in the degrees; testing aid only."""
        import itertools

        if d == 0:
            return 0.0
        ka = t.child_list()
        kb = tp.child_list()
        c, cp = len(ka), len(kb)
        vals = []
        for k in range(min(c, cp) + 1):
            # k! injection pairs induce the same partial matching
            lw = log_psi(k, c, cp, self.lam, self.s) + math.lgamma(k + 1)
            if lw == -math.inf:
                continue
            for rows in itertools.permutations(range(c), k):
                for cols in itertools.combinations(range(cp), k):
                    acc = lw
                    for i in range(k):
                        acc += self.log_ratio_literal(ka[rows[i]], kb[cols[i]],
                                                      d - 1)
                    vals.append(acc)
        m = max(vals)
        return m + math.log(math.fsum(math.exp(v - m) for v in vals))


def _truncated_ids(t: LabeledTree, d: int, sig2_table: Optional[dict] = None) -> tuple:
    """Ids of depth-k truncated subtree shapes, for k = 0..d. trunc[k][u]
    identifies the shape of u's subtree cut at depth k below u. Level 1 ids
    are plain degrees and level 2 ids come from sig2_table when supplied
    (both comparable across trees); deeper levels are local to this call.
    Returns (trunc, child lists, degrees)."""
    ch = t.children()
    n = t.n
    depths = t.depths()
    order = sorted(range(n), key=lambda u: depths[u], reverse=True)
    deg = [len(c) for c in ch]
    trunc: list = [[0] * n]
    if d >= 1:
        trunc.append(deg)
    if d >= 2:
        tbl = sig2_table if sig2_table is not None else {}
        cur = [0] * n
        for u in order:
            sig = tuple(sorted(deg[v] for v in ch[u]))
            hit = tbl.get(sig)
            if hit is None:
                hit = len(tbl)
                tbl[sig] = hit
            cur[u] = hit
        trunc.append(cur)
    for k in range(3, d + 1):
        table: dict = {}
        prev = trunc[k - 1]
        cur = [0] * n
        for u in order:
            sig = tuple(sorted(prev[v] for v in ch[u]))
            hit = table.get(sig)
            if hit is None:
                hit = len(table)
                table[sig] = hit
            cur[u] = hit
        trunc.append(cur)
    return trunc, ch, deg


def likelihood_ratio(t, t_prime, lam: float, s: float, d: int) -> float:
    return LikelihoodEvaluator(lam, s).ratio(t, t_prime, d)


def log_likelihood_ratio(t, t_prime, lam: float, s: float, d: int) -> float:
    return LikelihoodEvaluator(lam, s).log_ratio(t, t_prime, d)


def cyclic_moment_analytic(d: int, s: float, m: int, n_terms: int = 200) -> tuple:
    """C_{d,m} = Phi_d(s^m) with its series tail bound. Free of lam."""
    if m < 2:
        raise ValueError("m must be >= 2")
    return phi_eval(d, s ** m, n_terms)


@dataclass
class MomentEstimate:
    value: float
    stderr: float
    trials: int
    max_weight_share: float = 0.0


def estimate_cyclic_moment_mc(d: int, lam: float, s: float, m: int,
                              trials: int, rng) -> MomentEstimate:
    """Monte Carlo estimate of E0[L(T1,T2) L(T2,T3) ... L(Tm,T1)] from
    independent GW(lam)_d samples. Reports the largest single-trial share of
    the total as a heavy-tail diagnostic."""
    if m < 2:
        raise ValueError("m must be >= 2")
    ev = LikelihoodEvaluator(lam, s)
    params = ModelParams(lam=lam, s=s, d=d)
    logs = np.empty(trials)
    for i in range(trials):
        trees = [sample_gw(params, rng) for _ in range(m)]
        acc = 0.0
        for j in range(m):
            acc += ev.log_ratio(trees[j], trees[(j + 1) % m], d)
        logs[i] = acc
    mx = float(np.max(logs))
    w = np.exp(logs - mx)
    mean = float(np.mean(w))
    std = float(np.std(w, ddof=1)) / math.sqrt(trials)
    share = float(np.max(w) / np.sum(w))
    return MomentEstimate(value=math.exp(mx) * mean,
                          stderr=math.exp(mx) * std,
                          trials=trials, max_weight_share=share)


def estimate_kl_mc(d: int, lam: float, s: float, trials: int,
                   rng) -> MomentEstimate:
    """KL divergence estimate E1[log L_d] by sampling correlated pairs."""
    ev = LikelihoodEvaluator(lam, s)
    params = ModelParams(lam=lam, s=s, d=d)
    vals = np.empty(trials)
    for i in range(trials):
        t, tp, _ = sample_correlated_pair(params, rng)
        vals[i] = ev.log_ratio(t, tp, d)
    return MomentEstimate(value=float(np.mean(vals)),
                          stderr=float(np.std(vals, ddof=1)) / math.sqrt(trials),
                          trials=trials)


@dataclass
class LrTestResult:
    log_beta: float
    type_one: float
    power: float
    trials: int


def lr_test_threshold(d: int, lam: float, s: float) -> float:
    """log of the reference threshold beta = C_{d,2}^(1/16)."""
    return log_phi_value(d, s * s) / 16.0


def one_sided_lr_test(d: int, lam: float, s: float, trials: int, rng,
                      log_beta: Optional[float] = None) -> LrTestResult:
    """Empirical size and power of the test 1{L_d > beta}: `trials` pairs
    under independence and `trials` correlated pairs."""
    if log_beta is None:
        log_beta = lr_test_threshold(d, lam, s)
    ev = LikelihoodEvaluator(lam, s)
    params = ModelParams(lam=lam, s=s, d=d)
    rejections_null = 0
    for _ in range(trials):
        t, tp = sample_null_pair(params, rng)
        if ev.log_ratio(t, tp, d) > log_beta:
            rejections_null += 1
    rejections_alt = 0
    for _ in range(trials):
        t, tp, _ = sample_correlated_pair(params, rng)
        if ev.log_ratio(t, tp, d) > log_beta:
            rejections_alt += 1
    return LrTestResult(log_beta=log_beta,
                        type_one=rejections_null / trials,
                        power=rejections_alt / trials, trials=trials)


# ---------------------------------------------------------------------
# counts, tree probabilities and the Z statistic


def gw_prob(t: CanonicalTree, lam: float, d: int, _memo: Optional[dict] = None) -> float:
    """Probability that GW(lam)_d produces the unlabeled tree t
    (depth(t) <= d required)."""
    if t.depth > d:
        raise ValueError("tree deeper than d")
    if d == 0:
        return 1.0
    memo = _memo if _memo is not None else {}
    key = (t.id, d)
    hit = memo.get(key)
    if hit is not None:
        return hit
    logp = -lam
    for sub, mult in t.children:
        sub_p = gw_prob(sub, lam, d - 1, memo)
        if sub_p == 0.0:
            logp = -math.inf
            break
        logp += mult * math.log(lam * sub_p) - math.lgamma(mult + 1)
    out = math.exp(logp)
    memo[key] = out
    return out


def child_type_counts(t) -> dict:
    """Multiset of root child subtree shapes as {CanonicalTree: count}."""
    if isinstance(t, LabeledTree):
        t = canonicalize(t)
    return {sub: mult for sub, mult in t.children}


def z_statistic(t, t_prime, pairs: Iterable[tuple], lam: float, d: int) -> float:
    """Z_S for a pair of trees at depth d+1: sum over (tau, tau') in S of
    (N_tau - lam GW_d(tau)) (N'_tau' - lam GW_d(tau')). S must be a finite
    collection of canonical tree pairs of depth <= d."""
    counts = child_type_counts(t)
    counts_p = child_type_counts(t_prime)
    memo: dict = {}
    # group the centered factors to reuse the per-side sums
    total = 0.0
    for tau, tau_p in pairs:
        a = counts.get(tau, 0) - lam * gw_prob(tau, lam, d, memo)
        b = counts_p.get(tau_p, 0) - lam * gw_prob(tau_p, lam, d, memo)
        total += a * b
    return total


def pair_probability_alternative(pairs: Sequence[tuple], lam: float, s: float,
                                 d: int, trials: int, rng) -> MomentEstimate:
    """Monte Carlo estimate of P1_d(S): the chance that a correlated pair of
    depth-d trees falls in the set S of canonical pairs."""
    pair_set = {(a.id, b.id) for a, b in pairs}
    params = ModelParams(lam=lam, s=s, d=d)
    hits = 0
    for _ in range(trials):
        t, tp, _ = sample_correlated_pair(params, rng)
        key = (canonicalize(t).id, canonicalize(tp).id)
        if key in pair_set:
            hits += 1
    p = hits / trials
    return MomentEstimate(value=p,
                          stderr=math.sqrt(max(p * (1 - p), 1e-300) / trials),
                          trials=trials)


def z_mean_alternative(pairs: Sequence[tuple], lam: float, s: float, d: int,
                       p1_of_s: float) -> float:
    """E1[Z_S] = lam s P1_d(S)."""
    return lam * s * p1_of_s


@dataclass
class PropagationConstants:
    lambda_zero: float
    epsilon: float

    def sigma(self, lam: float, p0_of_s: float) -> float:
        return max(4.0 * lam * p0_of_s ** 0.25, 3.0 * lam ** 0.75)


def propagation_constants(s: float, c: float) -> PropagationConstants:
    """Constants from the one-step propagation bound: valid for
    lam >= lambda_zero(s, c), advantage epsilon(s, c), fluctuation scale
    sigma(lam, P0_d(S))."""
    if not (0 < s <= 1) or not (0 < c < 1):
        raise ValueError("need s in (0,1], c in (0,1)")
    lam0 = max(8.0 / (s * c * (1.0 - c)), (6.0 / (s * c)) ** 4)
    eps = min((s * c / 8.0) ** 4, (1.0 - c) * s * s * c * c / 16.0)
    return PropagationConstants(lambda_zero=lam0, epsilon=eps)


def poisson_central_moment4(mu: float) -> float:
    """E[(X - mu)^4] for X ~ Poisson(mu): 3 mu^2 + mu."""
    return 3.0 * mu * mu + mu
