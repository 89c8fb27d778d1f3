"""Orthogonal decomposition of the likelihood ratio.

The likelihood ratio of correlated depth-d trees diagonalises as

    L_d(t, t') = sum_{alpha in X_d} s^(|alpha|-1) f_{d,alpha}(t) f_{d,alpha}(t')

where the family f_{d,alpha} is orthonormal for the Galton-Watson measure.
At depth 1 the functions are the Charlier orthogonal polynomials of the
Poisson law, evaluated through the generating function
e^{-x sqrt(lam)} (1 + x/sqrt(lam))^ell. Deeper functions follow the
recursion

    f_{d+1,beta}(N) = sqrt(prod_alpha beta_alpha!) [x^beta]
        e^{-sqrt(lam) x_o} prod_{t} (1 + sum_alpha x_alpha f_{d,alpha}(t) / sqrt(lam))^{N_t}

with x_o the variable of the single-vertex index: the first-moment identity
sum_t GW_d(t) f_{d,alpha}(t) = 1{alpha single vertex} collapses the
exponential prefactor to one variable, so every evaluation is a finite
polynomial computation (no truncation of X_d is needed inside f itself).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .trees import CanonicalTree, LabeledTree, canonicalize, enumerate_trees, leaf
from .series import phi_eval, tree_counts
from .likelihood import LikelihoodEvaluator, gw_prob, child_type_counts
from .models import ModelParams, sample_correlated_pair

__all__ = [
    "charlier",
    "eigenfunction",
    "verify_orthogonality",
    "charlier_dual_residual",
    "verify_decomposition",
    "mixed_moment",
    "mixed_moment_limit",
    "gaussian_covariance_check",
    "kl_gaussian_limit",
]


def _poisson_pmf(k: int, lam: float) -> float:
    return math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1))


def charlier(order: int, ell: int, lam: float) -> float:
    """Orthonormal Charlier polynomial of the Poisson(lam) law:
    sqrt(order!) [x^order] e^{-x sqrt(lam)} (1 + x/sqrt(lam))^ell."""
    if order < 0 or ell < 0:
        raise ValueError("order and ell must be >= 0")
    rl = math.sqrt(lam)
    total = 0.0
    for j in range(min(order, ell) + 1):
        total += (math.comb(ell, j) * rl ** (-j)
                  * (-rl) ** (order - j) / math.factorial(order - j))
    return math.sqrt(math.factorial(order)) * total


# ---------------------------------------------------------------------
# sparse truncated multivariate polynomials: dict of exponent tuples


def _poly_mul(a: dict, b: dict, caps: tuple) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            if any(x > c for x, c in zip(e, caps)):
                continue
            out[e] = out.get(e, 0.0) + ca * cb
    return out


def _poly_pow(base: dict, n: int, caps: tuple) -> dict:
    nvars = len(caps)
    result = {(0,) * nvars: 1.0}
    sq = base
    while n:
        if n & 1:
            result = _poly_mul(result, sq, caps)
        n >>= 1
        if n:
            sq = _poly_mul(sq, sq, caps)
    return result


_EIGEN_MEMO: dict = {}


def eigenfunction(alpha: CanonicalTree, t: CanonicalTree, lam: float,
                  d: int) -> float:
    """f_{d,alpha}(t) for alpha, t in X_d. Exact recursive evaluation."""
    if alpha.depth > d or t.depth > d:
        raise ValueError("alpha and t must have depth <= d")
    if alpha.size == 1:
        return 1.0
    if d == 1:
        return charlier(alpha.degree, t.degree, lam)
    key = (alpha.id, t.id, d, lam)
    hit = _EIGEN_MEMO.get(key)
    if hit is not None:
        return hit

    rl = math.sqrt(lam)
    # variables: distinct child indices of alpha; ensure the single-vertex
    # index is present (the exponential prefactor lives on it)
    lf = leaf()
    var_types = [sub for sub, _ in alpha.children]
    if lf not in var_types:
        var_types = [lf] + var_types
    caps = []
    beta = dict(alpha.children)
    for v in var_types:
        caps.append(beta.get(v, 0))
    caps = tuple(caps)
    nvars = len(var_types)
    leaf_pos = var_types.index(lf)

    # product over child types of t
    poly = {(0,) * nvars: 1.0}
    for sub, mult in t.children:
        base = {(0,) * nvars: 1.0}
        for i, v in enumerate(var_types):
            if caps[i] == 0:
                continue
            fv = eigenfunction(v, sub, lam, d - 1)
            if fv != 0.0:
                e = tuple(1 if j == i else 0 for j in range(nvars))
                base[e] = fv / rl
        poly = _poly_mul(poly, _poly_pow(base, mult, caps), caps)

    # exponential prefactor on the single-vertex variable
    if caps[leaf_pos] > 0:
        expf = {}
        for k in range(caps[leaf_pos] + 1):
            e = tuple(k if j == leaf_pos else 0 for j in range(nvars))
            expf[e] = (-rl) ** k / math.factorial(k)
        poly = _poly_mul(poly, expf, caps)

    coeff = poly.get(caps, 0.0)
    norm = 1.0
    for sub, mult in alpha.children:
        norm *= math.factorial(mult)
    out = math.sqrt(norm) * coeff
    _EIGEN_MEMO[key] = out
    return out


# ---------------------------------------------------------------------
# support enumeration with Galton-Watson mass control


def _support_with_mass(d: int, lam: float, max_size: int) -> tuple:
    """(trees of depth <= d and size <= max_size, their GW probabilities,
    total mass)."""
    trees = enumerate_trees(max_size, d, size_guard=max(max_size, 16))
    memo: dict = {}
    probs = [gw_prob(t, lam, d, memo) for t in trees]
    return trees, probs, math.fsum(probs)


def verify_orthogonality(d: int, lam: float, max_index_size: int,
                         support_cap: int = 200,
                         mass_target: float = 1.0 - 1e-8) -> dict:
    """Gram matrix of {f_{d,alpha}: |alpha| <= max_index_size} under the
    GW(lam)_d law, summed over an enumerated support. Returns the maximal
    residual |Gram - I| together with the achieved support mass. The row of
    the single-vertex index doubles as the first-moment identity check.

    d = 1 sums over root degrees up to support_cap; d = 2 enumerates trees
    up to size support_cap (raise it if the mass diagnostic is short).
    """
    if d not in (1, 2):
        raise ValueError("exhaustive verification supports d in {1, 2}")
    if d == 1:
        orders = list(range(max_index_size))  # |alpha| = order + 1
        pmf = [_poisson_pmf(k, lam) for k in range(support_cap + 1)]
        mass = math.fsum(pmf)
        vals = [[charlier(a, ell, lam) for ell in range(support_cap + 1)]
                for a in orders]
        gram = [[math.fsum(pmf[i] * vals[a][i] * vals[b][i]
                           for i in range(support_cap + 1))
                 for b in range(len(orders))] for a in range(len(orders))]
    else:
        indices = enumerate_trees(max_index_size, 2,
                                  size_guard=max(max_index_size, 16))
        support, probs, mass = _support_with_mass(2, lam, support_cap)
        vals = [[eigenfunction(a, t, lam, 2) for t in support]
                for a in indices]
        gram = [[math.fsum(p * va * vb for p, va, vb in zip(probs, vals[i], vals[j]))
                 for j in range(len(indices))] for i in range(len(indices))]
    n = len(gram)
    resid = max(abs(gram[i][j] - (1.0 if i == j else 0.0))
                for i in range(n) for j in range(n))
    return {"d": d, "lam": lam, "max_index_size": max_index_size,
            "residual": resid, "support_mass": mass,
            "mass_ok": mass >= mass_target, "gram_dim": n}


def charlier_dual_residual(lam: float, max_order: int, ells: Sequence[int]) -> float:
    """Residual of the dual identity sum_a f_a(l) f_a(l') = 1{l=l'}/pmf(l),
    truncated at max_order."""
    worst = 0.0
    for l in ells:
        for lp in ells:
            acc = math.fsum(charlier(a, l, lam) * charlier(a, lp, lam)
                            for a in range(max_order + 1))
            target = (1.0 / _poisson_pmf(l, lam)) if l == lp else 0.0
            scale = max(1.0, abs(target))
            worst = max(worst, abs(acc - target) / scale)
    return worst


def verify_decomposition(d: int, lam: float, s: float, max_index_size: int,
                         pairs: Sequence[tuple]) -> dict:
    """Compare L_d(t,t') against the truncated eigen-sum
    sum_{|alpha| <= K} s^(|alpha|-1) f_alpha(t) f_alpha(t') on the given
    pairs. Reports the worst absolute error and a tail bound
    sum_{n > K} A_{d,n} s^(n-1) * max_alpha |f_alpha(t) f_alpha(t')|."""
    indices = enumerate_trees(max_index_size, d,
                              size_guard=max(max_index_size, 16))
    ev = LikelihoodEvaluator(lam, s)
    horizon = max_index_size + 60
    counts = tree_counts(d, horizon)
    max_err = 0.0
    max_tail = 0.0
    details = []
    for t, tp in pairs:
        t = t if isinstance(t, CanonicalTree) else canonicalize(t)
        tp = tp if isinstance(tp, CanonicalTree) else canonicalize(tp)
        fmax = 0.0
        acc = 0.0
        for a in indices:
            fa = eigenfunction(a, t, lam, d)
            fb = eigenfunction(a, tp, lam, d)
            fmax = max(fmax, abs(fa * fb))
            acc += s ** (a.size - 1) * fa * fb
        exact = ev.ratio(t, tp, d)
        tail = fmax * math.fsum(counts[n - 1] * s ** (n - 1)
                                for n in range(max_index_size + 1, horizon + 1))
        err = abs(acc - exact)
        max_err = max(max_err, err)
        max_tail = max(max_tail, tail)
        details.append((t.encoding, tp.encoding, exact, acc, err, tail))
    return {"d": d, "lam": lam, "s": s, "max_index_size": max_index_size,
            "max_error": max_err, "tail_bound": max_tail, "pairs": details}


# ---------------------------------------------------------------------
# mixed moments and the Gaussian limit


def mixed_moment(d: int, lam: float, indices: Sequence[CanonicalTree],
                 support_cap: int = 0) -> float:
    """E_GW[prod_i f_{d,alpha_i}(T)] over an enumerated support.
    support_cap = 0 picks a default window."""
    if d == 1:
        cap = support_cap or int(lam + 40.0 * math.sqrt(lam) + 60)
        orders = [a.degree for a in indices]
        return math.fsum(
            _poisson_pmf(ell, lam)
            * math.prod(charlier(a, ell, lam) for a in orders)
            for ell in range(cap + 1))
    if d == 2:
        cap = support_cap or 24
        support, probs, mass = _support_with_mass(2, lam, cap)
        return math.fsum(
            p * math.prod(eigenfunction(a, t, lam, 2) for a in indices)
            for p, t in zip(probs, support))
    raise ValueError("mixed_moment supports d in {1, 2}")


def _coeff_exp_cross(cvec: Sequence[int]) -> float:
    """[prod_i x_i^{c_i}] exp(sum_{i<j} x_i x_j): sum over symmetric integer
    matrices with zero diagonal and row sums c of prod 1/m_ij!."""
    n = len(cvec)
    pairs = list(itertools.combinations(range(n), 2))

    def rec(k: int, rem: tuple) -> float:
        if k == len(pairs):
            return 1.0 if all(r == 0 for r in rem) else 0.0
        i, j = pairs[k]
        total = 0.0
        top = min(rem[i], rem[j])
        for m in range(top + 1):
            nr = list(rem)
            nr[i] -= m
            nr[j] -= m
            total += rec(k + 1, tuple(nr)) / math.factorial(m)
        return total

    return rec(0, tuple(cvec))


def mixed_moment_limit(indices: Sequence[CanonicalTree]) -> float:
    """lam -> infinity limit of the mixed moment: the Gaussian (Wick-type)
    value prod over child types alpha of
    sqrt(prod_i c_i!) [prod x_i^{c_i}] e^{sum_{i<j} x_i x_j},
    where c_i is the multiplicity of alpha inside index i."""
    types = sorted({sub for a in indices for sub, _ in a.children},
                   key=lambda t: t.encoding)
    out = 1.0
    for tau in types:
        cvec = [dict(a.children).get(tau, 0) for a in indices]
        coef = _coeff_exp_cross(cvec)
        norm = math.sqrt(math.prod(math.factorial(c) for c in cvec))
        out *= norm * coef
    return out


def gaussian_covariance_check(d: int, lam: float, s: float,
                              max_index_size: int, trials: int, rng) -> dict:
    """Monte Carlo covariance of the standardised count vectors
    y_alpha = (1/sqrt(lam)) sum_tau f_{d,alpha}(tau) (N_tau - lam GW_d(tau))
    for a correlated pair at depth d+1. The limit predicts
    E[y y^T] = I and E[y y'^T] = diag(s^{|alpha|})."""
    indices = [a for a in enumerate_trees(max_index_size, d,
                                          size_guard=max(max_index_size, 16))]
    k = len(indices)
    params = ModelParams(lam=lam, s=s, d=d + 1)
    rl = math.sqrt(lam)
    lf = leaf()
    sum_yy = np.zeros((k, k))
    sum_yyp = np.zeros((k, k))
    f_cache: dict = {}

    def yvec(tree) -> np.ndarray:
        counts = child_type_counts(tree)
        y = np.zeros(k)
        for i, a in enumerate(indices):
            acc = 0.0
            for tau, njt in counts.items():
                ck = (a.id, tau.id)
                fv = f_cache.get(ck)
                if fv is None:
                    fv = eigenfunction(a, tau, lam, d)
                    f_cache[ck] = fv
                acc += njt * fv
            if a is lf:
                acc -= lam  # first-moment identity centers the trivial index
            y[i] = acc / rl
        return y

    for _ in range(trials):
        t, tp, _ = sample_correlated_pair(params, rng)
        y = yvec(t)
        yp = yvec(tp)
        sum_yy += np.outer(y, y)
        sum_yyp += np.outer(y, yp)
    cov_same = sum_yy / trials
    cov_cross = sum_yyp / trials
    target_same = np.eye(k)
    target_cross = np.diag([s ** a.size for a in indices])
    return {
        "indices": [a.encoding for a in indices],
        "cov_same": cov_same,
        "cov_cross": cov_cross,
        "max_err_same": float(np.max(np.abs(cov_same - target_same))),
        "max_err_cross": float(np.max(np.abs(cov_cross - target_cross))),
        "trials": trials,
    }


def kl_gaussian_limit(d: int, s: float, max_index_size: int = 20,
                      n_terms: int = 400) -> dict:
    """Large-lam limit of the KL divergence at depth d, both ways:
    -1/2 sum_{alpha in X_{d-1}} log(1 - s^(2|alpha|)) and
    1/2 log Phi_d(s^2). Returns both with tail diagnostics."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if not (0.0 <= s < 1.0):
        raise ValueError("s must lie in [0, 1)")
    counts = tree_counts(d - 1, max_index_size)
    side_sum = -0.5 * math.fsum(
        counts[n - 1] * math.log1p(-(s ** (2 * n)))
        for n in range(1, max_index_size + 1))
    # crude tail: -log(1-x) <= x/(1-x), counts bounded by unrestricted ones
    full = tree_counts(d - 1, max_index_size + 60)
    tail = 0.5 * math.fsum(
        full[n - 1] * (s ** (2 * n)) / (1.0 - s * s)
        for n in range(max_index_size + 1, max_index_size + 61))
    value, phi_tail = phi_eval(d, s * s, n_terms)
    side_phi = 0.5 * math.log(value)
    return {"d": d, "s": s, "sum_side": side_sum, "sum_tail": tail,
            "phi_side": side_phi, "phi_tail": phi_tail,
            "difference": abs(side_sum - side_phi)}
