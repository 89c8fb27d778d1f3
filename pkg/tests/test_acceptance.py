"""End-to-end acceptance checks for the experiment harness.

These tests pin the numerical behavior the package promises: exact
combinatorial oracles, spectral identities, Monte Carlo calibrations and the
alignment pipeline, with explicit tolerances and runtime budgets. They are
ordered cheapest first; the Monte Carlo detection curve at the end dominates
the total runtime.
"""

import math
import statistics
import time

import numpy as np
import pytest

from treealign.align import ntma, ntma2
from treealign.eigen import (
    kl_gaussian_limit,
    mixed_moment,
    mixed_moment_limit,
    verify_decomposition,
    verify_orthogonality,
)
from treealign.likelihood import (
    LikelihoodEvaluator,
    cyclic_moment_analytic,
    estimate_cyclic_moment_mc,
    estimate_kl_mc,
    one_sided_lr_test,
    pair_probability_alternative,
    poisson_central_moment4,
    z_statistic,
)
from treealign.matching import estimate_matching_rate
from treealign.models import (
    ModelParams,
    RngStream,
    sample_correlated_er,
    sample_correlated_pair,
    sample_gw,
)
from treealign.series import OTTER_ALPHA, estimate_otter, tree_counts
from treealign.trees import canonicalize, enumerate_trees, star_tree


def pois(k, lam):
    return math.exp(-lam) * lam ** k / math.factorial(k)


def test_unbounded_tree_census_exact():
    t0 = time.perf_counter()
    got = tree_counts(float("inf"), 10)
    brute = [0] * 10
    for t in enumerate_trees(10):
        brute[t.size - 1] += 1
    assert got == brute
    assert got == [1, 1, 2, 4, 9, 20, 48, 115, 286, 719]
    assert time.perf_counter() - t0 < 1.0


def test_growth_constant_estimate():
    t0 = time.perf_counter()
    est = estimate_otter(200)
    assert abs(est.value - OTTER_ALPHA) < 1e-3
    assert time.perf_counter() - t0 < 10.0


def test_charlier_gram_residual():
    t0 = time.perf_counter()
    for lam in (1.5, 4.0):
        rep = verify_orthogonality(1, lam, 9, support_cap=200)
        assert rep["residual"] <= 1e-8
    assert time.perf_counter() - t0 < 5.0


def test_eigen_decomposition_identity():
    # depth 1: exact reconstruction of the likelihood ratio on a grid
    pairs = [(star_tree(a), star_tree(b)) for a in range(7) for b in range(7)]
    rep = verify_decomposition(1, 2.0, 0.5, 40, pairs)
    assert rep["max_error"] <= 1e-8
    # depth 2: truncation error controlled by the census tail bound
    probes = [t for t in enumerate_trees(4, max_depth=2) if t.depth == 2]
    rep2 = verify_decomposition(
        2, 2.0, 0.5, 12, [(a, b) for a in probes for b in probes])
    assert rep2["max_error"] <= rep2["tail_bound"]


def test_second_cyclic_moment_independent_of_offspring_mean():
    s = 0.6
    target = 1.0 / (1.0 - s * s)
    cap = 90
    for lam in (1.5, 4.0):
        ev = LikelihoodEvaluator(lam, s)
        total = math.fsum(
            pois(c, lam) * pois(cp, lam)
            * ev.ratio(star_tree(c), star_tree(cp), 1) ** 2
            for c in range(cap) for cp in range(cap))
        assert abs(total - target) <= 1e-6


def test_cyclic_moments_monte_carlo():
    t0 = time.perf_counter()
    for m in (2, 3):
        rng = RngStream(202, m)
        est = estimate_cyclic_moment_mc(2, 1.5, 0.6, m, 200000, rng)
        target, tail = cyclic_moment_analytic(2, 0.6, m)
        assert abs(est.value - target) <= 3 * est.stderr + tail
    assert time.perf_counter() - t0 < 60.0


def test_gaussian_kl_identity():
    for d in (2, 3):
        rep = kl_gaussian_limit(d, 0.5)
        assert rep["difference"] <= 1e-6


def test_mixed_moment_error_scaling():
    # third moment of three order-1 indices decays like 1/sqrt(lam), so the
    # error against the limit halves when lam quadruples
    idx = (star_tree(1), star_tree(1), star_tree(1))
    lim = mixed_moment_limit(idx)
    e1 = abs(mixed_moment(1, 1e4, idx) - lim)
    e2 = abs(mixed_moment(1, 4e4, idx) - lim)
    assert 1.5 <= e1 / e2 <= 2.5


def test_poisson_fourth_central_moment_mc():
    mu = 3.0
    rng = RngStream(203, 0)
    x = rng.poisson(mu, 200000)
    v = (x - mu) ** 4
    mean = v.mean()
    se = v.std(ddof=1) / math.sqrt(len(v))
    assert poisson_central_moment4(mu) == pytest.approx(3 * mu * mu + mu)
    assert abs(mean - poisson_central_moment4(mu)) <= 3 * se


def test_centered_count_statistic_moments():
    lam, s, d, trials = 2.0, 0.8, 1, 100000
    stars = [star_tree(k) for k in range(3, 41)]
    pairs = [(a, b) for a in stars for b in stars]
    params0 = ModelParams(lam=lam, s=0.0, d=d + 1)
    params1 = ModelParams(lam=lam, s=s, d=d + 1)
    rng = RngStream(204, 0)
    h0 = np.empty(trials)
    for i in range(trials):
        t = canonicalize(sample_gw(params0, rng))
        tp = canonicalize(sample_gw(params0, rng))
        h0[i] = z_statistic(t, tp, pairs, lam, d)
    h1 = np.empty(trials)
    for i in range(trials):
        t, tp, _ = sample_correlated_pair(params1, rng)
        h1[i] = z_statistic(canonicalize(t), canonicalize(tp), pairs, lam, d)
    p1 = pair_probability_alternative(pairs, lam, s, d, trials,
                                      RngStream(204, 1))
    h0_se = h0.std(ddof=1) / math.sqrt(trials)
    h1_se = h1.std(ddof=1) / math.sqrt(trials)
    # independent trees: the statistic is exactly centered
    assert abs(h0.mean()) <= 3 * h0_se
    # correlated trees: mean is lam s times the event probability
    predicted = lam * s * p1.value
    combined = math.hypot(h1_se, lam * s * p1.stderr)
    assert abs(h1.mean() - predicted) <= 3 * combined


def test_matching_weight_growth_slopes():
    dense = estimate_matching_rate(
        "null", ModelParams(lam=2.2, s=0.0, d=10), range(4, 11), 50,
        RngStream(205, 0))
    assert all(n >= 50 for n in dense.n_survived)
    assert 0.55 <= dense.slope <= 0.75

    sparse = estimate_matching_rate(
        "null", ModelParams(lam=1.2, s=0.0, d=14), range(6, 15), 150,
        RngStream(205, 1))
    assert all(n >= 50 for n in sparse.n_survived)
    assert 0.05 <= sparse.slope <= 0.20

    corr = estimate_matching_rate(
        "correlated", ModelParams(lam=2.0, s=0.9, d=8), range(3, 9), 50,
        RngStream(205, 2))
    assert all(n >= 50 for n in corr.n_survived)
    assert corr.slope >= math.log(2.0 * 0.9) - 0.1


def test_one_sided_likelihood_ratio_test():
    rng = RngStream(206, 0)
    res = one_sided_lr_test(4, 4.0, 0.8, 500, rng)
    assert res.trials == 500
    assert res.type_one <= 0.05
    assert res.power >= 0.2


def test_alignment_end_to_end():
    t0 = time.perf_counter()
    n, lam, s, gamma = 1000, 2.1, 0.95, 1.5
    base_overlap, base_error = [], []
    refined_overlap, refined_error = [], []
    for seed in range(5):
        g, h, pi = sample_correlated_er(n, lam, s, RngStream(300 + seed, 0))
        r = ntma(g, h, 4, gamma, pi)
        base_overlap.append(r.overlap)
        base_error.append(r.error)
        r2 = ntma2(g, h, 5, gamma, pi)
        refined_overlap.append(r2.overlap)
        refined_error.append(r2.error)
    assert time.perf_counter() - t0 <= 900.0
    assert statistics.median(base_error) <= 0.01
    assert statistics.median(refined_error) <= 0.01
    assert statistics.median(refined_overlap) >= \
        statistics.median(base_overlap) - 0.02
    assert statistics.median(base_overlap) >= 0.03


def test_detection_phase_contrast():
    lam, trials = 4.0, 20000
    depths = [2, 3, 4, 5]
    curves = {}
    idx = 0
    for s in (0.5, 0.8):
        curves[s] = {}
        for d in depths:
            curves[s][d] = estimate_kl_mc(d, lam, s, trials,
                                          RngStream(400, idx))
            idx += 1
    # strong correlation: the divergence grows markedly with depth
    hi = curves[0.8]
    gap = hi[5].value - hi[2].value
    assert gap >= 5 * math.hypot(hi[5].stderr, hi[2].stderr)
    # weak correlation: the curve saturates, so each extra level of depth
    # moves it by no more than the Monte Carlo noise
    lo = curves[0.5]
    for i, j in zip(depths, depths[1:]):
        tol = 3 * math.hypot(lo[i].stderr, lo[j].stderr)
        assert abs(lo[j].value - lo[i].value) <= tol
