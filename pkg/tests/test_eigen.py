import math

import numpy as np
import pytest

from treealign.eigen import (
    charlier,
    eigenfunction,
    gaussian_covariance_check,
    kl_gaussian_limit,
    mixed_moment,
    mixed_moment_limit,
    verify_decomposition,
    verify_orthogonality,
)
from treealign.models import RngStream
from treealign.series import log_phi_value
from treealign.trees import enumerate_trees, leaf, star_tree


def pois(k, lam):
    return math.exp(-lam) * lam ** k / math.factorial(k)


def test_charlier_low_orders():
    lam = 2.3
    for ell in range(6):
        assert charlier(0, ell, lam) == pytest.approx(1.0)
        # first orthonormal polynomial of the Poisson measure
        assert charlier(1, ell, lam) == pytest.approx(
            (ell - lam) / math.sqrt(lam), rel=1e-12)


def test_charlier_orthonormal_by_direct_sum():
    lam = 1.7
    cap = 120
    for a in range(5):
        for b in range(5):
            dot = math.fsum(pois(ell, lam) * charlier(a, ell, lam)
                            * charlier(b, ell, lam) for ell in range(cap))
            assert dot == pytest.approx(1.0 if a == b else 0.0, abs=1e-10)


def test_orthogonality_report_depth_one():
    rep = verify_orthogonality(1, 2.0, 6, support_cap=150)
    assert rep["residual"] < 1e-10
    assert rep["mass_ok"]
    assert rep["gram_dim"] == 6


def test_orthogonality_report_depth_two():
    # the eigenfunctions grow on heavy trees, so the residual decays much
    # more slowly than the missing probability mass
    coarse = verify_orthogonality(2, 1.5, 4, support_cap=24)
    fine = verify_orthogonality(2, 1.5, 4, support_cap=32)
    assert fine["residual"] < 5e-3
    assert fine["residual"] < coarse["residual"]
    assert 0.999 < fine["support_mass"] <= 1.0


def test_eigenfunction_trivial_index():
    # the single-vertex index gives the constant function 1
    lam = 2.0
    for t in enumerate_trees(5, max_depth=1):
        assert eigenfunction(leaf(), t, lam, 1) == pytest.approx(1.0)


def test_eigenfunction_depth_one_is_charlier():
    lam = 2.0
    for k in range(1, 5):
        for ell in range(8):
            got = eigenfunction(star_tree(k), star_tree(ell), lam, 1)
            assert got == pytest.approx(charlier(k, ell, lam), rel=1e-10)


def test_decomposition_depth_one_exact():
    pairs = [(star_tree(a), star_tree(b)) for a in range(5) for b in range(5)]
    rep = verify_decomposition(1, 2.0, 0.5, 30, pairs)
    assert rep["max_error"] < 1e-8


def test_decomposition_depth_two_within_tail():
    probes = [t for t in enumerate_trees(4, max_depth=2) if t.depth == 2]
    pairs = [(a, b) for a in probes for b in probes]
    rep = verify_decomposition(2, 2.0, 0.5, 12, pairs)
    assert rep["max_error"] <= rep["tail_bound"]


def test_mixed_moment_odd_single_index_vanishes_in_limit():
    idx = (star_tree(1), star_tree(1), star_tree(1))
    assert mixed_moment_limit(idx) == 0.0
    # finite lam error decays like 1/sqrt(lam)
    e1 = abs(mixed_moment(1, 100.0, idx))
    e2 = abs(mixed_moment(1, 400.0, idx))
    assert e1 / e2 == pytest.approx(2.0, abs=0.2)


def test_mixed_moment_pair_orthonormality_limit():
    for k in (1, 2, 3):
        idx = (star_tree(k), star_tree(k))
        assert mixed_moment_limit(idx) == pytest.approx(1.0)
        assert mixed_moment(1, 50.0, idx) == pytest.approx(1.0, abs=1e-6)
    assert mixed_moment_limit((star_tree(1), star_tree(2))) == 0.0


def test_kl_gaussian_limit_identity():
    for d in (1, 2, 3):
        rep = kl_gaussian_limit(d, 0.4)
        assert rep["difference"] <= 1e-8
        assert rep["phi_side"] == pytest.approx(
            0.5 * log_phi_value(d, 0.16), abs=1e-9)


def test_kl_gaussian_limit_rejects_bad_s():
    with pytest.raises(ValueError):
        kl_gaussian_limit(2, 1.0)
    with pytest.raises(ValueError):
        kl_gaussian_limit(0, 0.5)


def test_gaussian_covariance_small_mc():
    rng = RngStream(79, 0)
    rep = gaussian_covariance_check(1, 30.0, 0.6, 3, 4000, rng)
    # identity covariance within MC noise on each side
    assert rep["max_err_same"] < 0.15
    assert rep["max_err_cross"] < 0.15
