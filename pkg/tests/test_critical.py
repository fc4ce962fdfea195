import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brwcrit.corpus import example2, example4, example4_certificate, single_site, tree_line, two_site
from brwcrit.critical import (Certificate, check_certificate, class_data, condU_holds,
                              critical_behavior_probe, critical_report, lambda_s,
                              lambda_w_bracket, lambda_w_finite, part_a_diagnostic,
                              spectral_radius)
from brwcrit.graph import WeightedKernel

from conftest import dense_kernels, positive_dense


def block_kernel(rng, sizes, p_link=0.5):
    """Block upper-triangular kernel with irreducible diagonal blocks."""
    n = sum(sizes)
    a = np.zeros((n, n))
    starts = np.cumsum([0] + sizes)
    for b, m in enumerate(sizes):
        s = slice(starts[b], starts[b + 1])
        a[s, s] = positive_dense(rng, m)
        for c in range(b + 1, len(sizes)):
            if rng.random() < p_link:
                a[starts[b], starts[c]] = rng.uniform(0.1, 2.0)
    return WeightedKernel.from_dense(a), starts


def test_spectral_radius_matches_eigvals():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = positive_dense(rng, rng.integers(1, 9))
        res = spectral_radius(a)
        assert res.rho == pytest.approx(max(abs(np.linalg.eigvals(a))), rel=1e-10)
        assert res.lower <= res.rho <= res.upper


def test_spectral_radius_of_periodic_and_acyclic():
    assert spectral_radius(two_site(3.0).dense()).rho == pytest.approx(3.0)
    assert spectral_radius(np.triu(np.ones((4, 4)), 1)).rho == 0.0


@pytest.mark.parametrize("K, x, expect", [
    (single_site(2.0), 0, 0.5),
    (two_site(2.0), 1, 0.5),
    (WeightedKernel.from_dense([[0.0, 1.0], [0.0, 0.0]]), 0, math.inf),
])
def test_lambda_s_small(K, x, expect):
    assert lambda_s(K, x) == pytest.approx(expect)
    assert lambda_s(K, x, method="phi", tol=1e-10) == pytest.approx(expect, rel=1e-8)


def test_lambda_s_tree_line():
    K = tree_line(4)
    lam = lambda_s(K, 0, w=K.window(512))
    assert lam == pytest.approx(1 / (2 * math.sqrt(3)), abs=0.01)
    # windows only lose paths, so the estimate decreases toward the limit
    assert lam <= lambda_s(K, 0, w=K.window(64))
    assert lam >= 1 / (2 * math.sqrt(3))


def test_lambda_s_methods_agree():
    rng = np.random.default_rng(2)
    for _ in range(5):
        K = WeightedKernel.from_dense(positive_dense(rng, rng.integers(3, 6)))
        a = lambda_s(K, 0)
        b = lambda_s(K, 0, method="phi", n_max=2048, tol=1e-10)
        assert b == pytest.approx(a, rel=1e-6)


def test_min_rule_on_block_kernels():
    rng = np.random.default_rng(4)
    for _ in range(10):
        K, starts = block_kernel(rng, [2, 3, 2])
        a = K.dense()
        _, data = class_data(K, 0)
        reach = [d for d in data if d.reachable]
        expect = min(1 / max(abs(np.linalg.eigvals(a[np.ix_(d.sites, d.sites)]))) for d in reach)
        assert lambda_w_finite(K, 0) == pytest.approx(expect, rel=1e-12)
        assert lambda_w_finite(K, 0) <= lambda_s(K, 0) + 1e-15


def test_lambda_w_without_cycles():
    K = WeightedKernel.from_dense([[0.0, 1.0], [0.0, 0.0]])
    assert lambda_w_finite(K, 0) == math.inf
    with pytest.raises(ValueError):
        lambda_w_finite(tree_line(3), 0)


@given(dense_kernels(), st.floats(0.1, 10.0))
def test_scaling_covariance(K, c):
    for x in range(K.n_sites):
        a, b = lambda_w_finite(K, x), lambda_w_finite(K.scaled(c), x)
        if math.isfinite(a):
            assert b == pytest.approx(a / c, rel=1e-9)
        else:
            assert b == math.inf


def test_nonlinear_certificate_single_site():
    K = single_site(1.0)
    assert check_certificate(Certificate([0.5], 2.0), K).holds
    bad = check_certificate(Certificate([0.6], 2.0), K)
    assert not bad.holds and bad.site == 0
    assert bad.slack == pytest.approx(1.2 - 1.5)
    with pytest.raises(ValueError):
        check_certificate(Certificate([1.0], 2.0), K)


def test_linear_and_iterated_certificates():
    K = two_site(2.0)
    assert check_certificate(Certificate([1.0, 1.0], 0.5, "linear", 3), K).holds
    assert not check_certificate(Certificate([1.0, 1.0], 0.49, "linear", 3), K).holds
    assert check_certificate(Certificate([0.3, 0.3], 1.0, "iterated", 4), K).holds


def test_example4_certificate_is_tight():
    res = check_certificate(Certificate(example4_certificate, 1.0, sites=300), example4(),
                            tol_cert=0.0)
    assert res.holds
    assert res.slack >= 0.0


def test_part_a_diagnostic():
    cert = Certificate(example4_certificate, 1.0, sites=50)
    assert part_a_diagnostic(example4(), cert) == pytest.approx(1 / 50)
    assert part_a_diagnostic(two_site(), Certificate([0.3, 0.2], 1.0)) == pytest.approx(0.2)


def test_condU():
    K = tree_line(3)
    res = condU_holds(K, 0.1, 10, K.window(40))
    assert res.holds and res.witness == 1
    osc = example2(oscillating=True)
    # runs of weight 1 keep T^N_x below (2 - 1/2)^N
    res = condU_holds(osc, 0.5, 20, osc.window(40), mw_minus=2.0)
    assert not res.holds
    with pytest.raises(ValueError):
        condU_holds(K, 0.0, 5, K.window(5))


def test_probes_on_two_site():
    K = two_site(2.0)
    at = critical_behavior_probe(K, 0, "weak", 1.0)
    assert at.verdict == "extinct" and at.lam == pytest.approx(0.5)
    above = critical_behavior_probe(K, 0, "weak", 1.01)
    assert above.verdict == "survives"
    assert critical_behavior_probe(K, 0, "strong", 1.0).verdict == "extinct"


def test_bracket_on_finite_kernels():
    rng = np.random.default_rng(6)
    for _ in range(5):
        K = WeightedKernel.from_dense(positive_dense(rng, rng.integers(3, 7)))
        br = lambda_w_bracket(K, 0)
        assert br.contains(lambda_w_finite(K, 0))
        assert br.width <= 1e-3


def test_bracket_on_tree_line():
    K = tree_line(3)
    br = lambda_w_bracket(K, 0, K.window(256))
    assert br.contains(1 / 3)
    assert br.width <= 0.05


def test_report_json():
    doc = critical_report(two_site(2.0), 0).to_json()
    assert doc["lambda_w_exact"] == pytest.approx(0.5)
    assert doc["lambda_s"] == pytest.approx(0.5)
    assert doc["lambda_w_lower"] <= 0.5 <= doc["lambda_w_upper"]
    doc = critical_report(WeightedKernel.from_dense([[0.0, 1.0], [0.0, 0.0]]), 0).to_json()
    assert doc["lambda_s"] == "inf"


def test_large_reversible_windows_use_symmetric_solver():
    K = example4()
    res = spectral_radius(K.matrix(K.window(512)))
    assert res.method == "symmetrized"
    small = spectral_radius(K.matrix(K.window(12)).toarray())
    assert res.rho == pytest.approx(small.rho, rel=1e-12)
    # a window of the infinite tree line stays below its limit 2 sqrt(3)
    T = tree_line(4)
    assert spectral_radius(T.matrix(T.window(2048))).rho < 2 * math.sqrt(3)


def test_symmetrization_matches_general_solver():
    rng = np.random.default_rng(8)
    from brwcrit.critical import _symmetrized
    for _ in range(10):
        n = 30
        up, down = rng.uniform(0.1, 2, n - 1), rng.uniform(0.1, 2, n - 1)
        a = np.diag(up, 1) + np.diag(down, -1)
        sym = _symmetrized(a)
        assert sym is not None
        assert np.linalg.eigvalsh(sym.toarray())[-1] == pytest.approx(
            max(abs(np.linalg.eigvals(a))), rel=1e-10)
        a[0, 2] = a[2, 0] = 1.0
        a[0, 1] *= 2.0  # breaks the cycle condition on 0 -> 1 -> 2 -> 0
        assert _symmetrized(a) is None
