from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cxhess import symfun
from cxhess.errors import ConeViolationError, DomainError


def brute_symmetric(lam, k):
    return sum(np.prod([lam[i] for i in I]) for I in combinations(range(len(lam)), k))


def cone_samples(rng, count, n, m):
    lam = rng.standard_normal((6 * count, n)) + rng.uniform(0, 2, (6 * count, 1))
    lam = lam[symfun.in_cone(lam, m, certified=True)]
    return lam[:count]


finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@given(arrays(float, st.integers(1, 6), elements=finite))
def test_symmetric_all_matches_brute_force(lam):
    s = symfun.symmetric_all(lam)
    for k in range(len(lam) + 1):
        ref = brute_symmetric(lam, k) if k else 1.0
        assert s[k] == pytest.approx(ref, rel=1e-10, abs=1e-9)


def test_generating_polynomial():
    rng = np.random.default_rng(3)
    lam = rng.standard_normal(5)
    t = 0.37
    s = symfun.symmetric_all(lam)
    assert np.sum(s * t ** np.arange(6)) == pytest.approx(np.prod(1 + lam * t), rel=1e-13)


def test_batched_matches_single():
    rng = np.random.default_rng(0)
    lam = rng.standard_normal((7, 4))
    batch = symfun.elementary_symmetric(lam, 2)
    single = [symfun.elementary_symmetric(row, 2) for row in lam]
    assert np.array_equal(batch, single)


def test_minors_match_removal():
    lam = np.array([1.0, -2.0, 3.5, 0.25])
    minors = symfun.symmetric_minors(lam, 2)
    for i in range(4):
        assert minors[i] == pytest.approx(brute_symmetric(np.delete(lam, i), 2))
    assert np.all(symfun.symmetric_minors(lam, 4) == 0)


def test_spectrum_validation():
    with pytest.raises(DomainError):
        symfun.Spectrum(np.array([1.0, np.nan]), 1)
    with pytest.raises(DomainError):
        symfun.Spectrum(np.array([1.0, 2.0]), 3)
    with pytest.raises(DomainError):
        symfun.elementary_symmetric(np.ones(3), 4)


def test_cone_membership():
    assert symfun.in_cone(np.array([1.0, 1.0, -0.4]), 2)
    assert not symfun.in_cone(np.array([1.0, 1.0, -0.4]), 3)
    assert symfun.first_cone_failure(np.array([1.0, 1.0, -0.4]), 3) == 3
    # boundary point: strict test may accept rounding noise, certified does not
    assert not symfun.in_cone(np.array([1.0, -1.0 + 1e-15]), 1, certified=True)


def test_hessian_f_rejects_outside_cone():
    with pytest.raises(ConeViolationError) as exc:
        symfun.hessian_f(symfun.Spectrum(np.array([1.0, -2.0]), 2))
    assert exc.value.index == 1


@pytest.mark.parametrize("n,m", [(2, 1), (3, 2), (4, 3), (5, 5)])
def test_partials_match_finite_differences(n, m):
    rng = np.random.default_rng(n * 10 + m)
    lam = cone_samples(rng, 5, n, m)
    for row in lam:
        F, f = symfun.f_and_partials(row, m)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1e-6
            Fp, _ = symfun.f_and_partials(row + e, m)
            Fm, _ = symfun.f_and_partials(row - e, m)
            assert f[i] == pytest.approx((Fp - Fm) / 2e-6, rel=1e-5, abs=1e-8)


def test_f_floor_gives_nan():
    F, f = symfun.f_and_partials(np.array([[1.0, 0.0]]), 2)
    assert np.isnan(F[0]) and np.all(np.isnan(f[0]))


def test_maclaurin_constant_is_sharp():
    for n, m in [(2, 1), (3, 2), (4, 4)]:
        lam = np.full(n, 2.0)
        det_root = np.prod(lam) ** (1 / n)
        sm = symfun.elementary_symmetric(lam, m) ** (1 / m)
        assert det_root == pytest.approx(symfun.maclaurin_constant(n, m) * sm)


def test_mixed_symmetric_reduces():
    rng = np.random.default_rng(1)
    lam = rng.standard_normal(4)
    for m in range(1, 5):
        for k in range(m + 1):
            val = symfun.mixed_symmetric(lam, lam, k, m)
            assert val == pytest.approx(comb(m, k) * symfun.elementary_symmetric(lam, m))


def test_mixed_symmetric_matches_polarization():
    rng = np.random.default_rng(2)
    a, b = rng.standard_normal(3), rng.standard_normal(3)
    m = 2
    # S_m(x a + y b) = sum_k mixed(k) x^k y^(m-k)
    x, y = 0.7, -1.3
    total = sum(symfun.mixed_symmetric(a, b, k, m) * x ** k * y ** (m - k) for k in range(m + 1))
    assert total == pytest.approx(symfun.elementary_symmetric(x * a + y * b, m))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.data())
def test_garding_random(n, data):
    m = data.draw(st.integers(1, n))
    seed = data.draw(st.integers(0, 2 ** 16))
    rng = np.random.default_rng(seed)
    pair = cone_samples(rng, 2, n, m)
    if len(pair) < 2:
        return
    lhs, rhs = symfun.garding_pairing(pair[0], pair[1], m)
    assert lhs >= rhs - 1e-12 * abs(lhs)


def test_wang_bound_positive():
    lam = np.array([3.0, 2.0, -0.5])
    lhs, rhs = symfun.wang_product_bound(symfun.Spectrum(lam, 2))
    assert lhs > 0 and rhs > 0
