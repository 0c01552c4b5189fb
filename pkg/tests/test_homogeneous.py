import math

import numpy as np
import pytest

from liekit import homogeneous as hom
from liekit.config import DivergenceError, DomainError, InvalidInputError, UnsupportedError

from .conftest import random_sl

T_SIEGEL = 2 / math.sqrt(3)


def gram_schmidt_nak(g):
    """Oracle: Gram-Schmidt on the rows from the last one upwards."""
    d = g.shape[0]
    k = np.zeros_like(g)
    R = np.zeros_like(g)
    for i in range(d - 1, -1, -1):
        v = g[i].copy()
        for j in range(d - 1, i, -1):
            R[i, j] = v @ k[j]
            v = v - R[i, j] * k[j]
        R[i, i] = np.linalg.norm(v)
        k[i] = v / R[i, i]
    a = np.diag(R).copy()
    return R / a[None, :], a, k


def brute_box(B, multiplier):
    radius = multiplier * np.min(np.linalg.norm(B, axis=1))
    return np.floor(radius * np.linalg.norm(np.linalg.inv(B).T, axis=1) + 1e-9).astype(int)


def brute_shortest(B, multiplier):
    """Oracle: enumerate in the original basis (no preconditioning)."""
    bounds = brute_box(B, multiplier)
    grids = np.meshgrid(*[np.arange(-b, b + 1) for b in bounds], indexing="ij")
    C = np.stack([g.ravel() for g in grids], axis=1)
    C = C[np.any(C != 0, axis=1)]
    return float(np.min(np.linalg.norm(C @ B, axis=1)))


def test_iwasawa_examples():
    g = np.array([[1.0, 1.0], [0.0, 1.0]]) @ np.diag([2.0, 0.5])
    r = hom.iwasawa(g)
    np.testing.assert_allclose(r.n, [[1, 1], [0, 1]], atol=1e-15)
    np.testing.assert_allclose(r.a, [2, 0.5], atol=1e-15)
    np.testing.assert_allclose(r.k, np.eye(2), atol=1e-15)
    th = 0.7
    k = np.array([[math.cos(th), math.sin(th)], [-math.sin(th), math.cos(th)]])
    r = hom.iwasawa(k)
    np.testing.assert_allclose(r.n, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(r.a, [1, 1], atol=1e-15)
    np.testing.assert_allclose(r.k, k, atol=1e-15)


def test_iwasawa_random_sl3(rng):
    G = np.stack([random_sl(rng, 3) for _ in range(1000)])
    r = hom.iwasawa(G)
    assert np.max(np.abs(r.matrix() - G)) <= 1e-12 * max(1.0, np.max(np.abs(G)))
    assert np.max(np.abs(np.linalg.det(r.k) - 1)) <= 1e-12
    assert np.max(np.abs(np.swapaxes(r.k, 1, 2) @ r.k - np.eye(3))) <= 1e-12
    assert np.max(np.abs(np.prod(r.a, axis=1) - 1)) <= 1e-12
    for i in range(0, 1000, 97):
        n, a, k = gram_schmidt_nak(G[i])
        np.testing.assert_allclose(r.n[i], n, atol=1e-10)
        np.testing.assert_allclose(r.a[i], a, rtol=1e-10)
        np.testing.assert_allclose(r.k[i], k, atol=1e-10)


def test_iwasawa_errors():
    with pytest.raises(InvalidInputError):
        hom.iwasawa(np.diag([2.0, 2.0]))
    r = hom.iwasawa(np.diag([2.0, 2.0]), rescale=True)
    np.testing.assert_allclose(r.a, [1, 1])
    with pytest.raises(DomainError):
        hom.iwasawa(np.zeros((2, 2)), rescale=True)


def test_haar_exponents():
    assert hom.fit_haar_exponents(2).exponents == (0,)
    assert hom.fit_haar_exponents(3).exponents == (1, 1)
    for d in (2, 3, 4):
        fit = hom.fit_haar_exponents(d)
        assert fit.residual <= 1e-6 and fit.spread <= 1e-6
    # different sample points, same answer
    alt = hom.fit_haar_exponents(3, seed=7)
    assert alt.exponents == (1, 1) and np.max(np.abs(np.subtract(alt.raw, (1, 1)))) <= 1e-6


def test_haar_exponents_match_root_count():
    # left translation scales n_ij by a_i/a_j; balancing gives (k-1)(d-k+1) - 1
    for d in (2, 3, 4):
        expected = tuple((k - 1) * (d - k + 1) - 1 for k in range(2, d + 1))
        assert hom.fit_haar_exponents(d).exponents == expected


def u(x):
    return np.array([[1.0, x], [0.0, 1.0]])


@pytest.mark.parametrize("g0", [np.eye(2), u(0.3), np.diag([1.3, 1 / 1.3]), u(-0.7) @ np.diag([0.8, 1.25])])
def test_haar_invariance_nak2(g0):
    rep = hom.haar_invariance_check("nak2", hom.nak2_density(), hom.nak2_test_function, g0, hom.DEFAULT_BOXES["nak2"], 64)
    assert abs(rep.lhs - rep.rhs) <= 2 * rep.error_estimate
    if np.array_equal(g0, np.eye(2)):
        assert rep.lhs == rep.rhs


@pytest.mark.parametrize("g0", [np.diag([2.0, 0.5]), u(0.2), np.array([[1.0, 0.0], [0.3, 1.0]])])
def test_haar_invariance_abc(g0):
    rep = hom.haar_invariance_check("abc", hom.abc_density, hom.abc_test_function, g0, hom.DEFAULT_BOXES["abc"], 64)
    assert abs(rep.lhs - rep.rhs) <= 2 * rep.error_estimate


def test_haar_wrong_density_is_detected():
    # with the wrong exponent the discrepancy is far outside the estimate
    rep = hom.haar_invariance_check("nak2", hom.nak2_density(1), hom.nak2_test_function, np.diag([1.3, 1 / 1.3]), hom.DEFAULT_BOXES["nak2"], 64)
    assert abs(rep.lhs - rep.rhs) > 10 * rep.error_estimate


def test_haar_support_escape():
    with pytest.raises(DomainError):
        hom.haar_invariance_check("nak2", hom.nak2_density(), hom.nak2_test_function, u(2.5), hom.DEFAULT_BOXES["nak2"], 32)


def test_haar_product_measure_factorizes():
    box = hom.DEFAULT_BOXES["nak2"]

    def f(g):
        c = hom.CHARTS["nak2"].from_matrix(g)
        return hom._bump(c[..., 0]) * hom._bump(np.log(c[..., 1])) * (2 + np.sin(c[..., 2]) ** 2)

    full = hom.haar_invariance_check("nak2", hom.nak2_density(), f, np.eye(2), box, 64).rhs
    x = np.linspace(-1, 1, 4001)
    fx = np.trapezoid(hom._bump(x), x)
    lb = np.linspace(-1, 1, 4001)
    fb = np.trapezoid(hom._bump(lb) * np.exp(lb), lb)  # db = b dlog b, exponent 0
    fk = 2.5  # mean of 2 + sin^2 over K with mass 1
    assert full == pytest.approx(fx * fb * fk, rel=1e-4)


def test_siegel_volume_d2():
    vol = hom.siegel_volume(hom.SiegelParams(), 2)
    assert vol.tail / vol.value < 0.01
    assert vol.value + vol.tail == pytest.approx(T_SIEGEL, rel=1e-12)
    diffs = np.abs(np.diff(vol.sequence))
    assert np.all(diffs[1:] <= diffs[:-1] * 0.75)


def test_siegel_volume_d3_closed_form():
    vol = hom.siegel_volume(hom.SiegelParams(), 3)
    assert vol.value + vol.tail == pytest.approx((T_SIEGEL**2 / 2) ** 2, rel=1e-12)


def test_siegel_volume_monotone_and_scaling():
    base = hom.siegel_volume(hom.SiegelParams(), 2).value
    assert hom.siegel_volume(hom.SiegelParams(0.7), 2).value >= base
    assert hom.siegel_volume(hom.SiegelParams(0.5, 1.5), 2).value >= base
    assert hom.siegel_volume(hom.SiegelParams(1.0), 2).value == pytest.approx(2 * base, rel=1e-14)


def test_siegel_volume_divergence_and_params():
    with pytest.raises(DivergenceError):
        hom.siegel_volume(hom.SiegelParams(), 2, exponents=[-1])
    with pytest.raises(InvalidInputError):
        hom.SiegelParams(0.4)
    with pytest.raises(InvalidInputError):
        hom.siegel_volume(hom.SiegelParams(), 4)


def test_shortest_vector_examples():
    assert hom.shortest_vector(np.eye(2)).norm == 1.0
    sv = hom.shortest_vector(np.diag([0.1, 10.0]))
    np.testing.assert_array_equal(sv.vector, [0.1, 0.0])
    assert sv.norm == 0.1


def test_shortest_vector_vs_bruteforce(rng):
    checked = 0
    for _ in range(30):
        B = random_sl(rng, 3)
        if np.prod(2 * brute_box(B, 3.0) + 1) > 1e6:
            continue  # very skewed basis, oracle box too large
        checked += 1
        sv = hom.shortest_vector(B)
        assert sv.norm == pytest.approx(brute_shortest(B, 3.0), rel=1e-12)
        np.testing.assert_allclose(np.array(sv.coefficients) @ B, sv.vector, atol=1e-12)
    assert checked >= 20


def test_shortest_vector_tie_break():
    # +-e1, +-e2 all have norm 1; e2 wins (lexicographically smallest normalized coefficients)
    assert hom.shortest_vector(np.eye(2)).coefficients == (0, 1)


def test_shortest_vector_rejects_large_dim():
    with pytest.raises(UnsupportedError):
        hom.shortest_vector(np.eye(7))


def test_reduce_examples():
    red = hom.reduce_basis(np.eye(3))
    np.testing.assert_array_equal(red.U, np.eye(3))
    red = hom.reduce_basis(np.array([[2.0, 0.0], [0.0, 0.5]]))
    np.testing.assert_allclose(red.basis[-1], [0.0, 0.5])


def check_reduced(B, red):
    U = red.U
    assert np.issubdtype(U.dtype, np.integer)
    assert round(abs(np.linalg.det(U.astype(float)))) == 1
    np.testing.assert_allclose(U.astype(float) @ B, red.basis, atol=1e-12)
    assert abs(abs(np.linalg.det(red.basis)) - abs(np.linalg.det(B))) <= 1e-10
    assert hom.in_siegel_set(hom.iwasawa(red.basis, rescale=True), 0.5, T_SIEGEL, 1e-9)
    assert np.linalg.norm(red.basis[-1]) == pytest.approx(hom.shortest_vector(B).norm, rel=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_reduce_random(rng, d):
    for _ in range(20):
        B = random_sl(rng, d)
        check_reduced(B, hom.reduce_basis(B))


def test_reduce_idempotent(rng):
    for d in (2, 3):
        for _ in range(20):
            red = hom.reduce_basis(random_sl(rng, d))
            again = hom.reduce_basis(red.basis)
            np.testing.assert_array_equal(again.U, np.eye(d, dtype=int))


def test_reduce_skewed_and_non_unimodular(rng):
    B = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]) @ np.array([[1, 5, 7], [0, 1, 3], [0, 0, 1]], float)
    check_reduced(B, hom.reduce_basis(B))
    B = 3.0 * random_sl(rng, 3)
    check_reduced(B, hom.reduce_basis(B))


def test_complete_unimodular(rng):
    for _ in range(50):
        c = rng.integers(-20, 20, size=4)
        g = math.gcd(*map(int, c))
        if g == 0:
            continue
        c = c // g
        W = hom._complete_unimodular(c)
        assert list(W[-1]) == list(c)
        assert round(abs(np.linalg.det(W.astype(float)))) == 1


def test_mahler():
    fam = [np.diag([1 / n, n]) for n in range(1, 21)]
    for n in range(1, 21):
        assert hom.mahler_margin(fam[:n]) == 1 / n
    assert hom.mahler_margin([np.eye(2)]) == 1.0
    margin = hom.mahler_margin(fam[:10])
    assert not hom.is_precompact(margin, 0.5)
    with pytest.raises(InvalidInputError):
        hom.mahler_margin([np.diag([2.0, 1.0])])


def test_mahler_random_family(rng):
    fam = [B for B in (random_sl(rng, 3) for _ in range(30)) if np.prod(2 * brute_box(B, 3.0) + 1) <= 1e6][:10]
    assert hom.mahler_margin(fam) == pytest.approx(min(brute_shortest(B, 3.0) for B in fam), rel=1e-12)
