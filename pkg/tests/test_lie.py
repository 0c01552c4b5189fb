import warnings

import numpy as np
import pytest

from liekit.config import AccuracyError, InvalidInputError, SolvabilityError
from liekit.lie import (
    LieBasis,
    RankWarning,
    bch_truncated,
    bracket,
    closure_check,
    derived_series,
    group_commutator_limit_check,
    invariant_complement,
    invariant_hermitian_form,
    lie_kolchin_triangularize,
    orthogonal_constraints,
    sl_constraints,
    so2_quadrature,
    subdiagonal_residual,
    tangent_algebra,
)
from liekit.linalg import mat_exp, mat_log

from .conftest import well_conditioned


def E(i, j, d=2):
    M = np.zeros((d, d))
    M[i, j] = 1.0
    return M


def sl2_basis():
    return LieBasis.from_matrices([np.diag([1.0, -1.0]), E(0, 1), E(1, 0)])


def test_bracket_examples(rng):
    np.testing.assert_array_equal(bracket(E(0, 1), E(1, 0)), np.diag([1.0, -1.0]))
    X, Y, Z = (rng.normal(size=(3, 3)) for _ in range(3))
    assert np.all(bracket(X, X) == 0)
    jac = bracket(X, bracket(Y, Z)) + bracket(Y, bracket(Z, X)) + bracket(Z, bracket(X, Y))
    assert np.max(np.abs(jac)) <= 1e-12
    np.testing.assert_allclose(bracket(2 * X + Y, Z), 2 * bracket(X, Z) + bracket(Y, Z), atol=1e-13)
    np.testing.assert_allclose(bracket(X, Y), -bracket(Y, X), atol=0)
    with pytest.raises(InvalidInputError):
        bracket(X, np.eye(2))


def test_bch_commuting_is_sum():
    A, B = np.diag([0.1, -0.2]), np.diag([0.3, 0.05])
    for k in (1, 2, 3, 4):
        np.testing.assert_array_equal(bch_truncated(A, B, k).value, A + B)


def test_bch_order_two_example():
    eps = 0.1
    A, B = eps * E(0, 1), eps * E(1, 0)
    expected = eps * (E(0, 1) + E(1, 0)) + 0.5 * eps**2 * np.diag([1.0, -1.0])
    np.testing.assert_allclose(bch_truncated(A, B, 2).value, expected, atol=1e-16)


def bch_slope(rng, order, trials=5):
    rs = np.array([0.2, 0.1, 0.05, 0.025])
    slopes = []
    for _ in range(trials):
        A0, B0 = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
        A0, B0 = A0 / np.linalg.norm(A0), B0 / np.linalg.norm(B0)
        errs = []
        for r in rs:
            A, B = r * A0, r * B0
            errs.append(np.linalg.norm(mat_log(mat_exp(A) @ mat_exp(B)) - bch_truncated(A, B, order).value))
        slopes.append(np.polyfit(np.log(rs), np.log(errs), 1)[0])
    return min(slopes)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_bch_error_slope(rng, order):
    assert bch_slope(rng, order) >= order + 0.8


def test_bch_rejects_bad_order_and_warns():
    with pytest.raises(InvalidInputError):
        bch_truncated(np.eye(2), np.eye(2), 5)
    with pytest.warns(RuntimeWarning):
        bch_truncated(np.eye(2), np.eye(2), 2)


def test_group_commutator_limits():
    A, B = E(0, 1), E(1, 0)
    prev = None
    for n in (32, 64, 128):
        prod, comm = group_commutator_limit_check(A, B, n)
        e1 = np.linalg.norm(prod - mat_exp(A + B))
        e2 = np.linalg.norm(comm - mat_exp(bracket(A, B)))
        if prev is not None:
            assert 1.7 <= prev[0] / e1 <= 2.3
            assert 1.7 <= prev[1] / e2 <= 2.3
        prev = (e1, e2)
    D1, D2 = np.diag([0.3, -0.1]), np.diag([0.5, 0.2])
    np.testing.assert_allclose(group_commutator_limit_check(D1, D2, 7)[0], mat_exp(D1 + D2), atol=1e-10)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_tangent_algebras_closed(d):
    sl = tangent_algebra(sl_constraints(d))
    so = tangent_algebra(orthogonal_constraints(d))
    assert sl.dim == d * d - 1 and so.dim == d * (d - 1) // 2
    assert closure_check(sl).closed and closure_check(so).closed
    assert all(abs(np.trace(X)) < 1e-12 for X in sl.elements)
    assert all(np.max(np.abs(X + X.T)) < 1e-12 for X in so.elements)


def test_tangent_algebra_empty_constraints():
    assert tangent_algebra([], dim=3).dim == 9


def test_tangent_algebra_dependent_constraints():
    c = sl_constraints(2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert tangent_algebra(c + c).dim == 3
    with pytest.warns(RankWarning):
        tangent_algebra([np.eye(2), np.eye(2) + 1e-8 * E(0, 1)])


def test_closure_structure_constants():
    res = closure_check(sl2_basis())
    assert res.closed
    C = np.asarray(res.structure_constants)
    # [h, e] = 2e, [h, f] = -2f, [e, f] = h
    assert C[0, 1, 1] == pytest.approx(2) and C[0, 2, 2] == pytest.approx(-2) and C[1, 2, 0] == pytest.approx(1)


def test_closure_witness():
    res = closure_check(LieBasis.from_matrices([E(0, 0), E(0, 1) + E(1, 0)]))
    assert not res.closed and res.witness is not None and res.residual > 1e-9


def test_derived_series_examples():
    upper = LieBasis.from_matrices([E(0, 0), E(0, 1), E(1, 1)])
    assert derived_series(upper) == [3, 1, 0]
    assert derived_series(sl2_basis()) == [3, 3]
    assert derived_series(LieBasis.from_matrices([E(0, 0, 3), E(1, 1, 3)])) == [2, 0]


def test_liebasis_rejects_dependent_and_roundtrips():
    with pytest.raises(InvalidInputError):
        LieBasis.from_matrices([E(0, 1), 2 * E(0, 1)])
    b = sl2_basis()
    b2 = LieBasis.from_json(b.to_json())
    assert all(np.array_equal(x, y) for x, y in zip(b.elements, b2.elements))


def test_kolchin_upper_triangular_input():
    X = np.triu(np.arange(1.0, 10.0).reshape(3, 3))
    g = lie_kolchin_triangularize([X, np.triu(np.ones((3, 3)))])
    assert subdiagonal_residual(g, X) <= 1e-8


@pytest.mark.parametrize("d", [3, 4])
def test_kolchin_random_conjugates(rng, d):
    for _ in range(10):
        X, Y = np.triu(rng.normal(size=(d, d))), np.triu(rng.normal(size=(d, d)))
        h = well_conditioned(rng, d)
        hi = np.linalg.inv(h)
        Xc, Yc = h @ X @ hi, h @ Y @ hi
        g = lie_kolchin_triangularize([Xc, Yc])
        for M in (Xc, Yc):
            assert subdiagonal_residual(g, M) <= 1e-8
            T = g @ M @ np.linalg.inv(g)
            assert np.allclose(np.sort_complex(np.diag(T)), np.sort_complex(np.linalg.eigvals(M)), atol=1e-7)


def test_kolchin_rejects_sl2():
    with pytest.raises(SolvabilityError):
        lie_kolchin_triangularize(sl2_basis())


def test_invariant_form_trivial_and_standard():
    quad = so2_quadrature(16)
    np.testing.assert_allclose(invariant_hermitian_form(quad, lambda g: np.eye(3)).gram, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(invariant_hermitian_form(so2_quadrature(256), lambda g: g).gram, np.eye(2), atol=1e-12)


def test_invariant_form_conjugated(rng):
    for _ in range(5):
        S = rng.normal(size=(2, 2)) + 2 * np.eye(2)
        Si = np.linalg.inv(S)
        form = invariant_hermitian_form(so2_quadrature(256), lambda k: S @ k @ Si)
        closed = np.linalg.norm(S) ** 2 / 2 * Si.T @ Si
        np.testing.assert_allclose(form.gram, closed, atol=1e-10 * np.linalg.norm(closed))
        for _, h in so2_quadrature(256)[::17]:
            R = S @ h @ Si
            assert np.linalg.norm(R.conj().T @ form.gram @ R - form.gram) <= 1e-10 * np.linalg.norm(closed)
        # with ||S||_F^2 = 2 the form is (S^-1)^* S^-1 on the nose
        Sn = S * np.sqrt(2) / np.linalg.norm(S)
        Sni = np.linalg.inv(Sn)
        fn = invariant_hermitian_form(so2_quadrature(256), lambda k: Sn @ k @ Sni)
        np.testing.assert_allclose(fn.gram, Sni.T @ Sni, atol=1e-10)


def test_invariant_form_rejects_bad_weights():
    with pytest.raises(InvalidInputError):
        invariant_hermitian_form([(0.5, np.eye(2))], lambda g: g)
    with pytest.raises(AccuracyError):
        invariant_hermitian_form([(1.0, np.eye(2))], lambda g: np.zeros((2, 2)) + 1.0)


def test_invariant_complement_examples(rng):
    from liekit.lie import HermitianForm

    std = HermitianForm(2, np.eye(2))
    (c,) = invariant_complement(std, [np.array([1.0, 0.0])])
    assert abs(c[0]) < 1e-15 and abs(abs(c[1]) - 1) < 1e-15
    assert invariant_complement(std, [np.array([1.0, 0.0]), np.array([0.0, 1.0])]) == []

    S = rng.normal(size=(2, 2)) + 2 * np.eye(2)
    Si = np.linalg.inv(S)
    rep = lambda k: S @ k @ Si
    form = invariant_hermitian_form(so2_quadrature(256), rep)
    # the complex eigenlines of rho(SO(2)) are invariant lines
    _, V = np.linalg.eig(rep(so2_quadrature(8)[1][1]))
    (w,) = invariant_complement(form, [V[:, 0]])
    for _, k in so2_quadrature(12):
        Rw = rep(k) @ w
        assert np.linalg.norm(Rw - (np.vdot(w, Rw) / np.vdot(w, w)) * w) <= 1e-9
