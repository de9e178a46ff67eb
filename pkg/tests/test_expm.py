import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import catalog_matrix
from polyproc.expm import apply_semigroup, expm, expm_dense, ode_oracle
from polyproc.generator import GeneratorMatrix, build_matrix
from polyproc.polybasis import PolyVector, constant, enumerate_basis, from_terms, monomial


def _matrix(entries):
    entries = np.asarray(entries, dtype=float)
    return GeneratorMatrix(enumerate_basis(1, entries.shape[0] - 1), entries)


def test_zero_matrix_gives_identity():
    for t in (0.0, 1.0, -3.0):
        np.testing.assert_array_equal(expm(np.zeros((4, 4)), t).matrix, np.eye(4))


def test_time_zero_is_exact_identity():
    A = catalog_matrix("bates", 3)
    np.testing.assert_array_equal(expm(A, 0.0).matrix, np.eye(len(A.basis)))


def test_nilpotent_example():
    np.testing.assert_allclose(expm(np.array([[0.0, 0.0], [1.0, 0.0]]), 2.0).matrix, [[1, 0], [2, 1]], rtol=1e-15)


def test_cir_m2_against_rk4():
    A = catalog_matrix("cir", 2)
    E = expm(A, 1.0).matrix
    for i in range(3):
        col = ode_oracle(A, 1.0, PolyVector(A.basis, np.eye(3)[i]), steps=10_000).coeffs
        np.testing.assert_allclose(E[i], col, rtol=1e-9, atol=1e-12)


def test_non_finite_input_is_rejected():
    with pytest.raises(ValueError):
        expm(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        expm(np.eye(2), math.inf)
    with pytest.raises(ValueError):
        expm_dense(np.ones((2, 3)))


def test_overflow_is_reported():
    with pytest.raises(FloatingPointError):
        expm(np.array([[1000.0]]), 1000.0)


@pytest.mark.parametrize("scale", [1e-3, 0.5, 4.0, 40.0])
def test_against_scipy(rng, scale):
    a = rng.normal(size=(12, 12)) * scale / 12
    ours = expm_dense(a).matrix
    ref = scipy.linalg.expm(a)
    assert np.abs(ours - ref).max() <= 1e-13 * 12 * np.abs(ref).max()


@pytest.mark.parametrize("name", ["cir", "jacobi", "heston", "bates2f"])
def test_catalog_against_scipy(name):
    A = catalog_matrix(name, 4)
    for t in (0.3, 2.0, -1.0):
        ref = scipy.linalg.expm(t * A.dense())
        np.testing.assert_allclose(expm(A, t).matrix, ref, rtol=1e-11, atol=1e-12 * np.abs(ref).max())


def test_scaling_is_used_for_large_norms():
    res = expm(catalog_matrix("cir", 5), 20.0)
    assert res.scaling > 0
    assert res.norm > 5.37


def test_lower_triangular_stays_lower_triangular(rng):
    a = np.tril(rng.normal(size=(8, 8)))
    E = expm(a, 1.7).matrix
    assert np.abs(np.triu(E, 1)).max() <= 1e-12
    E = expm(catalog_matrix("cir", 6), 3.0).matrix
    assert np.abs(np.triu(E, 1)).max() <= 1e-12


def test_random_lower_triangular_rk4_agreement(rng):
    a = _matrix(np.tril(rng.normal(size=(5, 5))))
    f = PolyVector(a.basis, rng.normal(size=5))
    np.testing.assert_allclose(apply_semigroup(a, 1.0, f).coeffs, ode_oracle(a, 1.0, f, 10_000).coeffs,
                               rtol=1e-9, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["cir", "vasicek", "jacobi", "heston", "bates", "exp_levy"]),
       st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_semigroup_property(name, t, s):
    A = catalog_matrix(name, 4)
    ts = expm(A, t + s).matrix
    prod = expm(A, t).matrix @ expm(A, s).matrix
    assert np.abs(ts - prod).max() <= 1e-10 * (1 + np.abs(ts).sum(axis=1).max())


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["cir", "vasicek", "jacobi", "heston", "bates"]), st.floats(0.0, 2.0))
def test_group_property(name, t):
    A = catalog_matrix(name, 4)
    np.testing.assert_allclose(expm(A, t).matrix @ expm(A, -t).matrix, np.eye(len(A.basis)), atol=1e-9)


def test_constant_is_preserved(all_models):
    for name, model in all_models.items():
        A = build_matrix(model.spec, 3)
        one = constant(A.basis, 1.0)
        np.testing.assert_allclose(apply_semigroup(A, 1.3, one).coeffs, one.coeffs, atol=1e-15, err_msg=name)


def test_brownian_second_moment():
    A = catalog_matrix("brownian", 2)
    for t in (0.1, 1.0, 7.5):
        out = apply_semigroup(A, t, monomial(A.basis, (2,)))
        np.testing.assert_allclose(out.coeffs, [t, 0.0, 1.0], rtol=1e-15)


def test_cir_mean_closed_form():
    b, beta = 0.1, -0.5
    A = catalog_matrix("cir", 1, b=b, beta=beta, sigma=0.3)
    t = 0.7
    out = apply_semigroup(A, t, monomial(A.basis, (1,)))
    e = math.exp(beta * t)
    np.testing.assert_allclose(out.coeffs, [b * (e - 1) / beta, e], rtol=1e-14)


def test_ode_oracle_trivial_cases():
    zero = _matrix(np.zeros((3, 3)))
    f = from_terms(zero.basis, {(0,): 1.0, (2,): -2.0})
    np.testing.assert_array_equal(ode_oracle(zero, 5.0, f, 3).coeffs, f.coeffs)
    nil = _matrix([[0.0, 0.0], [1.0, 0.0]])
    out = ode_oracle(nil, 2.0, monomial(nil.basis, (1,)), steps=1)
    np.testing.assert_allclose(out.coeffs, [2.0, 1.0], rtol=1e-15)
    with pytest.raises(ValueError):
        ode_oracle(nil, 1.0, monomial(nil.basis, (1,)), steps=0)


def test_basis_mismatch_is_rejected():
    A = catalog_matrix("cir", 3)
    with pytest.raises(ValueError, match="basis"):
        apply_semigroup(A, 1.0, monomial(enumerate_basis(1, 2), (1,)))
    with pytest.raises(ValueError, match="basis"):
        ode_oracle(A, 1.0, monomial(enumerate_basis(1, 2), (1,)))


def test_sparse_input_is_exponentiated_densely():
    A = catalog_matrix("heston", 31)
    assert A.is_sparse
    f = monomial(A.basis, (0, 1))
    v = apply_semigroup(A, 0.5, f)
    b, beta = 0.04, 2.0
    e = math.exp(-beta * 0.5)
    assert v.terms() == pytest.approx({(0, 0): b * (1 - e) / beta, (0, 1): e}, rel=1e-12)


def test_ode_oracle_step_matches_classical_stages(rng):
    a = _matrix(np.tril(rng.normal(size=(4, 4))))
    y = rng.normal(size=4)
    h = 0.3
    mat = a.dense()
    k1 = y @ mat
    k2 = (y + 0.5 * h * k1) @ mat
    k3 = (y + 0.5 * h * k2) @ mat
    k4 = (y + h * k3) @ mat
    expected = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    np.testing.assert_allclose(ode_oracle(a, h, PolyVector(a.basis, y), steps=1).coeffs, expected, rtol=1e-14)


def test_group_identity_error_tracks_conditioning():
    # e^{-tA} grows like e^{15 t} for bates2f at m = 5, so the product error scales with the two norms
    A = catalog_matrix("bates2f", 5)
    E, F = expm(A, 2.0).matrix, expm(A, -2.0).matrix
    err = np.abs(E @ F - np.eye(len(A.basis))).max()
    assert err <= 1e-14 * np.abs(E).sum(axis=1).max() * np.abs(F).sum(axis=1).max()
