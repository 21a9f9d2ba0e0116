import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from esqpt.hilbert import boson_ops
from esqpt.model import ModelParams, parity_operator
from esqpt.precision import Precision, to_double
from esqpt.signop import SignError, build_c, gauge_fix_doublet, matrix_sign_hermitian, matrix_sign_integral
from esqpt.spectral import solve

even_dims = st.integers(1, 50).map(lambda k: 2 * k - 1)  # cutoffs with even dimension


@given(even_dims)
def test_sign_of_quadrature_is_involution(n_max):
    c = build_c(ModelParams.dicke(1, 1.0, n_max)).matrix
    eye = np.eye(n_max + 1)
    assert np.abs(c - c.T).max() == 0.0
    assert np.abs(c @ c - eye).max() <= 1e-10
    assert abs(np.trace(c)) <= 1e-10
    # anticommutes with the boson parity, with the exact sign pattern
    p = (-1.0) ** np.arange(n_max + 1)
    pcp = p[:, None] * c * p[None, :]
    assert np.array_equal(np.sign(pcp), -np.sign(c))
    assert np.abs(pcp + c).max() <= 1e-10


@given(st.integers(1, 25).map(lambda k: 2 * k))
def test_odd_dimension_is_guarded(n_max):
    _, _, quad = boson_ops(n_max)
    with pytest.raises(SignError, match="guard"):
        matrix_sign_hermitian(quad)


@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_spectral_and_integral_routes_agree(n, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    w = rng.uniform(0.05, 3.0, size=n) * rng.choice([-1.0, 1.0], size=n)
    a = (q * w) @ q.T
    a = 0.5 * (a + a.T)
    spectral = matrix_sign_hermitian(a).matrix
    integral = matrix_sign_integral(a, tol=1e-10).matrix
    assert np.abs(spectral - integral).max() <= 1e-8


def test_sign_of_diagonal():
    assert np.array_equal(matrix_sign_hermitian(np.diag([5.0, -0.5])).matrix, np.diag([1.0, -1.0]))
    with pytest.raises(SignError, match="Hermitian"):
        matrix_sign_hermitian(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_c_lifted_anticommutes_with_parity():
    p = ModelParams.dicke(3, 1.0, 9)
    c = build_c(p).operator.to_dense()
    pi = parity_operator(p).to_dense()
    assert np.abs(pi @ c @ pi + c).max() <= 1e-12


def test_quad_elements_agree_with_double():
    p = ModelParams.dicke(2, 3.0, 11)
    c_d = build_c(p)
    c_q = build_c(p.replace(precision=Precision.QUAD))
    assert c_q.precision is Precision.QUAD
    spec = solve(p.replace(precision=Precision.QUAD))
    _, vecs = spec.refined([0, 1])
    el_q = c_q.elements(vecs, vecs)
    el_d = c_d.elements(to_double(vecs), to_double(vecs))
    assert np.abs(to_double(el_q) - el_d).max() < 1e-12


def test_gauge_fix_makes_overlap_positive():
    p = ModelParams.dicke(10, 3.0, 79)
    spec = solve(p)
    c = build_c(p)
    plus, minus = (0, 1) if spec.parity_labels[0] > 0 else (1, 0)
    vp, vm = spec.vectors([plus])[:, 0], spec.vectors([minus])[:, 0]
    fixed = gauge_fix_doublet(vp, vm, c)
    assert fixed.c >= 0 and fixed.is_doublet
    assert 1 - fixed.abs_c < 1e-3
    flipped = gauge_fix_doublet(vp, -vm, c)
    assert flipped.flipped != fixed.flipped
    assert np.allclose(flipped.v_minus, fixed.v_minus)
