import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from esqpt.hilbert import HermitianOperator
from esqpt.model import ModelParams, build_hamiltonian, parity_operator
from esqpt.precision import Precision, quad_context, to_double
from esqpt.spectral import (
    SpectralError,
    convergence_check,
    diagonalize,
    eigenspace_window,
    load_decomposition,
    lowest_levels,
    pair_doublets,
    save_decomposition,
    solve,
)


def _uncoupled_levels(p):
    b = p.basis
    return np.sort(p.omega * b.occupations() + p.omega0 * b.magnetizations())


@given(
    st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.integers(1, 6), st.integers(1, 10).map(lambda k: 2 * k + 1)
)
def test_uncoupled_spectrum(omega, omega0, n_atoms, n_max):
    p = ModelParams(omega, omega0, 0.0, n_atoms, n_max)
    spec = solve(p)
    assert np.abs(spec.energies - _uncoupled_levels(p)).max() <= 1e-12 * max(1, spec.spectral_norm)


@given(st.integers(1, 5), st.floats(0.0, 4.0), st.integers(2, 8).map(lambda k: 2 * k + 1))
def test_matches_full_dense_solver(n_atoms, ratio, n_max):
    p = ModelParams.dicke(n_atoms, ratio, n_max)
    spec = solve(p)
    h = build_hamiltonian(p).to_dense()
    assert np.allclose(spec.energies, np.linalg.eigvalsh(h), atol=1e-10 * max(1, spec.spectral_norm))


def test_eigenvectors_orthonormal_with_definite_parity():
    p = ModelParams.dicke(3, 2.0, 15)
    spec = solve(p)
    v = spec.eigenvectors
    assert np.abs(v.T @ v - np.eye(spec.size)).max() < 1e-12
    h = build_hamiltonian(p).to_dense()
    assert np.abs(h @ v - v * spec.energies).max() < 1e-10
    pi = np.diag(parity_operator(p).to_dense())
    assert np.allclose((pi[:, None] * v * v).sum(axis=0), spec.parity_labels)
    # gauge: the largest component of every eigenvector is positive
    big = v[np.argmax(np.abs(v), axis=0), np.arange(spec.size)]
    assert np.all(big > 0)
    back = spec.from_eigenbasis(spec.to_eigenbasis(v[:, 7]))
    assert np.allclose(back, v[:, 7])


def test_rejects_parity_breaking_term():
    p = ModelParams.dicke(2, 1.0, 3)
    h = build_hamiltonian(p)
    field = HermitianOperator(((0.1, np.eye(4), np.diag([1.0, 0.0, -1.0]) + np.diag([1.0, 1.0], 1) + np.diag([1.0, 1.0], -1)),), p.basis)
    with pytest.raises(SpectralError):
        diagonalize(h + field, parity_operator(p))


def test_doublets_below_critical_energy():
    p = ModelParams.dicke(20, 3.0, 159)
    spec = solve(p)
    pairing = pair_doublets(spec, -4.0, -1.5)
    assert pairing.unpaired == 0
    for d in pairing.doublets:
        assert spec.parity_labels[d.index_plus] == 1
        assert spec.parity_labels[d.index_minus] == -1
        assert d.gap / spec.energy_unit < 1e-6
    pairs = eigenspace_window(spec, -2.0, 5)
    assert len(pairs) == 5
    with pytest.raises(SpectralError):
        eigenspace_window(spec, -100.0, 5)


def test_ground_state_not_degenerate_in_normal_phase():
    spec = solve(ModelParams.dicke(10, 0.5, 39))
    assert spec.energies[1] - spec.energies[0] > 0.1
    assert spec.degenerate_blocks[0] == (0, 1)


def test_convergence_check():
    p = ModelParams.dicke(4, 0.0, 3)
    rep = convergence_check(p, [3, 5, 7], lowest_levels(2), rtol=1e-12)
    assert rep.converged and rep.n_max == 3
    p = ModelParams.dicke(4, 3.0, 3)
    rep = convergence_check(p, [3, 5, 7], lowest_levels(4), rtol=1e-14)
    assert not rep.converged and rep.n_max is None
    with pytest.raises(ValueError):
        convergence_check(p, [5, 3])


def test_cache_round_trip_is_bitwise(tmp_path):
    p = ModelParams.dicke(4, 2.0, 21)
    spec = solve(p)
    path = tmp_path / "s.bin"
    save_decomposition(spec, path)
    back = load_decomposition(path)
    assert np.array_equal(back.energies, spec.energies)
    assert np.array_equal(back.eigenvectors, spec.eigenvectors)
    assert back.params == p and back.degeneracy_tol == spec.degeneracy_tol
    cached = solve(p, cache_dir=tmp_path)
    again = solve(p, cache_dir=tmp_path)
    assert np.array_equal(cached.eigenvectors, again.eigenvectors)
    assert np.array_equal(cached.energies, spec.energies)


def test_quad_refinement_tightens_residual():
    p = ModelParams.dicke(2, 3.0, 15, Precision.QUAD)
    spec = solve(p)
    energies, vecs = spec.refined([0, 1, 5])
    h = build_hamiltonian(p)
    for e, k in zip(energies, range(3)):
        v = vecs[:, k]
        with quad_context():
            r = h.apply(v) - e * v
        assert max(abs(float(x)) for x in r) < 1e-28
    assert abs(float(energies[0]) - spec.energies[0]) < 1e-12
    assert np.abs(to_double(vecs[:, 0]) - spec.vectors([0])[:, 0]).max() < 1e-12
    assert math.isfinite(float(energies[2]))


def test_refinement_requires_quad_tier():
    spec = solve(ModelParams.dicke(2, 1.0, 5))
    with pytest.raises(SpectralError):
        spec.refined([0])
