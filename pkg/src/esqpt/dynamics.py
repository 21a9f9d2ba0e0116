"""Unitary dynamics in the eigenbasis: the variance protocol for C, quenches
from the ground doublet, long-time and diagonal-ensemble averages, and the
atom-field entanglement entropy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import gmpy2
import numpy as np

from .hilbert import BasisSpec, HermitianOperator
from .precision import Precision, quad_context
from .signop import SignOperator, gauge_fix_doublet
from .spectral import SpectralDecomposition, SpectralError

NORM_TOL = 1e-12
IMAG_TOL = 1e-10
# eigen-coefficients below this (relative to the largest) are dropped from traces
SUPPORT_TOL = 1e-14
# long-time traces drop the smallest coefficients up to this total weight;
# expectation values then move by at most 2 sqrt(weight) ||O||
DROPPED_WEIGHT = 1e-20


class DynamicsError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Normalized amplitudes in the product basis or in a decomposition's eigenbasis."""

    coefficients: np.ndarray
    basis: str = "product"
    spectrum: SpectralDecomposition | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.basis not in ("product", "eigen"):
            raise ValueError(f"unknown basis tag {self.basis!r}")
        if self.basis == "eigen" and self.spectrum is None:
            raise ValueError("an eigenbasis state needs its decomposition")
        c = np.asarray(self.coefficients, dtype=complex)
        norm = float(np.linalg.norm(c))
        if abs(norm - 1) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm {norm!r})")
        object.__setattr__(self, "coefficients", c)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def in_eigenbasis(self, spec: SpectralDecomposition) -> "QuantumState":
        if self.basis == "eigen":
            if self.spectrum is not spec:
                raise DynamicsError("state is expressed in a different eigenbasis")
            return self
        c = spec.to_eigenbasis(self.coefficients)
        return QuantumState(_renorm(c, self.coefficients), "eigen", spec)

    def in_product_basis(self) -> "QuantumState":
        if self.basis == "product":
            return self
        psi = self.spectrum.from_eigenbasis(self.coefficients)
        return QuantumState(_renorm(psi, self.coefficients), "product")


def _renorm(c: np.ndarray, ref: np.ndarray) -> np.ndarray:
    # basis changes are unitary; remove the O(eps) drift so the invariant holds exactly
    return c / np.linalg.norm(c) * np.linalg.norm(ref)


def normalized(coeffs, basis: str = "product", spectrum=None) -> QuantumState:
    c = np.asarray(coeffs, dtype=complex)
    return QuantumState(c / np.linalg.norm(c), basis, spectrum)


@dataclass(frozen=True)
class TimeGrid:
    """``count`` equally spaced times ``start, start + step, ...``; start defaults to step."""

    step: float
    count: int
    start: float | None = None

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("time step must be positive")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError("time grid needs at least one point")

    @property
    def times(self) -> np.ndarray:
        t0 = self.step if self.start is None else self.start
        return t0 + self.step * np.arange(self.count)


@dataclass(frozen=True)
class QuenchSpec:
    lambda_i: float
    lambda_f: float
    p: float
    phi: float

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not 0 <= self.phi < 2 * math.pi:
            raise ValueError(f"phi must lie in [0, 2 pi), got {self.phi}")


def evolve(state: QuantumState, spec: SpectralDecomposition, t: float) -> QuantumState:
    """Multiply each eigen-coefficient by ``exp(-i E_k t)``."""
    st = state.in_eigenbasis(spec)
    phases = np.exp(-1j * spec.energies * t)
    return QuantumState(st.coefficients * phases, "eigen", spec)


def expectation(state: QuantumState, op) -> float:
    psi = state.in_product_basis().coefficients
    if isinstance(op, SignOperator):
        val = complex(op.elements(psi, psi)[0, 0])
    else:
        val = complex(np.vdot(psi, op.apply(psi)))
    if abs(val.imag) > IMAG_TOL * max(1.0, abs(val.real)):
        raise DynamicsError(f"imaginary expectation value {val.imag:.3e}: operator not Hermitian")
    return val.real


def microcanonical_state(spec: SpectralDecomposition, start: int, width: int = 10):
    """Equal real amplitudes over ``width`` consecutive levels of the sorted spectrum.

    Returns ``(state, mean_energy)``.
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    if start < 0 or start + width > spec.size:
        raise SpectralError(f"window [{start}, {start + width}) falls off the spectrum (size {spec.size})")
    c = np.zeros(spec.size, dtype=complex)
    c[start : start + width] = 1 / math.sqrt(width)
    state = QuantumState(c, "eigen", spec)
    return state, float(spec.energies[start : start + width].mean())


def _support(c: np.ndarray, tol: float = SUPPORT_TOL) -> np.ndarray:
    mag = np.abs(c)
    return np.nonzero(mag > tol * mag.max())[0]


def _weighted_support(c: np.ndarray, weight: float = DROPPED_WEIGHT) -> np.ndarray:
    w = np.abs(c) ** 2
    order = np.argsort(w, kind="stable")
    tail = np.cumsum(w[order])
    n_drop = int(np.searchsorted(tail, weight, side="right"))
    return np.sort(order[n_drop:])


def projected(spec: SpectralDecomposition, support: np.ndarray, op) -> np.ndarray:
    """Matrix of an observable restricted to a set of eigenstates."""
    vecs = spec.vectors(support)
    if isinstance(op, SignOperator):
        return np.real(op.elements(vecs, vecs))
    return vecs.T @ op.apply(vecs)


def _trace(c: np.ndarray, energies: np.ndarray, mat: np.ndarray, times: np.ndarray) -> np.ndarray:
    diag = np.diagonal(mat)
    off = np.abs(mat - np.diag(diag)).max() if len(c) > 1 else 0.0
    if off <= 1e-12 * max(np.abs(diag).max(), 1e-300):
        # diagonal in the eigenbasis: a constant of motion
        return np.full(len(times), float(np.real(np.sum(np.abs(c) ** 2 * diag))))
    e = energies - energies.mean()
    out = np.empty(len(times))
    # chunk over times to bound memory
    for lo in range(0, len(times), 256):
        t = times[lo : lo + 256]
        a = c[None, :] * np.exp(-1j * np.outer(t, e))
        out[lo : lo + 256] = np.real(np.sum(a.conj() * (a @ mat.T), axis=1))
    return out


@dataclass(frozen=True)
class VarianceResult:
    mean: float
    variance: float
    trace: np.ndarray
    times: np.ndarray


def variance_protocol(
    state: QuantumState, spec: SpectralDecomposition, c_op: SignOperator, grid: TimeGrid
) -> VarianceResult:
    """Long-time mean and variance of ``C_i = <Psi(t_i)|C|Psi(t_i)>`` over ``grid``.

    In the quad tier (quad decomposition and quad ``C``) energies, vectors and
    matrix elements of the populated levels are refined and the trace is
    formed in 113-bit arithmetic; amplitudes must then be real.
    """
    st = state.in_eigenbasis(spec)
    times = grid.times
    sup = _support(st.coefficients)
    c = st.coefficients[sup]
    quad = spec.precision is Precision.QUAD and c_op.precision is Precision.QUAD
    if not quad:
        mat = projected(spec, sup, c_op)
        trace = _trace(c, spec.energies[sup], mat, times)
        mean = float(trace.mean())
        var = float(np.mean((trace - mean) ** 2))
        return VarianceResult(mean, var, trace, times)
    if np.abs(c.imag).max() > 0:
        raise DynamicsError("quad variance protocol requires real amplitudes")
    energies, vecs = spec.refined(sup)
    mat = c_op.elements(vecs, vecs)
    amp = [gmpy2.mpfr(float(x)) for x in c.real]
    with quad_context():
        # amplitudes 1/sqrt(width) are not exact doubles; renormalize in quad
        norm = gmpy2.sqrt(sum(x * x for x in amp))
        amp = [x / norm for x in amp]
        k = len(amp)
        trace_q = []
        for t in times:
            tq = gmpy2.mpfr(float(t))
            total = gmpy2.mpfr(0)
            for a in range(k):
                total += amp[a] * amp[a] * mat[a, a]
                for b in range(a + 1, k):
                    total += 2 * amp[a] * amp[b] * mat[a, b] * gmpy2.cos((energies[a] - energies[b]) * tq)
            trace_q.append(total)
        mean_q = sum(trace_q) / len(trace_q)
        var_q = sum((x - mean_q) ** 2 for x in trace_q) / len(trace_q)
    return VarianceResult(float(mean_q), float(var_q), np.array([float(x) for x in trace_q]), times)


def quench_initial_state(
    spec_i: SpectralDecomposition, q: QuenchSpec, c_op: SignOperator, doublet_tol: float | None = None
) -> QuantumState:
    """``sqrt(p)|E0+> + exp(i phi) sqrt(1-p)|E0->`` from the gauge-fixed ground doublet.

    The gauge makes ``<E0-|C|E0+> >= 0``, so ``<C> = +2 sqrt(p(1-p)) cos(phi) |c|``.
    """
    if spec_i.size < 2:
        raise DynamicsError("spectrum too small for a ground doublet")
    tol = 1e-6 * spec_i.energy_unit if doublet_tol is None else doublet_tol
    k0, k1 = 0, 1
    gap = spec_i.energies[k1] - spec_i.energies[k0]
    if spec_i.parity_labels[k0] == spec_i.parity_labels[k1] or gap > tol:
        raise DynamicsError(
            f"ground pair is not a parity doublet (gap {gap:.3e}, tolerance {tol:.3e}); "
            "the initial coupling must lie in the superradiant phase"
        )
    plus, minus = (k0, k1) if spec_i.parity_labels[k0] > 0 else (k1, k0)
    vecs = spec_i.vectors([plus, minus])
    fixed = gauge_fix_doublet(vecs[:, 0], vecs[:, 1], c_op)
    psi = math.sqrt(q.p) * fixed.v_plus + np.exp(1j * q.phi) * math.sqrt(1 - q.p) * fixed.v_minus
    return QuantumState(psi / np.linalg.norm(psi), "product")


@dataclass(frozen=True)
class LongTimeResult:
    times: np.ndarray
    traces: dict
    averages: dict
    noise: dict  # standard error of each time average
    dropped_weight: float


def long_time_average(
    state: QuantumState,
    spec: SpectralDecomposition,
    observables: Mapping[str, object],
    total_time: float = 1e6,
    samples: int = 1000,
) -> LongTimeResult:
    """Sample observables at ``samples`` equal steps up to ``total_time``.

    An observable is a :class:`HermitianOperator`, a :class:`SignOperator`,
    or the string ``"entropy"`` for the atom-field entanglement entropy.
    """
    st = state.in_eigenbasis(spec)
    times = TimeGrid(total_time / samples, samples).times
    coeffs = st.coefficients
    sup = _weighted_support(coeffs)
    dropped = float(1 - np.sum(np.abs(coeffs[sup]) ** 2))
    c = coeffs[sup]
    e = spec.energies[sup]
    traces = {}
    vecs = None
    for name, op in observables.items():
        if isinstance(op, str):
            if op != "entropy":
                raise ValueError(f"unknown observable {op!r}")
            if vecs is None:
                vecs = spec.vectors(sup)
            traces[name] = _entropy_trace(c, e, vecs, spec.basis, times)
        else:
            traces[name] = _trace(c, e, projected(spec, sup, op), times)
    averages = {k: float(v.mean()) for k, v in traces.items()}
    noise = {k: float(v.std() / math.sqrt(len(v))) for k, v in traces.items()}
    return LongTimeResult(times, traces, averages, noise, dropped)


def _entropy_trace(c, e, vecs, basis: BasisSpec, times) -> np.ndarray:
    e = e - e.mean()
    out = np.empty(len(times))
    nb, ns = basis.n_boson, basis.n_spin
    for lo in range(0, len(times), 64):
        t = times[lo : lo + 64]
        amps = c[:, None] * np.exp(-1j * np.outer(e, t))
        psi = (vecs @ amps).reshape(nb, ns, -1)
        rho = np.einsum("asb,atb->bst", psi, psi.conj())
        for k in range(rho.shape[0]):
            out[lo + k] = _von_neumann(rho[k])
    return out


def _von_neumann(rho: np.ndarray) -> float:
    tr = np.trace(rho).real
    if abs(tr - 1) > 1e-10:
        raise DynamicsError(f"reduced density matrix trace {tr!r} deviates from 1")
    mu = np.linalg.eigvalsh(rho)
    mu = mu[mu > 1e-14]
    return float(-np.sum(mu * np.log(mu)))


def entanglement_entropy(state: QuantumState, basis: BasisSpec | None = None) -> float:
    """Von Neumann entropy (nats) of the spin state after tracing out the boson."""
    st = state.in_product_basis()
    if basis is None:
        if state.spectrum is None:
            raise ValueError("basis required for a product-basis state")
        basis = state.spectrum.basis
    psi = st.coefficients.reshape(basis.n_boson, basis.n_spin)
    rho = psi.T @ psi.conj()
    return _von_neumann(rho)


def diagonal_ensemble_average(state: QuantumState, spec: SpectralDecomposition, op) -> float:
    """Infinite-time average, keeping coherences inside degenerate blocks."""
    st = state.in_eigenbasis(spec)
    sup = _support(st.coefficients)
    c = st.coefficients[sup]
    if isinstance(op, str) or op is None:
        raise ValueError("diagonal ensemble needs an operator")
    mat = projected(spec, sup, op)
    ids = spec.block_ids()[sup]
    same = ids[:, None] == ids[None, :]
    return float(np.real(np.conj(c) @ (np.where(same, mat, 0.0) @ c)))
