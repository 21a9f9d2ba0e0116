"""Rabi and Dicke Hamiltonians in the maximally symmetric sector j = N/2.

    H = omega a^dag a + omega0 J_z + (2 lambda / sqrt(N)) (a^dag + a) J_x

N = 1 is the Rabi model (scaling knob omega0/omega); N >= 2 with
omega = omega0 = 1 is the Dicke model (scaling knob N).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .hilbert import (
    BasisSpec,
    HermitianOperator,
    boson_ops,
    identity,
    number_op,
    real_spin_ops,
)
from .precision import Precision, mpf, qsqrt, quad_context


@dataclass(frozen=True)
class ModelParams:
    omega: float
    omega0: float
    lam: float
    n_atoms: int
    n_max: int
    precision: Precision = Precision.DOUBLE

    def __post_init__(self):
        if not self.omega > 0 or not self.omega0 > 0:
            raise ValueError("omega and omega0 must be positive")
        if not self.lam >= 0:
            raise ValueError("coupling lambda must be non-negative")
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError(f"atom number must be an integer >= 1, got {self.n_atoms}")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))
        object.__setattr__(self, "precision", Precision.parse(self.precision))
        BasisSpec(self.n_max, self.n_atoms / 2)  # validates the cutoff

    @classmethod
    def rabi(cls, omega0: float, lambda_ratio: float, n_max: int, precision=Precision.DOUBLE):
        """Rabi model, omega = 1, coupling given in units of lambda_c."""
        lam_c = math.sqrt(omega0) / 2
        return cls(1.0, float(omega0), lambda_ratio * lam_c, 1, n_max, precision)

    @classmethod
    def dicke(cls, n_atoms: int, lambda_ratio: float, n_max: int, precision=Precision.DOUBLE):
        """Dicke model, omega = omega0 = 1, coupling given in units of lambda_c."""
        return cls(1.0, 1.0, lambda_ratio * 0.5, n_atoms, n_max, precision)

    @property
    def j(self) -> float:
        return self.n_atoms / 2

    @property
    def basis(self) -> BasisSpec:
        return BasisSpec(self.n_max, self.j)

    @property
    def coupling(self) -> float:
        return 2 * self.lam / math.sqrt(self.n_atoms)

    @property
    def energy_unit(self) -> float:
        """omega0 * j, the unit of reduced energy."""
        return self.omega0 * self.j

    @property
    def lambda_ratio(self) -> float:
        return self.lam / critical_values(self).lambda_c

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["precision"] = self.precision.value
        return d


@dataclass(frozen=True)
class CriticalValues:
    lambda_c: float
    energy_c: float
    reduced_energy_c: float = -1.0


def critical_values(params: ModelParams) -> CriticalValues:
    lam_c = math.sqrt(params.omega * params.omega0) / 2
    return CriticalValues(lam_c, -params.omega0 * params.j)


def reduced_energy(energy, params: ModelParams):
    unit = params.energy_unit
    if unit == 0:
        raise ValueError("reduced energy undefined for omega0 * j = 0")
    return np.asarray(energy) / unit if np.ndim(energy) else energy / unit


def build_hamiltonian(params: ModelParams) -> HermitianOperator:
    basis = params.basis
    prec = params.precision
    _, _, quad = boson_ops(params.n_max, prec)
    num = number_op(params.n_max, prec)
    jx, jz = real_spin_ops(params.j, prec)
    i_b = identity(basis.n_boson, prec)
    i_s = identity(basis.n_spin, prec)
    if prec is Precision.QUAD:
        with quad_context():
            w, w0 = mpf(params.omega), mpf(params.omega0)
            g = 2 * mpf(params.lam) / qsqrt(params.n_atoms)
    else:
        w, w0, g = params.omega, params.omega0, params.coupling
    terms = ((w, num, i_s), (w0, i_b, jz), (g, quad, jx))
    return HermitianOperator(terms, basis, True, "H")


def parity_factors(basis: BasisSpec) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of the boson parity (-1)^n and spin parity (-1)^(j+m)."""
    pb = (-1.0) ** np.arange(basis.n_boson)
    ps = (-1.0) ** np.arange(basis.n_spin)  # j + m = 0, 1, ..., 2j
    return pb, ps


def parity_labels(basis: BasisSpec) -> np.ndarray:
    """(-1)^(j+m+n) on each product state, as integers."""
    pb, ps = parity_factors(basis)
    return np.kron(pb, ps).astype(int)


def parity_operator(params: ModelParams | BasisSpec) -> HermitianOperator:
    basis = params.basis if isinstance(params, ModelParams) else params
    pb, ps = parity_factors(basis)
    return HermitianOperator(((1.0, np.diag(pb), np.diag(ps)),), basis, True, "Pi")


def number_operator(params: ModelParams) -> HermitianOperator:
    b = params.basis
    return HermitianOperator(((1.0, number_op(params.n_max), np.eye(b.n_spin)),), b, True, "n")


def quadrature_operator(params: ModelParams) -> HermitianOperator:
    b = params.basis
    _, _, quad = boson_ops(params.n_max)
    return HermitianOperator(((1.0, quad, np.eye(b.n_spin)),), b, True, "a+adag")


def jx_operator(params: ModelParams) -> HermitianOperator:
    b = params.basis
    jx, _ = real_spin_ops(params.j)
    return HermitianOperator(((1.0, np.eye(b.n_boson), jx),), b, True, "Jx")


def jz_operator(params: ModelParams) -> HermitianOperator:
    b = params.basis
    _, jz = real_spin_ops(params.j)
    return HermitianOperator(((1.0, np.eye(b.n_boson), jz),), b, True, "Jz")
