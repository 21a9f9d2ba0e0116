"""Truncated boson and angular-momentum algebra on the product space.

Product basis ordering is ``|n> (x) |m>`` with the boson index slow and the
spin index fast: flat index ``n * (2j + 1) + (m + j)``.  Spin states are
ordered by ascending ``m = -j, ..., j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .precision import Precision, qsqrt, qzeros, quad_context, to_double

# dense product operators must fit this budget (bytes, float64)
MEMORY_BUDGET_BYTES = 2 ** 31


@dataclass(frozen=True)
class BasisSpec:
    """Boson cutoff ``n_max`` (occupations 0..n_max) and spin ``j``."""

    n_max: int
    spin_j: float

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max}")
        if (self.n_max + 1) % 2:
            raise ValueError(
                f"n_max + 1 must be even (got n_max={self.n_max}); an odd boson "
                "dimension gives the quadrature an exact zero eigenvalue"
            )
        _two_j(self.spin_j)
        object.__setattr__(self, "n_max", int(self.n_max))
        object.__setattr__(self, "spin_j", _two_j(self.spin_j) / 2)

    @property
    def n_boson(self) -> int:
        return self.n_max + 1

    @property
    def n_spin(self) -> int:
        return _two_j(self.spin_j) + 1

    @property
    def product_dim(self) -> int:
        return self.n_boson * self.n_spin

    def occupations(self) -> np.ndarray:
        """Boson occupation ``n`` of every product-basis state."""
        return np.repeat(np.arange(self.n_boson), self.n_spin)

    def magnetizations(self) -> np.ndarray:
        """Spin projection ``m`` of every product-basis state."""
        m = np.arange(self.n_spin) - self.spin_j
        return np.tile(m, self.n_boson)


def _two_j(j) -> int:
    two_j = round(2 * float(j))
    if two_j < 0 or abs(2 * float(j) - two_j) > 1e-12:
        raise ValueError(f"spin j must be a non-negative half-integer, got {j}")
    return int(two_j)


def boson_ops(n_max: int, precision: Precision | str = Precision.DOUBLE):
    """Annihilation, creation and quadrature ``a + a^dagger`` on ``n = 0..n_max``.

    Any ``n_max >= 1`` is accepted here; the even-dimension rule is enforced
    by :class:`BasisSpec` and by the sign function's zero-eigenvalue guard.
    """
    if int(n_max) != n_max or n_max < 1:
        raise ValueError(f"n_max must be an integer >= 1, got {n_max}")
    n_max = int(n_max)
    precision = Precision.parse(precision)
    dim = n_max + 1
    if precision is Precision.QUAD:
        a = qzeros((dim, dim))
        for n in range(1, dim):
            a[n - 1, n] = qsqrt(n)
        with quad_context():
            a_dag = a.T.copy()
            quad = a + a_dag
        return a, a_dag, quad
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)
    a_dag = a.T.copy()
    return a, a_dag, a + a_dag


def number_op(n_max: int, precision: Precision | str = Precision.DOUBLE) -> np.ndarray:
    diag = np.arange(n_max + 1, dtype=float)
    if Precision.parse(precision) is Precision.QUAD:
        out = qzeros((n_max + 1, n_max + 1))
        for n in range(n_max + 1):
            out[n, n] = out[n, n] + n
        return out
    return np.diag(diag)


def _raising(j: float, precision: Precision) -> np.ndarray:
    two_j = _two_j(j)
    dim = two_j + 1
    m = np.arange(dim - 1) - two_j / 2
    # <m+1|J+|m> = sqrt(j(j+1) - m(m+1)) = sqrt((j-m)(j+m+1)); integers after doubling
    prod = (two_j - 2 * m) * (two_j + 2 * m + 2) / 4
    if precision is Precision.QUAD:
        jp = qzeros((dim, dim))
        for k, v in enumerate(prod):
            with quad_context():
                jp[k + 1, k] = qsqrt(int(round(4 * v))) / 2
        return jp
    jp = np.zeros((dim, dim))
    jp[np.arange(1, dim), np.arange(dim - 1)] = np.sqrt(prod)
    return jp


def spin_ops(j: float):
    """Spin-``j`` matrices ``(Jx, Jy, Jz)`` in the ascending-``m`` basis."""
    jp = _raising(j, Precision.DOUBLE)
    jx = (jp + jp.T) / 2
    jy = (jp - jp.T) / 2j
    jz = np.diag(np.arange(_two_j(j) + 1) - _two_j(j) / 2)
    return jx, jy, jz


def real_spin_ops(j: float, precision: Precision | str = Precision.DOUBLE):
    """``(Jx, Jz)``, the real spin matrices, in either precision tier."""
    precision = Precision.parse(precision)
    if precision is Precision.DOUBLE:
        jx, _, jz = spin_ops(j)
        return jx, jz
    jp = _raising(j, precision)
    dim = jp.shape[0]
    with quad_context():
        jx = (jp + jp.T) / 2
    jz = qzeros((dim, dim))
    for k in range(dim):
        with quad_context():
            jz[k, k] = jz[k, k] + (2 * k - _two_j(j)) / 2
    return jx, jz


def _identity_like(a: np.ndarray) -> bool:
    if a.shape[0] != a.shape[1]:
        return False
    if a.dtype == object:
        a = to_double(a)
    return bool(np.array_equal(a, np.eye(a.shape[0])))


def _bands(a: np.ndarray) -> list[tuple[int, np.ndarray]]:
    """Nonzero diagonals of a square factor as ``(offset, values)``."""
    dense = to_double(a) if a.dtype == object else a
    rows, cols = np.nonzero(dense)
    out = []
    for off in np.unique(cols - rows):
        out.append((int(off), np.diagonal(a, int(off)).copy()))
    return out


def _apply_factor(a, bands, is_identity, x, axis):
    """Apply a square factor along ``axis`` of a 3-index array."""
    if is_identity:
        return x
    if x.dtype != object and a.dtype != object:
        moved = np.moveaxis(x, axis, 0)
        out = np.tensordot(a, moved, axes=(1, 0))
        return np.moveaxis(out, 0, axis)
    moved = np.moveaxis(x, axis, 0)
    out = np.empty(moved.shape, dtype=object)
    out[...] = 0
    shape = (-1,) + (1,) * (moved.ndim - 1)
    with quad_context():
        for off, vals in bands:
            if off >= 0:
                out[: len(vals)] = out[: len(vals)] + vals.reshape(shape) * moved[off:]
            else:
                out[-off:] = out[-off:] + vals.reshape(shape) * moved[: len(vals)]
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Operator on the product space held as ``sum_k c_k A_k (x) B_k``.

    Factors are dense.  The sum is materialized only on request
    (:meth:`to_dense`), which is what keeps the large Dicke spaces within
    memory: parity blocks and matrix-vector products are formed directly
    from the factors.
    """

    terms: tuple
    basis: BasisSpec
    hermitian: bool = True
    name: str = ""
    _meta: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        dim = self.basis.product_dim
        norm_terms = []
        for coef, a, b in self.terms:
            a = np.asarray(a)
            b = np.asarray(b)
            if a.ndim != 2 or b.ndim != 2 or a.shape[0] != a.shape[1] or b.shape[0] != b.shape[1]:
                raise ValueError("operator factors must be square matrices")
            if a.shape[0] * b.shape[0] != dim:
                raise ValueError(
                    f"factor dimensions {a.shape[0]}x{b.shape[0]} do not match product_dim {dim}"
                )
            norm_terms.append((coef, a, b))
        object.__setattr__(self, "terms", tuple(norm_terms))
        self._meta.clear()
        for _, a, b in self.terms:
            self._meta.append(
                (
                    _identity_like(a),
                    _identity_like(b),
                    _bands(a) if a.dtype == object else None,
                    _bands(b) if b.dtype == object else None,
                )
            )

    @property
    def dim(self) -> int:
        return self.basis.product_dim

    @property
    def is_quad(self) -> bool:
        return any(a.dtype == object or b.dtype == object for _, a, b in self.terms)

    @property
    def is_real(self) -> bool:
        return not any(
            np.iscomplexobj(a) or np.iscomplexobj(b) or np.iscomplexobj(c) for c, a, b in self.terms
        )

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        if other.basis != self.basis:
            raise ValueError("cannot add operators on different bases")
        return HermitianOperator(
            self.terms + other.terms, self.basis, self.hermitian and other.hermitian
        )

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        return self + (-1.0) * other

    def __rmul__(self, scalar) -> "HermitianOperator":
        terms = tuple((scalar * c, a, b) for c, a, b in self.terms)
        herm = self.hermitian and np.isreal(scalar)
        return HermitianOperator(terms, self.basis, bool(herm), self.name)

    def __neg__(self) -> "HermitianOperator":
        return (-1.0) * self

    def _split(self, idx: np.ndarray, b_dim: int):
        return idx // b_dim, idx % b_dim

    def block(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        """Dense submatrix ``O[rows][:, cols]`` built from the factors."""
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        out = None
        for coef, a, b in self.terms:
            ra, rb = self._split(rows, b.shape[0])
            ca, cb = self._split(cols, b.shape[0])
            piece = a[ra[:, None], ca[None, :]] * b[rb[:, None], cb[None, :]]
            if coef != 1:
                piece = coef * piece
            out = piece if out is None else out + piece
        if out is None:
            out = np.zeros((len(rows), len(cols)))
        return out

    def diagonal(self) -> np.ndarray:
        out = None
        for coef, a, b in self.terms:
            d = coef * np.kron(np.diagonal(a), np.diagonal(b))
            out = d if out is None else out + d
        return out if out is not None else np.zeros(self.dim)

    def to_dense(self, budget: int = MEMORY_BUDGET_BYTES) -> np.ndarray:
        if self.dim * self.dim * 16 > budget:
            raise MemoryError(
                f"dense {self.dim}x{self.dim} operator exceeds the memory budget ({budget} bytes)"
            )
        out = None
        for coef, a, b in self.terms:
            k = coef * np.kron(a, b)
            out = k if out is None else out + k
        return out if out is not None else np.zeros((self.dim, self.dim))

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``O @ x`` for a vector or a stack of column vectors."""
        x = np.asarray(x)
        vec = x.ndim == 1
        cols = x.reshape(self.dim, -1)
        out = None
        for (coef, a, b), (a_id, b_id, a_bands, b_bands) in zip(self.terms, self._meta):
            t = cols.reshape(a.shape[0], b.shape[0], -1)
            t = _apply_factor(a, a_bands, a_id, t, 0)
            t = _apply_factor(b, b_bands, b_id, t, 1)
            if t.dtype == object:
                with quad_context():
                    t = coef * t
            else:
                t = coef * t
            if out is None:
                out = t.reshape(self.dim, -1)
                if out is cols:
                    out = out.copy()
            else:
                if out.dtype == object or t.dtype == object:
                    with quad_context():
                        out = out + t.reshape(self.dim, -1)
                else:
                    out = out + t.reshape(self.dim, -1)
        if out is None:
            out = np.zeros_like(cols)
        return out[:, 0] if vec else out

    def hermiticity_defect(self) -> float:
        """Upper bound on ``max |M - M^dagger|`` from the factors (0 when every term is Hermitian)."""
        worst = 0.0
        for coef, a, b in self.terms:
            a_d = to_double(a) if a.dtype == object else a
            b_d = to_double(b) if b.dtype == object else b
            na, nb = np.abs(a_d).max(), np.abs(b_d).max()
            da = np.abs(a_d - a_d.conj().T).max()
            db = np.abs(b_d - b_d.conj().T).max()
            worst += abs(coef) * (da * nb + na * db) + 2 * abs(np.imag(coef)) * na * nb
        return float(worst)


def tensor_product(
    a: np.ndarray,
    b: np.ndarray,
    basis: BasisSpec | None = None,
    budget: int = MEMORY_BUDGET_BYTES,
    name: str = "",
) -> HermitianOperator:
    """``A (x) B`` with the boson factor first."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError("tensor_product needs square factors")
    dim = a.shape[0] * b.shape[0]
    if dim * dim * 8 > budget:
        raise MemoryError(f"product dimension {dim} exceeds the memory budget ({budget} bytes)")
    if basis is None:
        basis = _generic_basis(a.shape[0], b.shape[0])
    herm = _is_hermitian(a) and _is_hermitian(b)
    return HermitianOperator(((1.0, a, b),), basis, herm, name)


def _is_hermitian(a: np.ndarray) -> bool:
    d = to_double(a) if a.dtype == object else a
    scale = max(np.abs(d).max(), 1.0)
    return bool(np.abs(d - d.conj().T).max() <= 1e-12 * scale)


class _FreeBasis(BasisSpec):
    """Basis of arbitrary factor dimensions (no spin or parity meaning)."""

    def __init__(self, da: int, db: int):
        object.__setattr__(self, "n_max", da - 1)
        object.__setattr__(self, "spin_j", (db - 1) / 2)

    def __post_init__(self):  # pragma: no cover - bypassed by __init__
        pass


def _generic_basis(da: int, db: int) -> BasisSpec:
    try:
        return BasisSpec(da - 1, (db - 1) / 2)
    except ValueError:
        return _FreeBasis(da, db)


def identity(dim: int, precision: Precision | str = Precision.DOUBLE) -> np.ndarray:
    if Precision.parse(precision) is Precision.QUAD:
        out = qzeros((dim, dim))
        for k in range(dim):
            out[k, k] = out[k, k] + 1
        return out
    return np.eye(dim)
