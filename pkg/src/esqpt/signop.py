"""The sign of the boson quadrature, C = sign(a^dag + a), and its matrix elements."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np
import scipy.integrate as sint
import scipy.linalg as sla

from .hilbert import BasisSpec, HermitianOperator, _apply_factor, _bands, boson_ops
from .model import ModelParams
from .precision import Precision, quad_context, refine_eigenpairs, to_double, to_quad


class SignError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SignOperator:
    """sign(A) for a Hermitian A, optionally lifted to ``sign(A) (x) I_spin``.

    In the quad tier only the quad eigenvectors and signs of ``A`` are kept;
    matrix elements are evaluated through them (:meth:`elements`).
    """

    matrix: np.ndarray | None  # double-precision sign matrix of the factor
    source: str  # "spectral" | "integral"
    basis: BasisSpec | None = None
    quad_vectors: np.ndarray | None = field(default=None, repr=False)
    quad_signs: np.ndarray | None = field(default=None, repr=False)

    @property
    def precision(self) -> Precision:
        return Precision.QUAD if self.quad_vectors is not None else Precision.DOUBLE

    @property
    def operator(self) -> HermitianOperator:
        """Product-space operator ``sign(A) (x) I_spin``."""
        if self.basis is None:
            raise SignError("sign operator has no product basis attached")
        return HermitianOperator(((1.0, self.matrix, np.eye(self.basis.n_spin)),), self.basis, True, "C")

    def elements(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """``<left_a| C |right_b>`` for product-basis columns (either tier)."""
        left = np.asarray(left)
        right = np.asarray(right)
        if left.ndim == 1:
            left = left[:, None]
        if right.ndim == 1:
            right = right[:, None]
        quad = left.dtype == object or right.dtype == object
        if not quad or self.quad_vectors is None:
            if self.basis is None:
                return to_double(left).T.conj() @ (self.matrix @ to_double(right))
            return to_double(left).T.conj() @ self.operator.apply(to_double(right))
        nb = self.quad_vectors.shape[0]
        ns = 1 if self.basis is None else self.basis.n_spin
        ut = self.quad_vectors.T

        def project(cols):
            out = []
            with quad_context():
                for k in range(cols.shape[1]):
                    out.append(ut @ to_quad(cols[:, k]).reshape(nb, ns))
            return out

        pl = project(left)
        pr = pl if right is left else project(right)
        s = self.quad_signs.reshape(-1, 1)
        out = np.empty((len(pl), len(pr)), dtype=object)
        with quad_context():
            for a, x in enumerate(pl):
                sx = s * x
                for b, y in enumerate(pr):
                    out[a, b] = np.sum(sx * y)
        return out


def _check_guard(w: np.ndarray, scale: float, guard: float) -> None:
    band = guard * scale
    bad = np.nonzero(np.abs(w) <= band)[0]
    if len(bad):
        raise SignError(
            f"eigenvalue {w[bad[0]]:.3e} lies inside the zero guard band (|d| <= {band:.3e}); "
            "sign is undefined (odd truncation dimension?)"
        )


def matrix_sign_hermitian(a: np.ndarray, guard: float = 1e-8, basis: BasisSpec | None = None) -> SignOperator:
    """``V sign(D) V^dagger`` from the eigendecomposition ``A = V D V^dagger``.

    An object-dtype (quad) ``A`` is eigendecomposed in double and its
    eigenpairs refined to 113 bits.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SignError("matrix sign needs a square matrix")
    quad = a.dtype == object
    a_d = to_double(a) if quad else a
    if np.abs(a_d - a_d.conj().T).max() > 1e-12 * max(np.abs(a_d).max(), 1.0):
        raise SignError("matrix is not Hermitian")
    w, v = sla.eigh(a_d)
    _check_guard(w, float(np.abs(w).max()) if len(w) else 1.0, guard)
    s = np.sign(w)
    c = (v * s) @ v.conj().T
    c = 0.5 * (c + c.conj().T)
    if not quad:
        return SignOperator(c, "spectral", basis)
    bands = _bands(a)
    ident = False

    def matvec(x):
        return _apply_factor(a, bands, ident, x.reshape(-1, 1, 1), 0).reshape(-1)

    _, vecs = refine_eigenpairs(matvec, w, v, range(len(w)))
    qv = np.stack(vecs, axis=1)
    return SignOperator(c, "spectral", basis, qv, to_quad(s))


def matrix_sign_integral(
    a: np.ndarray, tol: float = 1e-8, limit: int = 2000, basis: BasisSpec | None = None
) -> SignOperator:
    """sign(A) = (2/pi) int_0^inf A (t^2 + A^2)^-1 dt, by adaptive quadrature.

    With t = s/(1-s) the integrand becomes (2/pi) A (s^2 + (1-s)^2 A^2)^-1
    on s in [0, 1], finite at both ends.  Each evaluation is a Hermitian
    positive-definite solve.
    """
    a = np.asarray(a, dtype=float) if np.asarray(a).dtype != object else to_double(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SignError("matrix sign needs a square matrix")
    n = a.shape[0]
    a2 = a @ a
    eye = np.eye(n)

    def integrand(s):
        m = s * s * eye + (1 - s) ** 2 * a2
        return (2 / math.pi) * sla.solve(m, a, assume_a="pos")

    res, err, info = sint.quad_vec(integrand, 0.0, 1.0, epsabs=tol, epsrel=0.0, norm="max",
                                   limit=limit, full_output=True)
    if info.status != 0 or err > tol:
        raise SignError(f"integral sign did not converge (status {info.status}, error {err:.2e})")
    res = 0.5 * (res + res.T)
    return SignOperator(res, "integral", basis)


def build_c(params: ModelParams, guard: float = 1e-8) -> SignOperator:
    """C = sign(a^dag + a) (x) I_spin, computed on the boson factor alone.

    The quadrature flips boson parity, so entries between equal-parity Fock
    states vanish identically; they are set to exact zeros.
    """
    basis = params.basis
    _, _, quad = boson_ops(params.n_max, params.precision)
    op = matrix_sign_hermitian(quad, guard, basis)
    n = np.arange(params.n_max + 1)
    odd = (n[:, None] + n[None, :]) % 2 == 1
    return dataclasses.replace(op, matrix=np.where(odd, op.matrix, 0.0))


build_C = build_c


def boson_parity(n_max: int) -> np.ndarray:
    return (-1.0) ** np.arange(n_max + 1)


@dataclass(frozen=True)
class GaugedDoublet:
    v_plus: np.ndarray
    v_minus: np.ndarray
    c: float  # <v_minus| C |v_plus> after fixing, >= 0
    abs_c: float
    flipped: bool
    is_doublet: bool

    @property
    def one_minus_abs_c(self):
        return 1 - self.abs_c


def gauge_fix_doublet(
    v_plus: np.ndarray, v_minus: np.ndarray, c_op: SignOperator, threshold: float = 0.5
) -> GaugedDoublet:
    """Fix the relative sign so that ``<v_minus|C|v_plus> >= 0``.

    ``|c|`` below ``threshold`` marks the pair as not a doublet (typical above
    the critical line); this is reported, not raised.
    """
    c = c_op.elements(v_minus, v_plus)[0, 0]
    c_real = c if isinstance(c, gmpy2.mpfr) else float(np.real(c))
    flipped = bool(c_real < 0)
    if flipped:
        with quad_context():
            v_minus = -v_minus
            c_real = -c_real
    abs_c = c_real
    return GaugedDoublet(v_plus, v_minus, c_real, abs_c, flipped, bool(float(abs_c) >= threshold))
