"""Arithmetic tiers.

``double`` is plain IEEE binary64.  ``quad`` carries a 113-bit significand
(binary128 precision) through gmpy2 ``mpfr`` scalars held in numpy object
arrays.  Quad arithmetic is software-emulated and roughly three orders of
magnitude slower, so the quad tier refines only the quantities an
experiment actually consumes (see :func:`refine_eigenpairs`).
"""
from __future__ import annotations

import enum
from contextlib import contextmanager
from typing import Callable

import gmpy2
import numpy as np

QUAD_BITS = 113


class Precision(str, enum.Enum):
    DOUBLE = "double"
    QUAD = "quad"

    @classmethod
    def parse(cls, value: "Precision | str") -> "Precision":
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown precision tier {value!r}; expected 'double' or 'quad'") from None

    @property
    def eps(self) -> float:
        """Unit roundoff of the tier."""
        return 2.0 ** -52 if self is Precision.DOUBLE else 2.0 ** -(QUAD_BITS - 1)


@contextmanager
def quad_context():
    with gmpy2.context(precision=QUAD_BITS) as ctx:
        yield ctx


def mpf(x) -> gmpy2.mpfr:
    with quad_context():
        return gmpy2.mpfr(x)


def qsqrt(x) -> gmpy2.mpfr:
    with quad_context():
        return gmpy2.sqrt(gmpy2.mpfr(x))


def to_quad(a) -> np.ndarray:
    """Exact conversion of a real array to an object array of 113-bit mpfr."""
    a = np.asarray(a)
    if a.dtype == object:
        return a
    if np.iscomplexobj(a):
        raise TypeError("quad tier handles real arrays only")
    with quad_context():
        flat = [gmpy2.mpfr(float(v)) for v in a.ravel()]
    out = np.empty(a.shape, dtype=object)
    out.ravel()[:] = flat if flat else []
    return out


def to_double(a) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype != object:
        return a if np.iscomplexobj(a) else a.astype(float)
    return np.array([float(v) for v in a.ravel()], dtype=float).reshape(a.shape)


def qzeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    with quad_context():
        zero = gmpy2.mpfr(0)
    out.fill(zero)
    return out


def qdot(a: np.ndarray, b: np.ndarray):
    with quad_context():
        return np.dot(a, b)


def qnorm(a: np.ndarray):
    with quad_context():
        return gmpy2.sqrt(np.dot(a, a))


def refine_eigenpairs(
    matvec: Callable[[np.ndarray], np.ndarray],
    energies: np.ndarray,
    vectors: np.ndarray,
    which,
    iterations: int = 3,
):
    """Lift selected double-precision eigenpairs of a real symmetric matrix to quad.

    ``matvec`` applies the matrix in quad arithmetic.  ``energies``/``vectors``
    are the complete double eigendecomposition of that same matrix; the
    correction equation is solved in double through this basis, while
    residuals and Rayleigh quotients are formed in quad.  Each sweep gains
    roughly the double-precision accuracy of the correction solve, so three
    sweeps saturate the 113-bit significand for well-separated levels.

    Returns ``(values, vecs)`` with quad scalars and one quad column per
    requested index.
    """
    which = list(which)
    values = []
    cols = []
    for i in which:
        x = to_quad(vectors[:, i])
        e = mpf(energies[i])
        for _ in range(iterations):
            with quad_context():
                hx = matvec(x)
                e = np.dot(x, hx) / np.dot(x, x)
                r = hx - e * x
            r_d = to_double(r)
            denom = energies - float(e)
            denom[i] = 1.0
            coef = (vectors.T @ r_d) / denom
            coef[i] = 0.0
            # double shift suffices: the correction is already O(eps)
            delta = -(vectors @ coef)
            with quad_context():
                x = x + to_quad(delta)
                x = x / gmpy2.sqrt(np.dot(x, x))
        with quad_context():
            hx = matvec(x)
            e = np.dot(x, hx)
        values.append(e)
        cols.append(x)
    return values, cols
