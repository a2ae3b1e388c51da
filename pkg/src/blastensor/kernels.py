"""The four BLAS primitives behind a backend contract.

``ReferenceBackend`` runs the numba kernels in :mod:`._refkernels`;
``ScipyBackend`` adapts the optimized BLAS that ships with scipy. Both take
:class:`~blastensor.tensor.PackedMatrix` and
:class:`~blastensor.tensor.StridedVector` operands in the column-major BLAS
convention.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from . import _refkernels
from .exceptions import ExecutionError
from .tensor import PackedMatrix, StridedVector


def _check_matrix(name, mat, rows, cols):
    if mat.ld < max(1, rows):
        raise ExecutionError(f"leading dimension of {name} is {mat.ld}, needs >= {max(1, rows)}")
    if rows and cols:
        last = mat.offset + (cols - 1) * mat.ld + rows
        if mat.offset < 0 or last > mat.data.size:
            raise ExecutionError(f"{name} ({rows}x{cols}, ld={mat.ld}) overruns its buffer")


def _check_vector(name, vec, length):
    if length and vec.inc == 0:
        raise ExecutionError(f"increment of {name} must be nonzero")
    if length:
        ends = (vec.offset, vec.offset + (length - 1) * vec.inc)
        if min(ends) < 0 or max(ends) >= vec.data.size:
            raise ExecutionError(f"{name} (length {length}, inc={vec.inc}) overruns its buffer")


class KernelBackend(ABC):
    """Contract every backend satisfies; arguments are checked before dispatch."""

    name = "abstract"
    supports_transpose = True

    def gemm(self, trans_a, trans_b, m, n, k, alpha, a: PackedMatrix, b: PackedMatrix, beta, c: PackedMatrix):
        """``C <- alpha op(A) op(B) + beta C`` with ``op(A)`` m x k and ``op(B)`` k x n."""
        if min(m, n, k) < 0:
            raise ExecutionError(f"negative gemm dimension ({m}, {n}, {k})")
        _check_matrix("A", a, *((k, m) if trans_a else (m, k)))
        _check_matrix("B", b, *((n, k) if trans_b else (k, n)))
        _check_matrix("C", c, m, n)
        if c.data is a.data or c.data is b.data:
            raise ExecutionError("gemm output must not share a buffer with its inputs")
        self._gemm(bool(trans_a), bool(trans_b), m, n, k, float(alpha), a, b, float(beta), c)

    def gemv(self, trans, m, n, alpha, a: PackedMatrix, x: StridedVector, beta, y: StridedVector):
        """``y <- alpha op(A) x + beta y`` for ``A`` stored m x n."""
        if min(m, n) < 0:
            raise ExecutionError(f"negative gemv dimension ({m}, {n})")
        _check_matrix("A", a, m, n)
        _check_vector("x", x, m if trans else n)
        _check_vector("y", y, n if trans else m)
        self._gemv(bool(trans), m, n, float(alpha), a, x, float(beta), y)

    def ger(self, m, n, alpha, x: StridedVector, y: StridedVector, a: PackedMatrix):
        """``A <- alpha x y^T + A``."""
        if min(m, n) < 0:
            raise ExecutionError(f"negative ger dimension ({m}, {n})")
        _check_vector("x", x, m)
        _check_vector("y", y, n)
        _check_matrix("A", a, m, n)
        self._ger(m, n, float(alpha), x, y, a)

    def dot(self, k, x: StridedVector, y: StridedVector):
        """``x^T y`` over ``k`` elements."""
        if k < 0:
            raise ExecutionError(f"negative dot length {k}")
        if k == 0:
            return 0.0
        _check_vector("x", x, k)
        _check_vector("y", y, k)
        return self._dot(k, x, y)

    @abstractmethod
    def _gemm(self, trans_a, trans_b, m, n, k, alpha, a, b, beta, c): ...

    @abstractmethod
    def _gemv(self, trans, m, n, alpha, a, x, beta, y): ...

    @abstractmethod
    def _ger(self, m, n, alpha, x, y, a): ...

    @abstractmethod
    def _dot(self, k, x, y): ...

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r})"


class ReferenceBackend(KernelBackend):
    """Self-contained compiled kernels; single-threaded and GIL-free."""

    name = "reference"

    def _gemm(self, trans_a, trans_b, m, n, k, alpha, a, b, beta, c):
        _refkernels.gemm(
            trans_a, trans_b, m, n, k, alpha,
            a.data, a.offset, a.ld, b.data, b.offset, b.ld, beta, c.data, c.offset, c.ld,
        )

    def _gemv(self, trans, m, n, alpha, a, x, beta, y):
        _refkernels.gemv(
            trans, m, n, alpha, a.data, a.offset, a.ld,
            x.data, x.offset, x.inc, beta, y.data, y.offset, y.inc,
        )

    def _ger(self, m, n, alpha, x, y, a):
        _refkernels.ger(m, n, alpha, x.data, x.offset, x.inc, y.data, y.offset, y.inc, a.data, a.offset, a.ld)

    def _dot(self, k, x, y):
        return float(_refkernels.dot(k, x.data, x.offset, x.inc, y.data, y.offset, y.inc))


def _stored(mat, rows, cols):
    item = mat.data.itemsize
    return np.lib.stride_tricks.as_strided(mat.data[mat.offset:], (rows, cols), (item, mat.ld * item))


def _vec(vec, length):
    item = vec.data.itemsize
    if vec.inc >= 0:
        return np.lib.stride_tricks.as_strided(vec.data[vec.offset:], (length,), (vec.inc * item,))
    start = vec.offset + (length - 1) * vec.inc
    return np.lib.stride_tricks.as_strided(vec.data[start:], (length,), (-vec.inc * item,))[::-1]


class ScipyBackend(KernelBackend):
    """Adapter to the optimized BLAS linked into scipy."""

    name = "external"

    def __init__(self):
        from scipy.linalg import blas

        self._blas = blas

    def _gemm(self, trans_a, trans_b, m, n, k, alpha, a, b, beta, c):
        if m == 0 or n == 0:
            return
        cv = _stored(c, m, n)
        if k == 0:
            cv *= beta
            return
        av = _stored(a, *((k, m) if trans_a else (m, k)))
        bv = _stored(b, *((n, k) if trans_b else (k, n)))
        out = self._blas.dgemm(alpha, av, bv, beta, cv if beta != 0.0 else None,
                               trans_a=int(trans_a), trans_b=int(trans_b))
        cv[...] = out

    def _gemv(self, trans, m, n, alpha, a, x, beta, y):
        leny = n if trans else m
        if leny == 0:
            return
        yv = _vec(y, leny)
        if m == 0 or n == 0:
            yv *= beta
            return
        out = self._blas.dgemv(alpha, _stored(a, m, n), _vec(x, n if not trans else m),
                               beta, np.array(yv), trans=int(trans))
        yv[...] = out

    def _ger(self, m, n, alpha, x, y, a):
        if m == 0 or n == 0:
            return
        av = _stored(a, m, n)
        av[...] = self._blas.dger(alpha, _vec(x, m), _vec(y, n), a=np.asfortranarray(av))

    def _dot(self, k, x, y):
        if x.inc > 0 and y.inc > 0:
            return float(self._blas.ddot(x.data, y.data, n=k, offx=x.offset, incx=x.inc,
                                         offy=y.offset, incy=y.inc))
        return float(self._blas.ddot(np.array(_vec(x, k)), np.array(_vec(y, k))))


_BACKENDS = {"reference": ReferenceBackend, "external": ScipyBackend, "scipy": ScipyBackend}


def get_backend(name="reference"):
    """Backend instance by name: ``reference`` or ``external`` (alias ``scipy``)."""
    if isinstance(name, KernelBackend):
        return name
    try:
        return _BACKENDS[str(name).lower()]()
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose reference or external") from None
