"""Numba-compiled reference kernels on flat column-major buffers.

Every matrix argument is ``(buffer, offset, leading_dimension)`` and every
vector argument is ``(buffer, offset, increment)``, matching the BLAS calling
convention. All routines release the GIL.
"""

import numba as nb
import numpy as np

# cache blocking for gemm; MR x NR is the register tile of the micro-kernel
MC = 96
KC = 256
NC = 512
MR = 8
NR = 4

_jit = nb.njit(cache=True, nogil=True)
# reassociation lets LLVM vectorize the register tile; NaN/Inf semantics are kept
_jit_tile = nb.njit(cache=True, nogil=True, fastmath={"contract", "reassoc", "nsz", "arcp"})


@_jit
def pack_strided(src, offset, rows, cols, row_stride, col_stride, dst):
    """Copy a strided ``rows x cols`` matrix into ``dst`` (column-major, ld=rows)."""
    if row_stride == 1:
        for j in range(cols):
            s = offset + j * col_stride
            d = j * rows
            for i in range(rows):
                dst[d + i] = src[s + i]
    elif col_stride == 1:
        # walk the source contiguously and scatter into the destination
        for i in range(rows):
            s = offset + i * row_stride
            for j in range(cols):
                dst[j * rows + i] = src[s + j]
    else:
        for j in range(cols):
            for i in range(rows):
                dst[j * rows + i] = src[offset + i * row_stride + j * col_stride]


@_jit
def unpack_strided(src, rows, cols, dst, offset, row_stride, col_stride):
    """Inverse of :func:`pack_strided`: scatter a packed matrix into strided storage."""
    for j in range(cols):
        for i in range(rows):
            dst[offset + i * row_stride + j * col_stride] = src[j * rows + i]


@_jit_tile
def _micro(kb, ap, aoff, bp, boff, c, coff, ldc):
    c00 = c01 = c02 = c03 = 0.0
    c10 = c11 = c12 = c13 = 0.0
    c20 = c21 = c22 = c23 = 0.0
    c30 = c31 = c32 = c33 = 0.0
    c40 = c41 = c42 = c43 = 0.0
    c50 = c51 = c52 = c53 = 0.0
    c60 = c61 = c62 = c63 = 0.0
    c70 = c71 = c72 = c73 = 0.0
    for _ in range(kb):
        a0 = ap[aoff]
        a1 = ap[aoff + 1]
        a2 = ap[aoff + 2]
        a3 = ap[aoff + 3]
        a4 = ap[aoff + 4]
        a5 = ap[aoff + 5]
        a6 = ap[aoff + 6]
        a7 = ap[aoff + 7]
        b0 = bp[boff]
        b1 = bp[boff + 1]
        b2 = bp[boff + 2]
        b3 = bp[boff + 3]
        c00 += a0 * b0
        c10 += a1 * b0
        c20 += a2 * b0
        c30 += a3 * b0
        c40 += a4 * b0
        c50 += a5 * b0
        c60 += a6 * b0
        c70 += a7 * b0
        c01 += a0 * b1
        c11 += a1 * b1
        c21 += a2 * b1
        c31 += a3 * b1
        c41 += a4 * b1
        c51 += a5 * b1
        c61 += a6 * b1
        c71 += a7 * b1
        c02 += a0 * b2
        c12 += a1 * b2
        c22 += a2 * b2
        c32 += a3 * b2
        c42 += a4 * b2
        c52 += a5 * b2
        c62 += a6 * b2
        c72 += a7 * b2
        c03 += a0 * b3
        c13 += a1 * b3
        c23 += a2 * b3
        c33 += a3 * b3
        c43 += a4 * b3
        c53 += a5 * b3
        c63 += a6 * b3
        c73 += a7 * b3
        aoff += MR
        boff += NR
    o = coff
    c[o] += c00
    c[o + 1] += c10
    c[o + 2] += c20
    c[o + 3] += c30
    c[o + 4] += c40
    c[o + 5] += c50
    c[o + 6] += c60
    c[o + 7] += c70
    o += ldc
    c[o] += c01
    c[o + 1] += c11
    c[o + 2] += c21
    c[o + 3] += c31
    c[o + 4] += c41
    c[o + 5] += c51
    c[o + 6] += c61
    c[o + 7] += c71
    o += ldc
    c[o] += c02
    c[o + 1] += c12
    c[o + 2] += c22
    c[o + 3] += c32
    c[o + 4] += c42
    c[o + 5] += c52
    c[o + 6] += c62
    c[o + 7] += c72
    o += ldc
    c[o] += c03
    c[o + 1] += c13
    c[o + 2] += c23
    c[o + 3] += c33
    c[o + 4] += c43
    c[o + 5] += c53
    c[o + 6] += c63
    c[o + 7] += c73


@_jit
def gemm(trans_a, trans_b, m, n, k, alpha, a, a_off, lda, b, b_off, ldb, beta, c, c_off, ldc):
    """C <- alpha * op(A) op(B) + beta * C with Goto-style packing."""
    for j in range(n):
        col = c_off + j * ldc
        if beta == 0.0:
            for i in range(m):
                c[col + i] = 0.0
        elif beta != 1.0:
            for i in range(m):
                c[col + i] *= beta
    if m == 0 or n == 0 or k == 0 or alpha == 0.0:
        return

    ap = np.zeros(MC * KC + MR * KC)
    bp = np.zeros(KC * NC + NR * KC)
    tile = np.zeros(MR * NR)
    for jc in range(0, n, NC):
        nc = min(NC, n - jc)
        for pc in range(0, k, KC):
            kb = min(KC, k - pc)
            # B panel: NR-wide strips, k-major, zero padded, alpha folded in
            for jr in range(0, nc, NR):
                base = jr * kb
                nr = min(NR, nc - jr)
                if trans_b:
                    # rows of op(B) are columns of the stored matrix: read NR-long runs
                    for p in range(kb):
                        src = b_off + jc + jr + (pc + p) * ldb
                        d = base + p * NR
                        for jj in range(nr):
                            bp[d + jj] = alpha * b[src + jj]
                        for jj in range(nr, NR):
                            bp[d + jj] = 0.0
                else:
                    for jj in range(NR):
                        if jj < nr:
                            src = b_off + pc + (jc + jr + jj) * ldb
                            for p in range(kb):
                                bp[base + p * NR + jj] = alpha * b[src + p]
                        else:
                            for p in range(kb):
                                bp[base + p * NR + jj] = 0.0
            for ic in range(0, m, MC):
                mc = min(MC, m - ic)
                # A block: MR-tall strips, k-major, zero padded
                for ir in range(0, mc, MR):
                    base = ir * kb
                    mr = min(MR, mc - ir)
                    if trans_a:
                        for ii in range(MR):
                            if ii < mr:
                                src = a_off + pc + (ic + ir + ii) * lda
                                for p in range(kb):
                                    ap[base + p * MR + ii] = a[src + p]
                            else:
                                for p in range(kb):
                                    ap[base + p * MR + ii] = 0.0
                    else:
                        # columns are contiguous: read MR-long runs
                        for p in range(kb):
                            src = a_off + ic + ir + (pc + p) * lda
                            d = base + p * MR
                            for ii in range(mr):
                                ap[d + ii] = a[src + ii]
                            for ii in range(mr, MR):
                                ap[d + ii] = 0.0
                for jr in range(0, nc, NR):
                    nr = min(NR, nc - jr)
                    for ir in range(0, mc, MR):
                        mr = min(MR, mc - ir)
                        if mr == MR and nr == NR:
                            _micro(kb, ap, ir * kb, bp, jr * kb, c, c_off + ic + ir + (jc + jr) * ldc, ldc)
                        else:
                            tile[:] = 0.0
                            _micro(kb, ap, ir * kb, bp, jr * kb, tile, 0, MR)
                            for jj in range(nr):
                                dst = c_off + ic + ir + (jc + jr + jj) * ldc
                                for ii in range(mr):
                                    c[dst + ii] += tile[ii + jj * MR]


@_jit
def gemv(trans, m, n, alpha, a, a_off, lda, x, x_off, incx, beta, y, y_off, incy):
    """y <- alpha * op(A) x + beta * y, A stored m x n."""
    leny = n if trans else m
    for i in range(leny):
        if beta == 0.0:
            y[y_off + i * incy] = 0.0
        elif beta != 1.0:
            y[y_off + i * incy] *= beta
    if alpha == 0.0:
        return
    if trans:
        for j in range(n):
            s = 0.0
            col = a_off + j * lda
            for i in range(m):
                s += a[col + i] * x[x_off + i * incx]
            y[y_off + j * incy] += alpha * s
    else:
        for j in range(n):
            t = alpha * x[x_off + j * incx]
            col = a_off + j * lda
            for i in range(m):
                y[y_off + i * incy] += a[col + i] * t


@_jit
def ger(m, n, alpha, x, x_off, incx, y, y_off, incy, a, a_off, lda):
    """A <- alpha * x y^T + A."""
    if alpha == 0.0:
        return
    for j in range(n):
        t = alpha * y[y_off + j * incy]
        col = a_off + j * lda
        for i in range(m):
            a[col + i] += x[x_off + i * incx] * t


@_jit
def dot(k, x, x_off, incx, y, y_off, incy):
    s = 0.0
    for i in range(k):
        s += x[x_off + i * incx] * y[y_off + i * incy]
    return s
