"""Run execution plans: drive the loop nest, pack or alias slices, call kernels."""

from __future__ import annotations

import hashlib
import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import as_strided

from . import _refkernels
from .exceptions import ExecutionError, ValidationError, WorkCapExceeded
from .kernels import get_backend
from .planner import Kernel, candidate_plans
from .tensor import PackedMatrix, StridedVector, Tensor

DEFAULT_ALL_SLICINGS_CAP = 10**7


@dataclass
class ExecutionStats:
    kernel_calls: int = 0
    packed_bytes: int = 0
    flops: int = 0
    wall_time: float = 0.0

    def merge(self, other):
        return ExecutionStats(
            self.kernel_calls + other.kernel_calls,
            self.packed_bytes + other.packed_bytes,
            max(self.flops, other.flops),
            max(self.wall_time, other.wall_time),
        )

    def gflops(self):
        return self.flops / self.wall_time / 1e9 if self.wall_time > 0 else float("inf")


def _offsets(labels, extents, strides_by_operand):
    """Flat offsets per operand for every coordinate of ``labels`` (first label slowest)."""
    n = math.prod(extents[lab] for lab in labels)
    out = [np.zeros(n, dtype=np.int64) for _ in strides_by_operand]
    if not labels:
        return [o.tolist() for o in out]
    grids = np.indices([extents[lab] for lab in labels]).reshape(len(labels), -1)
    for o, strides in zip(out, strides_by_operand):
        for row, lab in zip(grids, labels):
            o += row * strides.get(lab, 0)
    return [o.tolist() for o in out]


class _Slicer:
    """Per-plan constants shared by every iteration of the loop nest."""

    def __init__(self, plan, left, right, out, backend):
        v = plan.contraction
        spec = v.spec
        self.plan = plan
        self.backend = backend
        self.ext = v.extents
        self.data = {"left": left.data, "right": right.data, "output": out.data}
        self.strides = {
            "left": dict(zip(spec.left.labels, left.strides)),
            "right": dict(zip(spec.right.labels, right.strides)),
            "output": dict(zip(spec.output.labels, out.strides)),
        }
        sliced = set(plan.sliced_labels)
        self.res = {
            "left": [lab for lab in spec.left.labels if lab not in sliced],
            "right": [lab for lab in spec.right.labels if lab not in sliced],
            "output": [lab for lab in spec.output.labels if lab not in sliced],
        }
        self.copied = {c.operand for c in plan.copies}

    def matrix(self, op, off, buf):
        r0, r1 = self.res[op]
        st = self.strides[op]
        rows, cols = self.ext[r0], self.ext[r1]
        if op in self.copied:
            _refkernels.pack_strided(self.data[op], off, rows, cols, st[r0], st[r1], buf)
            return PackedMatrix(rows, cols, rows, buf, 0, True), 8 * rows * cols
        return PackedMatrix(rows, cols, st[r1], self.data[op], off), 0

    def vector(self, op, label, off):
        return StridedVector(self.ext[label], self.data[op], off, self.strides[op][label])


def _run_free_slice(sl, lo, ro, oo, con_l, con_r, buffers):
    """Compute one output slice; returns (kernel_calls, packed_bytes)."""
    plan = sl.plan
    km = plan.kernel_map
    kind = plan.kernel
    be = sl.backend
    ext = sl.ext
    calls = 0
    packed = 0
    offs = {"left": 0, "right": 0}

    if kind in (Kernel.GEMM, Kernel.COPY_GEMM):
        m, n, k = ext[km.m], ext[km.n], ext[km.k]
        staged = "output" in sl.copied
        if staged:
            c = PackedMatrix(m, n, m, buffers["output"], 0, True)
        else:
            c = PackedMatrix(m, n, sl.strides["output"][km.n], sl.data["output"], oo)
        for it, (cl, cr) in enumerate(zip(con_l, con_r)):
            offs["left"], offs["right"] = lo + cl, ro + cr
            a, pa = sl.matrix(km.a_operand, offs[km.a_operand], buffers[km.a_operand])
            b, pb = sl.matrix(km.b_operand, offs[km.b_operand], buffers[km.b_operand])
            be.gemm(km.trans_a, km.trans_b, m, n, k, 1.0, a, b, 0.0 if it == 0 else 1.0, c)
            calls += 1
            packed += pa + pb
        if staged:
            st = sl.strides["output"]
            _refkernels.unpack_strided(buffers["output"], m, n, sl.data["output"], oo, st[km.m], st[km.n])
            packed += 8 * m * n
    elif kind in (Kernel.GEMV, Kernel.COPY_GEMV):
        mat, vec = km.a_operand, km.b_operand
        y = sl.vector("output", km.m, oo)
        for it, (cl, cr) in enumerate(zip(con_l, con_r)):
            offs["left"], offs["right"] = lo + cl, ro + cr
            a, pa = sl.matrix(mat, offs[mat], buffers[mat])
            x = sl.vector(vec, km.k, offs[vec])
            be.gemv(km.trans_a, a.rows, a.cols, 1.0, a, x, 0.0 if it == 0 else 1.0, y)
            calls += 1
            packed += pa
    elif kind is Kernel.GER:
        m, n = ext[km.m], ext[km.n]
        staged = "output" in sl.copied
        if staged:
            buf = buffers["output"]
            buf[: m * n] = 0.0
            c = PackedMatrix(m, n, m, buf, 0, True)
        else:
            c = PackedMatrix(m, n, sl.strides["output"][km.n], sl.data["output"], oo)
        for cl, cr in zip(con_l, con_r):
            offs["left"], offs["right"] = lo + cl, ro + cr
            x = sl.vector(km.a_operand, km.m, offs[km.a_operand])
            y = sl.vector(km.b_operand, km.n, offs[km.b_operand])
            be.ger(m, n, 1.0, x, y, c)
            calls += 1
        if staged:
            st = sl.strides["output"]
            _refkernels.unpack_strided(buf, m, n, sl.data["output"], oo, st[km.m], st[km.n])
            packed += 8 * m * n
    elif kind is Kernel.DOT:
        kext = ext[km.k]
        inner_l, inner_r = buffers["inner"]
        total = 0.0
        for cl, cr in zip(con_l, con_r):
            for il, ir in zip(inner_l, inner_r):
                x = sl.vector("left", km.k, lo + cl + il)
                y = sl.vector("right", km.k, ro + cr + ir)
                total += be.dot(kext, x, y)
                calls += 1
        sl.data["output"][oo] = total
    else:
        lview, rview, oview, subs = buffers["einsum"]
        out = as_strided(sl.data["output"][oo:], oview[0], oview[1])
        for cl, cr in zip(con_l, con_r):
            a = as_strided(sl.data["left"][lo + cl:], lview[0], lview[1])
            b = as_strided(sl.data["right"][ro + cr:], rview[0], rview[1])
            out += np.einsum(subs, a, b)
            calls += 1
    return calls, packed


def _buffers(sl):
    plan = sl.plan
    bufs = {}
    for c in plan.copies:
        bufs[c.operand] = np.empty(c.rows * c.cols)
    for op in ("left", "right", "output"):
        bufs.setdefault(op, None)
    km = plan.kernel_map
    if plan.kernel is Kernel.DOT:
        bufs["inner"] = _offsets(km.inner, sl.ext, [sl.strides["left"], sl.strides["right"]])
    if plan.kernel is Kernel.ELEMENTWISE:
        letters = {lab: chr(ord("a") + i) for i, lab in enumerate(plan.contraction.spec.labels)}

        def view(op):
            labs = sl.res[op]
            return (tuple(sl.ext[lab] for lab in labs), tuple(8 * sl.strides[op][lab] for lab in labs))

        subs = "{},{}->{}".format(*("".join(letters[lab] for lab in sl.res[op]) for op in ("left", "right", "output")))
        bufs["einsum"] = (view("left"), view("right"), view("output"), subs)
    return bufs


def _check_operands(plan, left, right):
    v = plan.contraction
    if tuple(left.extents) != v.left_extents or tuple(right.extents) != v.right_extents:
        raise ValidationError(
            f"operand extents {left.extents} / {right.extents} differ from the planned "
            f"{v.left_extents} / {v.right_extents}"
        )


def execute(plan, left, right, backend="reference", workers=1):
    """Execute ``plan`` on concrete operands; returns ``(output, stats)``.

    Iterations over sliced free labels write disjoint output slices, so with
    ``workers > 1`` they are spread over a thread pool. Sliced contracted
    labels always accumulate sequentially inside one slice.
    """
    _check_operands(plan, left, right)
    be = get_backend(backend)
    v = plan.contraction
    spec = v.spec
    out = Tensor(v.output_extents, spec.output.variance, np.zeros(math.prod(v.output_extents)), spec.output.name)

    t0 = time.perf_counter()
    sl = _Slicer(plan, left, right, out, be)
    free = [ll.label for ll in plan.loop_nest if not ll.contracted]
    con = [ll.label for ll in plan.loop_nest if ll.contracted]
    fl, fr, fo = _offsets(free, sl.ext, [sl.strides["left"], sl.strides["right"], sl.strides["output"]])
    con_l, con_r = _offsets(con, sl.ext, [sl.strides["left"], sl.strides["right"]])

    def run(indices):
        bufs = _buffers(sl)
        calls = packed = 0
        for i in indices:
            try:
                c, p = _run_free_slice(sl, fl[i], fr[i], fo[i], con_l, con_r, bufs)
            except Exception as exc:
                coords = np.unravel_index(i, [sl.ext[lab] for lab in free]) if free else ()
                where = ", ".join(f"{lab}={int(x)}" for lab, x in zip(free, coords)) or "no sliced free labels"
                raise ExecutionError(f"{plan.kernel} failed on slice ({where}): {exc}") from exc
            calls += c
            packed += p
        return calls, packed

    n_free = len(fl)
    workers = max(1, int(workers))
    if workers == 1 or n_free == 1:
        parts = [run(range(n_free))]
    else:
        chunks = [range(n_free)[w::workers] for w in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    wall = time.perf_counter() - t0
    stats = ExecutionStats(sum(c for c, _ in parts), sum(p for _, p in parts), plan.flops, wall)
    return out, stats


class SlicingRun(NamedTuple):
    s_left: tuple
    s_right: tuple
    kernel: Kernel
    digest: str
    stats: ExecutionStats
    result: Tensor


def execute_all_slicings(v, left, right, backend="reference", *, work_cap=DEFAULT_ALL_SLICINGS_CAP):
    """Run every enumerated slicing; used to check that all decompositions agree."""
    plans = candidate_plans(v)
    work = len(plans) * math.prod(v.extents[lab] for lab in v.spec.labels)
    if work > work_cap:
        raise WorkCapExceeded(f"{len(plans)} slicings need {work} multiply-adds, cap is {work_cap}")
    be = get_backend(backend)
    runs = []
    for p in plans:
        out, stats = execute(p, left, right, be)
        digest = hashlib.sha256(out.data.tobytes()).hexdigest()[:16]
        runs.append(SlicingRun(p.s_left, p.s_right, p.kernel, digest, stats, out))
    return runs


def iter_free_coordinates(plan):
    """Coordinates of the sliced free labels in execution order."""
    free = [ll for ll in plan.loop_nest if not ll.contracted]
    return itertools.product(*(range(ll.extent) for ll in free))
