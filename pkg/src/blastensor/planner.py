"""Classify contractions and map them onto BLAS kernels by slicing.

A slicing fixes some labels coordinate-by-coordinate; a contracted label is
either sliced in both operands or in neither, so a slicing pair is just a set
of sliced labels. What survives in each operand determines the kernel that
computes one iteration of the resulting loop nest.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from .exceptions import KernelUnreachableError, SlicingError
from .expr import ContractionSpec, Operand, flop_count


class Kernel(str, Enum):
    GEMM = "GEMM"
    COPY_GEMM = "COPY+GEMM"
    GEMV = "GEMV"
    COPY_GEMV = "COPY+GEMV"
    GER = "GER"
    DOT = "DOT"
    ELEMENTWISE = "ELEMENTWISE"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().upper().replace("_", "+").replace(" ", "")
        if key in ("COPYGEMM", "COPY-GEMM"):
            key = "COPY+GEMM"
        if key in ("COPYGEMV", "COPY-GEMV"):
            key = "COPY+GEMV"
        for k in cls:
            if k.value == key:
                return k
        raise ValueError(f"unknown kernel {text!r}; choose from {', '.join(k.value for k in cls)}")


class ContractionClass(str, Enum):
    ONE = "1"
    TWO = "2"
    THREE_ONE = "3.1"
    THREE_TWO = "3.2"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class RequirementReport:
    r1_ok: bool
    r2_ok: bool
    r3_ok: bool
    fallback: str
    kernel: Kernel
    output_staged: bool = False


class SlicingOption(NamedTuple):
    s_left: tuple
    s_right: tuple
    report: RequirementReport


@dataclass(frozen=True)
class LoopLabel:
    label: str
    extent: int
    contracted: bool

    @property
    def kind(self):
        return "contracted" if self.contracted else "free"


@dataclass(frozen=True)
class KernelMap:
    """Which unsliced labels play which kernel role.

    ``a_operand``/``b_operand`` name the operand in the BLAS ``A``/``B`` role
    (matrix and vector for GEMV, ``x`` and ``y`` for GER and DOT). ``trans_a``
    and ``trans_b`` say whether the stored slice is the transpose of ``op(A)``
    or ``op(B)``. ``inner`` holds extra contracted labels summed by repeated
    DOT calls, or every unsliced label for elementwise plans.
    """

    m: str | None = None
    n: str | None = None
    k: str | None = None
    inner: tuple = ()
    a_operand: str | None = None
    b_operand: str | None = None
    trans_a: bool = False
    trans_b: bool = False

    @property
    def labels(self):
        return tuple(x for x in (self.m, self.n, self.k) if x is not None) + self.inner


@dataclass(frozen=True)
class CopyDescriptor:
    """One slice-by-slice pack (or, for ``output``, stage and copy back)."""

    operand: str
    labels: tuple
    rows: int
    cols: int

    @property
    def bytes_per_slice(self):
        return 8 * self.rows * self.cols


@dataclass(frozen=True)
class ExecutionPlan:
    contraction: object
    cls: ContractionClass
    s_left: tuple
    s_right: tuple
    s_output: tuple
    kernel: Kernel
    report: RequirementReport
    loop_nest: tuple
    kernel_map: KernelMap
    copies: tuple
    flops: int
    calls: int

    @property
    def sliced_labels(self):
        return tuple(ll.label for ll in self.loop_nest)

    @property
    def accumulates(self):
        return any(ll.contracted for ll in self.loop_nest)


# -- slicing helpers ------------------------------------------------------------------


def _spec_of(v):
    return v if isinstance(v, ContractionSpec) else v.spec


def slicing_vectors(v, sliced):
    """Slicing vectors ``(s_left, s_right)`` for a set of sliced labels."""
    spec = _spec_of(v)
    return (
        tuple(int(lab in sliced) for lab in spec.left.labels),
        tuple(int(lab in sliced) for lab in spec.right.labels),
    )


def sliced_labels(v, s_left, s_right):
    """Set of labels sliced by a pair of vectors; rejects inconsistent pairs."""
    spec = _spec_of(v)
    s_left = tuple(int(x) for x in s_left)
    s_right = tuple(int(x) for x in s_right)
    for op, s in ((spec.left, s_left), (spec.right, s_right)):
        if len(s) != op.rank:
            raise SlicingError(f"slicing vector {s} has length {len(s)}, {op.name} has rank {op.rank}")
        if any(x not in (0, 1) for x in s):
            raise SlicingError(f"slicing vector entries must be 0 or 1, got {s}")
    left = {lab for lab, x in zip(spec.left.labels, s_left) if x}
    right = {lab for lab, x in zip(spec.right.labels, s_right) if x}
    for lab in spec.contracted:
        if (lab in left) != (lab in right):
            raise SlicingError(
                f"contracted label {lab!r} is sliced in only one operand; "
                "it must be sliced in both or in neither"
            )
    return frozenset(left | right)


# -- classification -----------------------------------------------------------------


def classify(v):
    """Class 1, 2, 3.1 or 3.2 from the free-index counts and the stride-1 modes."""
    spec = _spec_of(v)
    dl = spec.left.rank - spec.p
    dr = spec.right.rank - spec.p
    if dl == 0 and dr == 0:
        return ContractionClass.ONE
    if dl == 0 or dr == 0:
        return ContractionClass.TWO
    first_l = spec.left.labels[0]
    first_r = spec.right.labels[0]
    if first_l != first_r and spec.is_contracted(first_l) and spec.is_contracted(first_r):
        return ContractionClass.THREE_ONE
    return ContractionClass.THREE_TWO


# -- per-slicing analysis -----------------------------------------------------------


@dataclass(frozen=True)
class _Analysis:
    sliced: frozenset
    s_left: tuple
    s_right: tuple
    report: RequirementReport
    kernel_map: KernelMap
    copies: tuple
    dims: int
    max_residual: int

    @property
    def operand_copies(self):
        return sum(1 for c in self.copies if c.operand != "output")

    def sort_key(self):
        return (self.operand_copies, self.report.output_staged, -self.dims, self.s_left + self.s_right)


def _analyze(v, sliced):
    spec = v.spec
    ext = v.extents
    L, R, O = spec.left, spec.right, spec.output
    res = {
        "left": [lab for lab in L.labels if lab not in sliced],
        "right": [lab for lab in R.labels if lab not in sliced],
    }
    res_out = [lab for lab in O.labels if lab not in sliced]
    u_c = [lab for lab in res["left"] if spec.is_contracted(lab)]
    u_fl = [lab for lab in res["left"] if not spec.is_contracted(lab)]
    u_fr = [lab for lab in res["right"] if not spec.is_contracted(lab)]

    mode0_kept = {"left": L.labels[0] not in sliced, "right": R.labels[0] not in sliced}
    r1 = mode0_kept["left"] and mode0_kept["right"]
    cut_l = L.rank - len(res["left"])
    cut_r = R.rank - len(res["right"])
    r2 = cut_l == L.rank - 2 and cut_r == R.rank - 2
    r3 = len(u_c) == 1 and len(u_fl) == 1 and len(u_fr) == 1
    over = cut_l > L.rank - 2 or cut_r > R.rank - 2
    small = len(res["left"]) <= 2 and len(res["right"]) <= 2

    copies = []
    staged = False

    def matrix_copy(op):
        labs = res[op]
        copies.append(CopyDescriptor(op, tuple(labs), ext[labs[0]], ext[labs[1]]))

    def stage_output():
        copies.append(CopyDescriptor("output", tuple(res_out), ext[res_out[0]], ext[res_out[1]]))

    owner = {lab: "left" for lab in u_fl}
    owner.update({lab: "right" for lab in u_fr})

    if r3:
        c = u_c[0]
        o1, o2 = res_out
        a_op = owner[o1]
        b_op = owner[o2]
        km = KernelMap(
            m=o1, n=o2, k=c,
            a_operand=a_op, b_operand=b_op,
            trans_a=res[a_op][0] != o1,
            trans_b=res[b_op][0] != c,
        )
        kernel = Kernel.GEMM if r1 else Kernel.COPY_GEMM
        for op in ("left", "right"):
            if not mode0_kept[op]:
                matrix_copy(op)
        staged = O.labels[0] in sliced
        if staged:
            stage_output()
        dims = ext[o1] * ext[o2] * ext[c]
    elif len(u_c) == 1 and len(u_fl) + len(u_fr) == 1 and small:
        c = u_c[0]
        f = (u_fl + u_fr)[0]
        mat = owner[f]
        vec = "right" if mat == "left" else "left"
        km = KernelMap(m=f, k=c, a_operand=mat, b_operand=vec, trans_a=res[mat][0] == c)
        if mode0_kept[mat]:
            kernel = Kernel.GEMV
        else:
            kernel = Kernel.COPY_GEMV
            matrix_copy(mat)
        dims = ext[f] * ext[c]
    elif not u_c and len(u_fl) == 1 and len(u_fr) == 1:
        o1, o2 = res_out
        km = KernelMap(m=o1, n=o2, a_operand=owner[o1], b_operand=owner[o2])
        kernel = Kernel.GER
        staged = O.labels[0] in sliced
        if staged:
            stage_output()
        dims = ext[o1] * ext[o2]
    elif u_c and not u_fl and not u_fr and small:
        # prefer a summation label that is stride-1 in the left operand
        k = u_c[0]
        for cand in (res["left"][0], res["right"][0]):
            if cand in u_c:
                k = cand
                break
        inner = tuple(lab for lab in u_c if lab != k)
        km = KernelMap(k=k, inner=inner, a_operand="left", b_operand="right")
        kernel = Kernel.DOT
        dims = math.prod(ext[lab] for lab in u_c)
    else:
        unsliced = tuple(res["left"]) + tuple(u_fr)
        km = KernelMap(inner=unsliced)
        kernel = Kernel.ELEMENTWISE
        dims = math.prod(ext[lab] for lab in unsliced)

    if r1 and r2 and r3:
        fallback = "none"
    elif r2 and r3:
        fallback = "F1"
    elif over:
        fallback = "F2"
    else:
        fallback = "F3"

    s_left, s_right = slicing_vectors(spec, sliced)
    report = RequirementReport(r1, r2, r3, fallback, kernel, staged)
    return _Analysis(
        frozenset(sliced), s_left, s_right, report, km, tuple(copies), dims,
        max(len(res["left"]), len(res["right"])),
    )


def check_requirements(v, s_left, s_right):
    """Test R1-R3 for one slicing pair and name the resulting kernel."""
    return _analyze(v, sliced_labels(v, s_left, s_right)).report


def _all_analyses(v):
    labels = v.spec.labels
    out = []
    for bits in itertools.product((0, 1), repeat=len(labels)):
        sliced = frozenset(lab for lab, b in zip(labels, bits) if b)
        a = _analyze(v, sliced)
        if a.max_residual <= 2:
            out.append(a)
    out.sort(key=lambda a: a.s_left + a.s_right)
    return out


def enumerate_slicings(v):
    """Every consistent slicing whose surviving slices have rank <= 2, in lexicographic order."""
    return [SlicingOption(a.s_left, a.s_right, a.report) for a in _all_analyses(v)]


# -- planning ---------------------------------------------------------------------------

_RECIPE = {
    ContractionClass.ONE: (Kernel.DOT,),
    ContractionClass.TWO: (Kernel.GEMV, Kernel.COPY_GEMV),
    ContractionClass.THREE_ONE: (Kernel.COPY_GEMM,),
    ContractionClass.THREE_TWO: (Kernel.GEMM,),
}


def _unreachable(v, kernel, analyses):
    if kernel is Kernel.GEMM:
        if any(a.report.r2_ok and a.report.r3_ok for a in analyses):
            return KernelUnreachableError(
                kernel, "R1",
                "every slicing that leaves one free and one contracted index per operand "
                "slices a stride-1 mode",
            )
        return KernelUnreachableError(
            kernel, "R3", "no slicing leaves exactly one free and one contracted index in both operands"
        )
    if kernel is Kernel.COPY_GEMM:
        if any(a.report.r2_ok and a.report.r3_ok for a in analyses):
            return KernelUnreachableError(
                kernel, "R1", "every slicing meeting R2 and R3 keeps both stride-1 modes, so no copy is needed",
                state="always satisfied",
            )
        return KernelUnreachableError(
            kernel, "R3", "no slicing leaves exactly one free and one contracted index in both operands"
        )
    if kernel is Kernel.COPY_GEMV:
        return KernelUnreachableError(
            kernel, "R1", "no matrix-vector slicing drops a stride-1 mode", state="always satisfied"
        )
    return KernelUnreachableError(kernel, "R3", "the free/contracted index structure admits no such slices")


def _build_plan(v, a):
    spec = v.spec
    ext = v.extents
    cls = classify(v)
    free_sliced = [lab for lab in spec.output.labels if lab in a.sliced]
    contracted_sliced = [lab for lab in spec.contracted if lab in a.sliced]
    loop_nest = tuple(LoopLabel(lab, ext[lab], False) for lab in free_sliced) + tuple(
        LoopLabel(lab, ext[lab], True) for lab in contracted_sliced
    )
    calls = math.prod(ll.extent for ll in loop_nest)
    if a.report.kernel is Kernel.DOT:
        calls *= math.prod(ext[lab] for lab in a.kernel_map.inner)
    s_output = tuple(int(lab in a.sliced) for lab in spec.output.labels)
    return ExecutionPlan(
        contraction=v,
        cls=cls,
        s_left=a.s_left,
        s_right=a.s_right,
        s_output=s_output,
        kernel=a.report.kernel,
        report=a.report,
        loop_nest=loop_nest,
        kernel_map=a.kernel_map,
        copies=a.copies,
        flops=flop_count(v),
        calls=calls,
    )


def plan(v, kernel=None, slicing=None):
    """Build an execution plan.

    With neither ``kernel`` nor ``slicing`` the class recipe decides. ``kernel``
    forces a kernel kind (best slicing for it), ``slicing`` forces an explicit
    ``(s_left, s_right)`` pair.
    """
    if kernel is not None and slicing is not None:
        raise ValueError("pass either kernel or slicing, not both")
    if slicing is not None:
        s_left, s_right = slicing
        return _build_plan(v, _analyze(v, sliced_labels(v, s_left, s_right)))

    analyses = _all_analyses(v)
    if kernel is not None:
        kernel = Kernel.parse(kernel)
        pool = [a for a in analyses if a.report.kernel is kernel]
        if not pool:
            raise _unreachable(v, kernel, analyses)
    else:
        cls = classify(v)
        wanted = _RECIPE[cls]
        pool = [a for a in analyses if a.report.kernel in wanted]
        if cls is ContractionClass.ONE:
            # slice all but one index
            pool = [a for a in pool if not a.kernel_map.inner] or pool
    return _build_plan(v, min(pool, key=_Analysis.sort_key))


def candidate_plans(v):
    """One plan per enumerated slicing, in enumeration order."""
    return [_build_plan(v, a) for a in _all_analyses(v)]


# -- storage advice -----------------------------------------------------------------------


def _with_labels_first(op, label):
    idx = op.labels.index(label)
    indices = (op.indices[idx],) + op.indices[:idx] + op.indices[idx + 1:]
    return Operand(op.name, indices)


def storage_advice(v):
    """Re-layouts that turn a Class 3.1 contraction into Class 3.2.

    Each suggestion moves one label of one operand to the stride-1 position.
    Free labels are tried first, since a free stride-1 index always keeps GEMM
    reachable.
    """
    spec = _spec_of(v)
    if classify(spec) is not ContractionClass.THREE_ONE:
        return []
    out = []
    for side in ("left", "right"):
        op = getattr(spec, side)
        free = spec.free_left if side == "left" else spec.free_right
        other_first = (spec.right if side == "left" else spec.left).labels[0]
        for lab in tuple(free) + (other_first,):
            if lab not in op.labels or op.labels.index(lab) == 0:
                continue
            moved = _with_labels_first(op, lab)
            trial = ContractionSpec(
                spec.output,
                moved if side == "left" else spec.left,
                moved if side == "right" else spec.right,
                spec.strict,
            )
            if classify(trial) is ContractionClass.THREE_TWO:
                out.append(f"store {op.render()} as {moved.render()} (stride-1 index {lab}) to reach Class 3.2")
    return out


def render_plan(p):
    """Deterministic line-oriented report for one plan."""
    v = p.contraction
    km = p.kernel_map
    rep = p.report

    def ok(flag):
        return "ok" if flag else "fail"

    roles = []
    for role in ("m", "n", "k"):
        lab = getattr(km, role)
        if lab is not None:
            roles.append(f"{role.upper()}={lab}")
    if km.inner:
        roles.append("inner=" + ",".join(km.inner))
    if km.a_operand:
        roles.append(f"A={km.a_operand}")
    if km.b_operand:
        roles.append(f"B={km.b_operand}")
    if p.kernel in (Kernel.GEMM, Kernel.COPY_GEMM, Kernel.GEMV, Kernel.COPY_GEMV):
        roles.append(f"trans_a={int(km.trans_a)}")
    if p.kernel in (Kernel.GEMM, Kernel.COPY_GEMM):
        roles.append(f"trans_b={int(km.trans_b)}")
    loop = " ".join(f"{ll.label}({ll.kind},{ll.extent})" for ll in p.loop_nest) or "-"
    lines = [
        f"expression: {v.spec}",
        f"class: {p.cls}",
        f"deltas: ({v.deltas[0]}, {v.deltas[1]})",
        "extents: " + " ".join(f"{lab}={v.extents[lab]}" for lab in v.spec.labels),
        f"slicing_left: {p.s_left}",
        f"slicing_right: {p.s_right}",
        f"slicing_output: {p.s_output}",
        f"kernel: {p.kernel}",
        f"requirements: R1={ok(rep.r1_ok)} R2={ok(rep.r2_ok)} R3={ok(rep.r3_ok)} fallback={rep.fallback}",
        f"loop_nest: {loop}",
        "kernel_map: " + (" ".join(roles) or "-"),
        f"copies: {len(p.copies)}" + "".join(f" {c.operand}({','.join(c.labels)})" for c in p.copies),
        f"kernel_calls: {p.calls}",
        f"flops: {p.flops}",
    ]
    return "\n".join(lines)
