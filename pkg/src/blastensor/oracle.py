"""Brute-force contraction by direct nested summation.

Pure Python on purpose: it shares no code with the planner, the executor or
the compiled kernels, so agreement with them means something.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .exceptions import WorkCapExceeded
from .tensor import Tensor

DEFAULT_WORK_CAP = 10**9


def _work(v):
    return math.prod(v.extents[lab] for lab in v.spec.labels)


def _addressing(v, left, right):
    spec = v.spec
    out_labels = spec.output.labels
    con_labels = spec.contracted

    def coeffs(op, strides):
        # label -> stride in this operand, split by label kind
        pos = dict(zip(op.labels, strides))
        return [pos.get(lab, 0) for lab in out_labels], [pos.get(lab, 0) for lab in con_labels]

    return coeffs(spec.left, left.strides), coeffs(spec.right, right.strides)


def contract_naive(v, left, right, *, work_cap=DEFAULT_WORK_CAP, return_count=False):
    """Sum ``left * right`` over every contracted coordinate for every output coordinate.

    Output coordinates are visited in storage order and contracted
    coordinates lexicographically (first contracted label slowest), so the
    result is bit-reproducible. With ``return_count`` also returns the number
    of multiply-adds performed.
    """
    work = _work(v)
    if work > work_cap:
        raise WorkCapExceeded(f"naive contraction needs {work} multiply-adds, cap is {work_cap}")
    spec = v.spec
    out_ext = v.output_extents
    con_ext = tuple(v.extents[lab] for lab in spec.contracted)
    (lo, lc), (ro, rc) = _addressing(v, left, right)
    ld = left.data.tolist()
    rd = right.data.tolist()
    con_offsets = [
        (sum(c * s for c, s in zip(cc, lc)), sum(c * s for c, s in zip(cc, rc)))
        for cc in itertools.product(*(range(e) for e in con_ext))
    ]
    values = []
    count = 0
    # storage order: mode 0 fastest, so iterate reversed modes with product
    for rev in itertools.product(*(range(e) for e in reversed(out_ext))):
        oc = rev[::-1]
        lbase = sum(c * s for c, s in zip(oc, lo))
        rbase = sum(c * s for c, s in zip(oc, ro))
        acc = 0.0
        for lo_off, ro_off in con_offsets:
            acc += ld[lbase + lo_off] * rd[rbase + ro_off]
        count += len(con_offsets)
        values.append(acc)
    out = Tensor(out_ext, spec.output.variance, np.array(values, dtype=np.float64), spec.output.name)
    return (out, count) if return_count else out


def naive_entry(v, left, right, coords):
    """Oracle value of a single output entry."""
    spec = v.spec
    (lo, lc), (ro, rc) = _addressing(v, left, right)
    lbase = sum(c * s for c, s in zip(coords, lo))
    rbase = sum(c * s for c, s in zip(coords, ro))
    acc = 0.0
    con_ext = tuple(v.extents[lab] for lab in spec.contracted)
    for cc in itertools.product(*(range(e) for e in con_ext)):
        acc += float(left.data[lbase + sum(c * s for c, s in zip(cc, lc))]) * float(
            right.data[rbase + sum(c * s for c, s in zip(cc, rc))]
        )
    return acc


def max_relative_error(result, reference):
    """``max|a - b| / max|b|``; absolute error when the reference is all zero."""
    a = np.asarray(getattr(result, "data", result), dtype=np.float64).ravel()
    b = np.asarray(getattr(reference, "data", reference), dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    diff = float(np.max(np.abs(a - b)))
    scale = float(np.max(np.abs(b)))
    return diff / scale if scale > 0 else diff
