"""Metric tensors and index raising/lowering.

Lowering mode ``k`` of ``t`` contracts it with the metric ``g``; raising
contracts with the inverse metric. Both go through the planner and executor
like any other contraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import SingularMetricError, ValidationError
from .executor import execute
from .expr import ContractionSpec, Index, Operand, validate
from .planner import plan
from .tensor import DOWN, UP, Tensor

SYMMETRY_TOL = 1e-10
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class MetricTensor:
    g: Tensor
    g_inv: Tensor

    @property
    def dimension(self):
        return self.g.extents[0]


def _square(g):
    if g.rank != 2 or g.extents[0] != g.extents[1]:
        raise SingularMetricError(f"metric must be a square rank-2 tensor, got extents {g.extents}")


def invert_metric(g):
    """Check symmetry and conditioning of ``g`` and pair it with its inverse."""
    if not isinstance(g, Tensor):
        g = Tensor.from_array(g)
    _square(g)
    a = g.array
    scale = max(1.0, float(np.max(np.abs(a))))
    asym = float(np.max(np.abs(a - a.T)))
    if asym > SYMMETRY_TOL * scale:
        raise SingularMetricError(f"metric is not symmetric (max |g - g^T| = {asym:.3g})")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularMetricError(f"metric is singular or badly conditioned (condition number {cond:.3g})")
    inv = np.linalg.solve(a, np.eye(a.shape[0]))
    return MetricTensor(
        Tensor.from_array(a, (DOWN, DOWN), g.name or "g"),
        Tensor.from_array(inv, (UP, UP), "ginv"),
    )


def spherical_metric(r, theta):
    """Metric of flat 3-space in spherical coordinates at the point ``(r, theta)``."""
    s = math.sin(theta)
    if r <= 0 or abs(s) < 1e-15:
        raise SingularMetricError(f"spherical metric is degenerate at r={r}, theta={theta}")
    diag = np.array([1.0, r * r, (r * s) ** 2])
    return MetricTensor(
        Tensor.from_array(np.diag(diag), (DOWN, DOWN), "g"),
        Tensor.from_array(np.diag(1.0 / diag), (UP, UP), "ginv"),
    )


def _apply(t, mode, metric_t, want_before, backend):
    if not 0 <= mode < t.rank:
        raise ValidationError(f"mode {mode} out of range for rank {t.rank}")
    if t.variance[mode] != want_before:
        have = "up" if want_before == DOWN else "down"
        raise ValidationError(f"mode {mode} is already {have}")
    if t.extents[mode] != metric_t.extents[0]:
        raise ValidationError(
            f"extent {t.extents[mode]} of mode {mode} does not match metric dimension {metric_t.extents[0]}"
        )
    after = DOWN if want_before == UP else UP
    labels = [f"i{k}" for k in range(t.rank)]
    left = Operand(t.name or "T", tuple(Index(lab, v) for lab, v in zip(labels, t.variance)))
    right = Operand("g", (Index(labels[mode], after), Index("n", after)))
    out_idx = list(left.indices)
    out_idx[mode] = Index("n", after)
    spec = ContractionSpec(Operand("R", tuple(out_idx)), left, right)
    v = validate(spec, t, metric_t)
    out, _ = execute(plan(v), t, metric_t, backend)
    out.name = t.name
    return out


def lower_index(t, mode, m, backend="reference"):
    """Contract up-index ``mode`` of ``t`` with ``g``; the mode becomes a down index."""
    return _apply(t, mode, m.g, UP, backend)


def raise_index(t, mode, m, backend="reference"):
    """Contract down-index ``mode`` of ``t`` with the inverse metric."""
    return _apply(t, mode, m.g_inv, DOWN, backend)
