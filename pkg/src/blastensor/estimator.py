"""scikit-learn style facade over parse, validate, plan and execute.

``fit(left, right)`` binds extents, classifies and plans, and keeps ``right``
as the fitted operand; ``transform(left)`` contracts a new left operand of
the same extents against it.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils import check_array

from .executor import execute
from .expr import parse, validate
from .planner import classify, plan
from .tensor import Tensor


def check_tensor(x, variance=None, name=None):
    """Coerce ``x`` to a finite float64 :class:`Tensor`.

    Tensors pass through (their values are still checked); arrays are read
    with axis ``k`` as mode ``k``.
    """
    if isinstance(x, Tensor):
        if not np.all(np.isfinite(x.data)):
            raise ValueError("tensor contains NaN or infinity")
        return x
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        if not np.isfinite(arr):
            raise ValueError("tensor contains NaN or infinity")
    else:
        arr = check_array(arr, ensure_2d=False, allow_nd=True, dtype=np.float64)
    return Tensor.from_array(arr, variance, name)


class ContractionEstimator(TransformerMixin, BaseEstimator):
    def __init__(self, expression, kernel=None, slicing=None, backend="reference", workers=1, positional=False):
        self.expression = expression
        self.kernel = kernel
        self.slicing = slicing
        self.backend = backend
        self.workers = workers
        self.positional = positional

    def _operand(self, x, op):
        return check_tensor(x, None if isinstance(x, Tensor) else op.variance, op.name)

    def fit(self, X, y):
        spec = parse(self.expression, positional=self.positional)
        left = self._operand(X, spec.left)
        right = self._operand(y, spec.right)
        self.spec_ = spec
        self.validated_ = validate(spec, left, right)
        self.class_ = classify(self.validated_)
        self.plan_ = plan(self.validated_, kernel=self.kernel, slicing=self.slicing)
        self.flops_ = self.plan_.flops
        self.right_ = right
        return self

    def transform(self, X):
        if not hasattr(self, "plan_"):
            raise NotFittedError("call fit before transform")
        left = self._operand(X, self.spec_.left)
        validate(self.spec_, left, self.right_)
        out, self.stats_ = execute(self.plan_, left, self.right_, self.backend, self.workers)
        return out
