"""Dense tensor contractions mapped onto BLAS kernels by slicing."""

from .estimator import ContractionEstimator, check_tensor
from .exceptions import (
    ContractionError,
    EinsteinError,
    ExecutionError,
    ExpressionSyntaxError,
    KernelUnreachableError,
    SingularMetricError,
    SlicingError,
    TensorError,
    ValidationError,
    WorkCapExceeded,
)
from .executor import ExecutionStats, execute, execute_all_slicings
from .expr import ContractionSpec, ValidatedContraction, flop_count, parse, unparse, validate, validate_extents
from .kernels import KernelBackend, ReferenceBackend, ScipyBackend, get_backend
from .metric import MetricTensor, invert_metric, lower_index, raise_index, spherical_metric
from .oracle import contract_naive, max_relative_error
from .planner import (
    ContractionClass,
    ExecutionPlan,
    Kernel,
    RequirementReport,
    check_requirements,
    classify,
    enumerate_slicings,
    plan,
    render_plan,
)
from .tensor import PackedMatrix, SliceView, Tensor, create_tensor, pack_slice, read_tensor, slice_view, stride_of, write_tensor

__version__ = "0.1.0"

__all__ = [
    "ContractionClass", "ContractionError", "ContractionEstimator", "ContractionSpec", "EinsteinError",
    "ExecutionError", "ExecutionPlan", "ExecutionStats", "ExpressionSyntaxError", "Kernel", "KernelBackend",
    "KernelUnreachableError", "MetricTensor", "PackedMatrix", "ReferenceBackend", "RequirementReport",
    "ScipyBackend", "SingularMetricError", "SliceView", "SlicingError", "Tensor", "TensorError",
    "ValidatedContraction", "ValidationError", "WorkCapExceeded", "check_requirements", "check_tensor",
    "classify", "contract_naive", "create_tensor", "enumerate_slicings", "execute", "execute_all_slicings",
    "flop_count", "get_backend", "invert_metric", "lower_index", "max_relative_error", "pack_slice", "parse",
    "plan", "raise_index", "read_tensor", "render_plan", "slice_view", "spherical_metric", "stride_of",
    "unparse", "validate", "validate_extents", "write_tensor",
]
