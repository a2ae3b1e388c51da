import pytest

from blastensor.expr import parse, validate
from blastensor.tensor import create_tensor


def operands(expr, extents, seed=0, positional=False):
    """Random operands for ``expr`` with the given label extents, plus the validated contraction."""
    spec = parse(expr, positional=positional)
    left = create_tensor([extents[lab] for lab in spec.left.labels], spec.left.variance, "random", seed=seed)
    right = create_tensor([extents[lab] for lab in spec.right.labels], spec.right.variance, "random", seed=seed + 1)
    return validate(spec, left, right), left, right


@pytest.fixture
def make_operands():
    return operands
