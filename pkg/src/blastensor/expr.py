"""Einstein-notation contraction expressions between two tensors.

Grammar (whitespace is ignored)::

    contraction := tensor '=' tensor '*' tensor
    tensor      := NAME '[' index (',' index)* ']' | NAME '[' ']'
    index       := ('+' | '-') NAME

``+`` marks an upper (contravariant) index and ``-`` a lower (covariant) one.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType

from .exceptions import EinsteinError, ExpressionSyntaxError, ValidationError
from .tensor import DOWN, UP


@dataclass(frozen=True)
class Index:
    label: str
    variance: str

    def render(self):
        return ("+" if self.variance == UP else "-") + self.label


@dataclass(frozen=True)
class Operand:
    name: str
    indices: tuple

    @property
    def labels(self):
        return tuple(ix.label for ix in self.indices)

    @property
    def rank(self):
        return len(self.indices)

    @property
    def variance(self):
        return tuple(ix.variance for ix in self.indices)

    def render(self):
        return f"{self.name}[{','.join(ix.render() for ix in self.indices)}]"


@dataclass(frozen=True)
class ContractionSpec:
    """``output = left * right`` with the Einstein pairing rules enforced.

    With ``strict`` (the default) every contracted pair must join an upper and
    a lower index and free indices keep their variance in the output;
    positional mode only enforces the exactly-once pairing rules.
    """

    output: Operand
    left: Operand
    right: Operand
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        _check_einstein(self)

    @cached_property
    def contracted(self):
        right = set(self.right.labels)
        return tuple(lab for lab in self.left.labels if lab in right)

    @cached_property
    def free_left(self):
        c = set(self.contracted)
        return tuple(lab for lab in self.left.labels if lab not in c)

    @cached_property
    def free_right(self):
        c = set(self.contracted)
        return tuple(lab for lab in self.right.labels if lab not in c)

    @property
    def p(self):
        return len(self.contracted)

    @cached_property
    def labels(self):
        """All distinct labels: left operand order, then right-only labels."""
        return self.left.labels + self.free_right

    def is_contracted(self, label):
        return label in self.contracted

    def __str__(self):
        return unparse(self)


def _check_einstein(spec):
    for op in (spec.output, spec.left, spec.right):
        dup = [lab for lab, n in Counter(op.labels).items() if n > 1]
        if dup:
            raise EinsteinError(f"label {dup[0]!r} appears more than once in {op.name}")

    total = Counter(spec.left.labels + spec.right.labels + spec.output.labels)
    for lab, n in total.items():
        if n >= 3:
            raise EinsteinError(f"label {lab!r} appears {n} times; an index may appear at most twice")

    left = {ix.label: ix.variance for ix in spec.left.indices}
    right = {ix.label: ix.variance for ix in spec.right.indices}
    out = {ix.label: ix.variance for ix in spec.output.indices}

    for lab in left.keys() & right.keys():
        if spec.strict and left[lab] == right[lab]:
            raise EinsteinError(
                f"contracted label {lab!r} has the same variance in both operands "
                "(strict mode needs one upper and one lower index)"
            )

    free = {lab: v for lab, v in left.items() if lab not in right}
    free.update({lab: v for lab, v in right.items() if lab not in left})
    for lab in out:
        if lab in left and lab in right:
            raise EinsteinError(f"contracted label {lab!r} must not appear in the output")
        if lab not in free:
            raise EinsteinError(f"output label {lab!r} does not appear in either operand")
    for lab, v in free.items():
        if lab not in out:
            raise EinsteinError(f"free label {lab!r} is missing from the output")
        if spec.strict and out[lab] != v:
            raise EinsteinError(f"free label {lab!r} changes variance between operand and output")

    if not left.keys() & right.keys():
        raise EinsteinError("no contracted index: outer products are not supported")


# -- parsing -----------------------------------------------------------------------

_PUNCT = set("[],+-=*")


def _tokenize(text):
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in _PUNCT:
            tokens.append((ch, ch, i))
            i += 1
        elif ch.isalnum() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
        else:
            raise ExpressionSyntaxError(f"unexpected character {ch!r}", i, text)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def expect(self, kind, what=None):
        tok = self.tokens[self.pos]
        if tok[0] != kind:
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExpressionSyntaxError(f"expected {what or repr(kind)}, found {found}", tok[2], self.text)
        self.pos += 1
        return tok

    def operand(self):
        name = self.expect("name", "tensor name")[1]
        self.expect("[")
        indices = []
        if self.peek()[0] != "]":
            indices.append(self.index())
            while self.peek()[0] == ",":
                self.pos += 1
                indices.append(self.index())
        self.expect("]", "',' or ']'")
        return Operand(name, tuple(indices))

    def index(self):
        tok = self.peek()
        if tok[0] not in ("+", "-"):
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExpressionSyntaxError(f"expected '+' or '-' before index label, found {found}", tok[2], self.text)
        self.pos += 1
        label = self.expect("name", "index label")[1]
        return Index(label, UP if tok[0] == "+" else DOWN)

    def contraction(self, strict):
        out = self.operand()
        self.expect("=", "'='")
        left = self.operand()
        self.expect("*", "'*'")
        right = self.operand()
        self.expect("end", "end of input")
        return ContractionSpec(out, left, right, strict)


def parse(expr, *, positional=False):
    """Parse ``expr`` into a :class:`ContractionSpec`.

    >>> parse("R[+b,-e] = A[+a,+b,+g] * B[-g,-a,-e]").contracted
    ('a', 'g')
    """
    return _Parser(expr).contraction(strict=not positional)


def unparse(spec):
    return f"{spec.output.render()} = {spec.left.render()} * {spec.right.render()}"


# -- validation against concrete operands -----------------------------------------


@dataclass(frozen=True)
class ValidatedContraction:
    spec: ContractionSpec
    extents: MappingProxyType
    deltas: tuple

    def extent(self, label):
        return self.extents[label]

    @property
    def left_extents(self):
        return tuple(self.extents[lab] for lab in self.spec.left.labels)

    @property
    def right_extents(self):
        return tuple(self.extents[lab] for lab in self.spec.right.labels)

    @property
    def output_extents(self):
        return tuple(self.extents[lab] for lab in self.spec.output.labels)

    @property
    def labels(self):
        return self.spec.labels


def validate(spec, left, right):
    """Bind label extents from the operands and compute the free-index counts."""
    for op, t in ((spec.left, left), (spec.right, right)):
        if t.rank != op.rank:
            raise ValidationError(f"{op.name} has {op.rank} indices but the tensor has rank {t.rank}")
        if spec.strict and tuple(t.variance) != op.variance:
            raise ValidationError(
                f"variance of {op.name} in the expression ({op.render()}) does not match "
                f"the tensor ({t.variance_string()})"
            )
    extents = {}
    for op, t in ((spec.left, left), (spec.right, right)):
        for lab, e in zip(op.labels, t.extents):
            if lab in extents and extents[lab] != e:
                raise ValidationError(f"extent mismatch on label {lab!r}: {extents[lab]} vs {e}")
            extents[lab] = e
    deltas = (left.rank - spec.p, right.rank - spec.p)
    return ValidatedContraction(spec, MappingProxyType(extents), deltas)


def validate_extents(spec, extents):
    """Like :func:`validate` but from a ``label -> extent`` mapping."""
    missing = [lab for lab in spec.labels if lab not in extents]
    if missing:
        raise ValidationError(f"no extent given for label(s) {', '.join(missing)}")
    bound = {lab: int(extents[lab]) for lab in spec.labels}
    for lab, e in bound.items():
        if e < 1:
            raise ValidationError(f"extent of {lab!r} must be >= 1, got {e}")
    deltas = (spec.left.rank - spec.p, spec.right.rank - spec.p)
    return ValidatedContraction(spec, MappingProxyType(bound), deltas)


def flop_count(v):
    """Two flops (multiply and add) per term of the full summation."""
    return 2 * math.prod(v.extents[lab] for lab in v.spec.labels)
