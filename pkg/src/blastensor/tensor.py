"""Dense tensors in generalized column-major order, slice views and packing.

Mode 0 always has stride 1 and the stride of mode ``k`` is the product of
the extents of the modes before it. A rank-0 tensor holds a single value.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import as_strided

from . import _refkernels
from .exceptions import TensorError

UP = "up"
DOWN = "down"

_VARIANCE_ALIASES = {
    "+": UP,
    "up": UP,
    "u": UP,
    "contravariant": UP,
    "-": DOWN,
    "down": DOWN,
    "d": DOWN,
    "covariant": DOWN,
}


def normalize_variance(variance, rank):
    """Return a tuple of ``"up"``/``"down"`` markers of length ``rank``.

    Accepts ``None`` (all up), a ``"+-"`` string, or a sequence of markers.
    """
    if variance is None:
        return (UP,) * rank
    if isinstance(variance, str) and all(ch in "+-" for ch in variance):
        variance = list(variance)
    out = []
    for v in variance:
        try:
            out.append(_VARIANCE_ALIASES[str(v).lower()])
        except KeyError:
            raise TensorError(f"unknown variance marker {v!r}") from None
    if len(out) != rank:
        raise TensorError(f"variance has {len(out)} markers for a rank-{rank} tensor")
    return tuple(out)


def column_major_strides(extents):
    strides = []
    acc = 1
    for e in extents:
        strides.append(acc)
        acc *= e
    return tuple(strides)


@dataclass(eq=False)
class Tensor:
    """Dense float64 tensor stored flat in generalized column-major order."""

    extents: tuple
    variance: tuple
    data: np.ndarray
    name: str | None = None
    strides: tuple = field(init=False, repr=False)

    def __post_init__(self):
        self.extents = tuple(int(e) for e in self.extents)
        for e in self.extents:
            if e < 1:
                raise TensorError(f"extents must be >= 1, got {self.extents}")
        self.variance = normalize_variance(self.variance, len(self.extents))
        data = np.ascontiguousarray(self.data, dtype=np.float64).reshape(-1)
        if data.size != math.prod(self.extents):
            raise TensorError(
                f"data has {data.size} elements, extents {self.extents} need {math.prod(self.extents)}"
            )
        self.data = data
        self.strides = column_major_strides(self.extents)

    @property
    def rank(self):
        return len(self.extents)

    @property
    def size(self):
        return self.data.size

    @property
    def array(self):
        """Writable numpy view indexed in mode order."""
        if not self.extents:
            return self.data.reshape(())
        return self.data.reshape(self.extents, order="F")

    def offset(self, coords):
        if len(coords) != self.rank:
            raise TensorError(f"expected {self.rank} coordinates, got {len(coords)}")
        off = 0
        for c, e, s in zip(coords, self.extents, self.strides):
            if not 0 <= c < e:
                raise TensorError(f"coordinate {tuple(coords)} outside extents {self.extents}")
            off += c * s
        return off

    def __getitem__(self, coords):
        if not isinstance(coords, tuple):
            coords = (coords,)
        return float(self.data[self.offset(coords)])

    def copy(self, name=None):
        return Tensor(self.extents, self.variance, self.data.copy(), name if name is not None else self.name)

    def variance_string(self):
        return "".join("+" if v == UP else "-" for v in self.variance)

    @classmethod
    def from_array(cls, array, variance=None, name=None):
        """Build a tensor whose mode ``k`` is axis ``k`` of ``array``."""
        arr = np.asarray(array, dtype=np.float64)
        return cls(arr.shape, variance, arr.ravel(order="F").copy(), name)


def create_tensor(extents, variance=None, fill="zeros", *, seed=None, name=None):
    """Allocate a tensor.

    ``fill`` is ``"zeros"``, ``"sequential"`` (0, 1, 2, ... in storage order),
    ``"random"`` (uniform on [0, 1), reproducible for a given ``seed``) or a
    sequence of values given in storage order.
    """
    extents = tuple(int(e) for e in extents)
    if any(e < 1 for e in extents):
        raise TensorError(f"extents must be >= 1, got {extents}")
    size = math.prod(extents)
    if isinstance(fill, str):
        if fill == "zeros":
            data = np.zeros(size)
        elif fill == "sequential":
            data = np.arange(size, dtype=np.float64)
        elif fill == "random":
            if seed is None:
                raise TensorError("random fill requires a seed")
            data = np.random.default_rng(seed).random(size)
        else:
            raise TensorError(f"unknown fill {fill!r}")
    else:
        data = np.asarray(fill, dtype=np.float64).reshape(-1)
        if data.size != size:
            raise TensorError(f"{data.size} values given for extents {extents}")
        data = data.copy()
    return Tensor(extents, variance, data, name)


def stride_of(t, mode):
    if not 0 <= mode < t.rank:
        raise TensorError(f"mode {mode} out of range for rank {t.rank}")
    return t.strides[mode]


@dataclass(frozen=True)
class SliceView:
    """Lower-rank window into a parent tensor obtained by fixing some modes.

    ``kept`` lists ``(mode, extent, stride)`` for the unfixed modes in their
    original order.
    """

    parent: Tensor
    base_offset: int
    kept: tuple

    @property
    def rank(self):
        return len(self.kept)

    @property
    def shape(self):
        return tuple(e for _, e, _ in self.kept)

    @property
    def element_strides(self):
        return tuple(s for _, _, s in self.kept)

    @property
    def modes(self):
        return tuple(m for m, _, _ in self.kept)

    def address(self, coords):
        if len(coords) != self.rank:
            raise TensorError(f"view has rank {self.rank}, got {len(coords)} coordinates")
        off = self.base_offset
        for c, (_, e, s) in zip(coords, self.kept):
            if not 0 <= c < e:
                raise TensorError(f"coordinate {tuple(coords)} outside view shape {self.shape}")
            off += c * s
        return off

    def read(self, coords):
        return float(self.parent.data[self.address(coords)])

    def to_array(self):
        """Numpy view sharing memory with the parent."""
        item = self.parent.data.itemsize
        return as_strided(
            self.parent.data[self.base_offset:],
            shape=self.shape,
            strides=tuple(s * item for s in self.element_strides),
        )


def slice_view(t, s, fixed):
    """Fix every mode with ``s[k] == 1`` to the matching entry of ``fixed``.

    ``fixed`` holds one coordinate per sliced mode, in mode order.
    """
    s = tuple(int(x) for x in s)
    if len(s) != t.rank:
        raise TensorError(f"slicing vector of length {len(s)} for rank-{t.rank} tensor")
    if any(x not in (0, 1) for x in s):
        raise TensorError(f"slicing vector entries must be 0 or 1, got {s}")
    fixed = tuple(int(c) for c in fixed)
    if len(fixed) != sum(s):
        raise TensorError(f"{sum(s)} sliced modes but {len(fixed)} fixed coordinates")
    base = 0
    kept = []
    it = iter(fixed)
    for mode, (flag, e, st) in enumerate(zip(s, t.extents, t.strides)):
        if flag:
            c = next(it)
            if not 0 <= c < e:
                raise TensorError(f"fixed coordinate {c} outside extent {e} of mode {mode}")
            base += c * st
        else:
            kept.append((mode, e, st))
    return SliceView(t, base, tuple(kept))


@dataclass(slots=True)
class PackedMatrix:
    """Column-major matrix: element (i, j) lives at ``data[offset + i + j * ld]``.

    When ``copied`` is false, ``data`` is the parent tensor's buffer.
    """

    rows: int
    cols: int
    ld: int
    data: np.ndarray
    offset: int = 0
    copied: bool = False
    source: object = None

    @property
    def leading_dimension(self):
        return self.ld

    def to_array(self):
        item = self.data.itemsize
        return as_strided(self.data[self.offset:], (self.rows, self.cols), (item, self.ld * item))


@dataclass(slots=True)
class StridedVector:
    """Vector element ``i`` lives at ``data[offset + i * inc]``."""

    length: int
    data: np.ndarray
    offset: int = 0
    inc: int = 1

    def to_array(self):
        item = self.data.itemsize
        return as_strided(self.data[self.offset:], (self.length,), (self.inc * item,))


def pack_slice(v, out=None):
    """Turn a rank-2 view into a GEMM-ready matrix.

    Returns an alias when the first kept mode already has stride 1, otherwise
    copies into ``out`` (or a fresh buffer) with leading dimension = rows.
    """
    if v.rank != 2:
        raise TensorError(f"pack_slice needs a rank-2 view, got rank {v.rank}")
    (_, rows, rs), (_, cols, cs) = v.kept
    if rs == 1:
        return PackedMatrix(rows, cols, cs, v.parent.data, v.base_offset, False, v)
    if out is None:
        out = np.empty(rows * cols)
    _refkernels.pack_strided(v.parent.data, v.base_offset, rows, cols, rs, cs, out)
    return PackedMatrix(rows, cols, rows, out, 0, True, v)


# -- text file format ------------------------------------------------------------

_MAGIC = "TENSOR v1"


def format_tensor(t, per_line=6):
    name = t.name or "T"
    lines = [
        _MAGIC,
        f"name {name}",
        f"rank {t.rank}",
        ("extents " + " ".join(str(e) for e in t.extents)).rstrip(),
        ("variance " + t.variance_string()).rstrip(),
        "layout colmajor",
    ]
    vals = [format(float(x), ".17g") for x in t.data]
    for i in range(0, len(vals), per_line):
        lines.append(" ".join(vals[i:i + per_line]))
    return "\n".join(lines) + "\n"


def parse_tensor(text):
    lines = text.splitlines()
    if len(lines) < 6 or lines[0].strip() != _MAGIC:
        raise TensorError("not a 'TENSOR v1' file")

    def field_(line, key):
        parts = line.split()
        if not parts or parts[0] != key:
            raise TensorError(f"expected '{key}' line, got {line!r}")
        return parts[1:]

    name_parts = field_(lines[1], "name")
    name = name_parts[0] if name_parts else None
    rank_parts = field_(lines[2], "rank")
    if len(rank_parts) != 1:
        raise TensorError("rank line must hold one integer")
    rank = int(rank_parts[0])
    extents = tuple(int(x) for x in field_(lines[3], "extents"))
    if len(extents) != rank:
        raise TensorError(f"rank {rank} but {len(extents)} extents")
    var_parts = field_(lines[4], "variance")
    variance = var_parts[0] if var_parts else ""
    if len(variance) != rank or any(ch not in "+-" for ch in variance):
        raise TensorError(f"bad variance string {variance!r}")
    layout = field_(lines[5], "layout")
    if layout != ["colmajor"]:
        raise TensorError(f"unsupported layout {' '.join(layout)!r}")
    values = np.array(" ".join(lines[6:]).split(), dtype=np.float64)
    return Tensor(extents, variance, values, name)


def write_tensor(t, path):
    text = format_tensor(t)
    if isinstance(path, (str, os.PathLike)):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        path.write(text)


def read_tensor(path):
    if isinstance(path, (str, os.PathLike)):
        with open(path, encoding="ascii") as fh:
            return parse_tensor(fh.read())
    if isinstance(path, io.TextIOBase) or hasattr(path, "read"):
        return parse_tensor(path.read())
    raise TypeError(f"cannot read tensor from {type(path).__name__}")
