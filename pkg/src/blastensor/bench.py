"""Benchmark sweeps: time each kernel choice on fixed contraction shapes, write CSV."""

from __future__ import annotations

import csv
import math
import os
import statistics
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import KernelUnreachableError, WorkCapExceeded
from .executor import execute
from .expr import parse, validate
from .kernels import get_backend
from .oracle import max_relative_error, naive_entry
from .planner import Kernel, plan
from .tensor import create_tensor

SQUARE3D = (
    "R[+a,-e] = A[+a,+b,+g] * B[-e,-b,-g]",
    "R[+b,-e] = A[+a,+b,+g] * B[-g,-a,-e]",
)
RANK4 = (
    "R[+a,+b,+c,+d] = X[+i,+a,+j,+b] * Y[-i,+c,-j,+d]",
    "R[+a,+b,+c,+d] = X[+i,+a,+j,+b] * Y[-j,+c,-i,+d]",
)
DEFAULT_SIZES = {
    "square3d": (50, 100, 150, 200),
    "cc4d": (100, 200, 300),
    "gr4d": (20, 30, 40),
    "custom": (1,),
}
DEFAULT_KERNELS = {
    "square3d": ("GEMM", "COPY+GEMM", "GEMV", "GER"),
    "cc4d": ("GEMM", "COPY+GEMM", "DOT", "GER"),
    "gr4d": ("GEMM", "COPY+GEMM", "DOT", "GER"),
    "custom": ("GEMM", "COPY+GEMM", "GEMV", "GER", "DOT"),
}
DEFAULT_MEM_CAP = 2 * 1024**3
CSV_COLUMNS = (
    "experiment", "expression", "size", "kernel", "backend", "repetitions",
    "median_time", "gflops", "packed_bytes", "status", "verified",
)


@dataclass
class BenchConfig:
    """``custom`` runs ``expression`` with ``extents``; an extent of ``"n"`` takes the sweep size."""

    experiment: str = "square3d"
    sizes: tuple = ()
    kernels: tuple = ()
    backend: str = "reference"
    repetitions: int = 5
    seed: int = 0
    expression: str | None = None
    extents: dict = field(default_factory=dict)
    verify: bool = False
    workers: int = 1
    mem_cap: int = DEFAULT_MEM_CAP

    def __post_init__(self):
        if self.experiment not in DEFAULT_SIZES:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        self.sizes = tuple(int(s) for s in (self.sizes or DEFAULT_SIZES[self.experiment]))
        self.kernels = tuple(Kernel.parse(k) for k in (self.kernels or DEFAULT_KERNELS[self.experiment]))
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.sizes or min(self.sizes) < 1:
            raise ValueError("size sweep must be nonempty with positive sizes")
        if self.experiment == "custom" and (not self.expression or not self.extents):
            raise ValueError("custom experiment needs an expression and per-label extents")


@dataclass
class BenchRow:
    experiment: str
    expression: str
    size: int
    kernel: str
    backend: str
    repetitions: int
    median_time: float | None = None
    gflops: float | None = None
    packed_bytes: int | None = None
    status: str = "ok"
    verified: str = ""

    def as_dict(self):
        def fmt(x, spec):
            return "" if x is None else format(x, spec)

        return {
            "experiment": self.experiment,
            "expression": self.expression,
            "size": self.size,
            "kernel": self.kernel,
            "backend": self.backend,
            "repetitions": self.repetitions,
            "median_time": fmt(self.median_time, ".6e"),
            "gflops": fmt(self.gflops, ".4f"),
            "packed_bytes": "" if self.packed_bytes is None else self.packed_bytes,
            "status": self.status,
            "verified": self.verified,
        }


def experiment_extents(config, expression, size):
    """Label extents for one point of the sweep."""
    if config.experiment == "square3d":
        return {lab: size for lab in "abeg"}
    if config.experiment == "cc4d":
        free = max(1, size // 10)
        return {"i": size, "j": size, "a": free, "b": 1, "c": free, "d": free}
    if config.experiment == "gr4d":
        return {"i": 4, "j": 4, "a": size, "b": 1, "c": size, "d": size}
    return {lab: size if str(e) == "n" else int(e) for lab, e in config.extents.items()}


def experiment_expressions(config):
    if config.experiment == "square3d":
        return SQUARE3D
    if config.experiment in ("cc4d", "gr4d"):
        return RANK4
    return (config.expression,)


def _operands(spec, extents, seed):
    le = [extents[lab] for lab in spec.left.labels]
    re_ = [extents[lab] for lab in spec.right.labels]
    return (
        create_tensor(le, spec.left.variance, "random", seed=seed, name=spec.left.name),
        create_tensor(re_, spec.right.variance, "random", seed=seed + 1, name=spec.right.name),
    )


def memory_estimate(spec, extents):
    """Bytes for both operands, the output, and the largest per-slice buffers."""
    def size(op):
        return math.prod(extents[lab] for lab in op.labels)

    base = size(spec.left) + size(spec.right) + size(spec.output)
    big = sorted(extents.values(), reverse=True)
    buffers = 3 * (big[0] * (big[1] if len(big) > 1 else 1))
    return 8 * (base + buffers)


def check_memory(config):
    for expr in experiment_expressions(config):
        spec = parse(expr)
        for size in config.sizes:
            ext = experiment_extents(config, expr, size)
            need = memory_estimate(spec, ext)
            if need > config.mem_cap:
                raise WorkCapExceeded(
                    f"{config.experiment} size {size} needs about {need} bytes, cap is {config.mem_cap}"
                )


def verify_sample(v, left, right, out, rng, samples=8, tol=1e-10):
    """Compare a few random output entries with the oracle, relative to the largest reference."""
    shape = v.output_extents
    got, ref = [], []
    for _ in range(samples):
        coords = tuple(int(rng.integers(e)) for e in shape)
        ref.append(naive_entry(v, left, right, coords))
        got.append(out.data[out.offset(coords)] if shape else out.data[0])
    return max_relative_error(np.array(got), np.array(ref)) <= tol


def run_bench(config, progress=None):
    """Run the sweep one row at a time; unreachable kernels become rows with that status."""
    check_memory(config)
    backend = get_backend(config.backend)
    rows = []
    rng = np.random.default_rng(config.seed)
    for expr in experiment_expressions(config):
        spec = parse(expr)
        for size in config.sizes:
            ext = experiment_extents(config, expr, size)
            left, right = _operands(spec, ext, config.seed)
            v = validate(spec, left, right)
            for kernel in config.kernels:
                row = BenchRow(config.experiment, expr, size, kernel.value, backend.name, config.repetitions)
                try:
                    p = plan(v, kernel=kernel)
                except KernelUnreachableError as exc:
                    row.status = f"unreachable ({exc.requirement})"
                    rows.append(row)
                    continue
                out, stats = execute(p, left, right, backend, config.workers)  # warm-up
                times = []
                for _ in range(config.repetitions):
                    t0 = time.perf_counter()
                    out, stats = execute(p, left, right, backend, config.workers)
                    times.append(time.perf_counter() - t0)
                row.median_time = statistics.median(times)
                row.gflops = p.flops / row.median_time / 1e9
                row.packed_bytes = stats.packed_bytes
                if config.verify:
                    row.verified = "pass" if verify_sample(v, left, right, out, rng) else "fail"
                rows.append(row)
                if progress is not None:
                    progress(row)
    return rows


def write_csv(rows, dest):
    """Write rows to a path or an open text stream."""
    def emit(fh):
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.as_dict())

    if dest is None or dest == "-":
        emit(sys.stdout)
    elif isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            emit(fh)
    else:
        emit(dest)

