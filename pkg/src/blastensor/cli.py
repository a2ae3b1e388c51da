"""Command-line front end: ``plan``, ``enumerate``, ``run`` and ``bench``.

Exit status 0 on success, 1 when verification fails, 2 for usage, parse or
planning errors, 3 when a work or memory cap is hit.
"""

from __future__ import annotations

import argparse
import csv
import sys

from .bench import BenchConfig, memory_estimate, run_bench, write_csv
from .exceptions import ContractionError, WorkCapExceeded
from .executor import execute
from .expr import parse, validate, validate_extents
from .kernels import get_backend
from .oracle import DEFAULT_WORK_CAP, contract_naive, max_relative_error
from .planner import ContractionClass, enumerate_slicings, plan, render_plan, storage_advice
from .tensor import create_tensor, read_tensor, write_tensor

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3
VERIFY_TOL = 1e-10


def parse_extents(text):
    """``"a=4,b=5"`` -> ``{"a": 4, "b": 5}``; values may be ``n`` for bench sweeps."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise argparse.ArgumentTypeError(f"bad extent {item!r}; expected label=value")
        value = value.strip()
        if value != "n":
            try:
                value = int(value)
            except ValueError:
                raise argparse.ArgumentTypeError(f"extent of {key.strip()!r} is not an integer: {value!r}") from None
        out[key.strip()] = value
    return out


def _csv_list(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _validated(args):
    spec = parse(args.expr, positional=args.positional)
    return validate_extents(spec, args.extents)


def cmd_plan(args, out):
    v = _validated(args)
    p = plan(v, kernel=args.kernel)
    print(render_plan(p), file=out)
    if p.cls is ContractionClass.THREE_ONE:
        for line in storage_advice(v):
            print(f"advice: {line}", file=out)
    return EXIT_OK


def cmd_enumerate(args, out):
    v = _validated(args)
    header = ("s_left", "s_right", "R1", "R2", "R3", "fallback", "kernel")
    rows = []
    for s_l, s_r, rep in enumerate_slicings(v):
        rows.append((
            "".join(map(str, s_l)), "".join(map(str, s_r)),
            *("ok" if f else "fail" for f in (rep.r1_ok, rep.r2_ok, rep.r3_ok)),
            rep.fallback, rep.kernel.value,
        ))
    if args.csv:
        fh = sys.stdout if args.csv == "-" else open(args.csv, "w", newline="", encoding="utf-8")
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        finally:
            if fh is not sys.stdout:
                fh.close()
        return EXIT_OK
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(), file=out)
    for r in rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip(), file=out)
    return EXIT_OK


def cmd_run(args, out):
    spec = parse(args.expr, positional=args.positional)
    if args.left and args.right:
        left, right = read_tensor(args.left), read_tensor(args.right)
    else:
        v0 = validate_extents(spec, args.extents)
        need = memory_estimate(spec, dict(v0.extents))
        if need > args.mem_cap:
            raise WorkCapExceeded(f"operands need about {need} bytes, cap is {args.mem_cap}")
        left = create_tensor(v0.left_extents, spec.left.variance, "random", seed=args.seed, name=spec.left.name)
        right = create_tensor(v0.right_extents, spec.right.variance, "random", seed=args.seed + 1,
                              name=spec.right.name)
    v = validate(spec, left, right)
    p = plan(v, kernel=args.kernel)
    result, stats = execute(p, left, right, get_backend(args.backend), args.workers)
    if args.out:
        write_tensor(result, sys.stdout if args.out == "-" else args.out)
    line = (
        f"kernel={p.kernel} class={p.cls} calls={stats.kernel_calls} packed_bytes={stats.packed_bytes} "
        f"flops={stats.flops} wall_time={stats.wall_time:.6e}"
    )
    status = EXIT_OK
    if args.verify:
        ref = contract_naive(v, left, right, work_cap=args.work_cap)
        err = max_relative_error(result, ref)
        line += f" max_rel_err={err:.3e}"
        if not err <= VERIFY_TOL:
            line += " verification=FAIL"
            status = EXIT_VERIFY
        else:
            line += " verification=ok"
    print(line, file=sys.stderr if args.out == "-" else out)
    return status


def cmd_bench(args, out):
    config = BenchConfig(
        experiment=args.experiment,
        sizes=tuple(int(s) for s in _csv_list(args.sizes)) if args.sizes else (),
        kernels=_csv_list(args.kernels) if args.kernels else (),
        backend=args.backend,
        repetitions=args.reps,
        seed=args.seed,
        expression=args.expr,
        extents=args.extents,
        verify=args.verify,
        workers=args.workers,
        mem_cap=args.mem_cap,
    )
    rows = run_bench(config)
    write_csv(rows, args.csv or out)
    if args.verify and any(r.verified == "fail" for r in rows):
        return EXIT_VERIFY
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--extents", type=parse_extents, default={}, help="label extents, e.g. a=4,b=5")
    common.add_argument("--positional", action="store_true", help="skip upper/lower variance checks")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--backend", choices=("reference", "external"), default="reference")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--mem-cap", type=int, default=2 * 1024**3, help="memory cap in bytes")

    parser = argparse.ArgumentParser(prog="blastensor", description="Map tensor contractions onto BLAS kernels.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="classify and plan a contraction")
    p.add_argument("expr")
    p.add_argument("--kernel", help="force a kernel kind (GEMM, COPY+GEMM, GEMV, ...)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("enumerate", parents=[common], help="list every slicing with its kernel")
    p.add_argument("expr")
    p.add_argument("--csv", help="write CSV to this path ('-' for stdout)")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("run", parents=[common], help="execute a contraction")
    p.add_argument("expr")
    p.add_argument("--kernel")
    p.add_argument("--verify", action="store_true", help="compare with the brute-force oracle")
    p.add_argument("--out", help="write the result tensor here ('-' for stdout)")
    p.add_argument("--left", help="left operand tensor file")
    p.add_argument("--right", help="right operand tensor file")
    p.add_argument("--work-cap", type=int, default=DEFAULT_WORK_CAP, help="oracle multiply-add cap")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", parents=[common], help="run a timing sweep and write CSV")
    p.add_argument("--experiment", choices=("square3d", "cc4d", "gr4d", "custom"), default="square3d")
    p.add_argument("--sizes", help="comma-separated size sweep")
    p.add_argument("--kernels", help="comma-separated kernel kinds")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--expr", help="expression for the custom experiment")
    p.add_argument("--verify", action="store_true", help="check sampled entries against the oracle")
    p.add_argument("--csv", help="output path (default stdout)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run" and bool(args.left) != bool(args.right):
        parser.error("--left and --right must be given together")
    try:
        return args.func(args, out)
    except WorkCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ContractionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
