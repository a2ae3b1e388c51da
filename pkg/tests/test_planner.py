import itertools

import pytest

from blastensor.exceptions import KernelUnreachableError, SlicingError
from blastensor.expr import parse, validate_extents
from blastensor.planner import (
    ContractionClass as C,
    Kernel as K,
    check_requirements,
    classify,
    enumerate_slicings,
    plan,
    render_plan,
    storage_advice,
)

PACKED3 = "R[+b,-e] = A[+a,+b,+g] * B[-g,-a,-e]"
DIRECT3 = "R[+a,-e] = A[+a,+b,+g] * B[-e,-b,-g]"
FULL3 = "K[] = T[+a,+b,+g] * S[-a,-b,-g]"
MATVEC3 = {
    "1": "R[+a] = T[+a,+b,+g] * G[-b,-g]",
    "2": "R[+g] = T[+a,+b,+g] * G[-a,-b]",
    "3": "R[+b] = T[+a,+b,+g] * G[-a,-g]",
}
DIRECT4 = "R[+a,+b,+c,+d] = X[+i,+a,+j,+b] * Y[-i,+c,-j,+d]"
PACKED4 = "R[+a,+b,+c,+d] = X[+i,+a,+j,+b] * Y[-j,+c,-i,+d]"
MATMUL = "C[+i,-j] = A[+i,-k] * B[+k,-j]"


def v_of(expr, n=4, **extents):
    spec = parse(expr)
    ext = dict.fromkeys(spec.labels, n)
    ext.update(extents)
    return validate_extents(spec, ext)


def catalog(expr):
    return {(s_l, s_r): rep.kernel for s_l, s_r, rep in enumerate_slicings(v_of(expr))}


@pytest.mark.parametrize(
    "expr,cls",
    [(FULL3, C.ONE), (MATVEC3["1"], C.TWO), (PACKED3, C.THREE_ONE), (DIRECT3, C.THREE_TWO), (DIRECT4, C.THREE_TWO), (PACKED4, C.THREE_ONE)],
)
def test_classify(expr, cls):
    assert classify(v_of(expr)) is cls


def test_class2_either_side():
    assert classify(v_of("R[+c] = G[-a,-b] * T[+a,+b,+c]")) is C.TWO


def test_mode0_pair_contracted_together_is_3_2():
    assert classify(v_of("R[+b,-e] = A[+a,+b,+g] * B[-a,-g,-e]")) is C.THREE_TWO


def test_direct3_gemm():
    rep = check_requirements(v_of(DIRECT3), (0, 1, 0), (0, 1, 0))
    assert (rep.r1_ok, rep.r2_ok, rep.r3_ok, rep.fallback, rep.kernel) == (True, True, True, "none", K.GEMM)


def test_sliced_stride1_mode_needs_copy():
    v = v_of("R[+a,+b,+r] = T[+a,+b,-s] * S[+s,+r]")
    rep = check_requirements(v, (1, 0, 0), (0, 0))
    assert not rep.r1_ok and rep.r2_ok and rep.r3_ok
    assert rep.fallback == "F1" and rep.kernel is K.COPY_GEMM


def test_packed3_gemv():
    rep = check_requirements(v_of(PACKED3), (0, 0, 1), (1, 0, 1))
    assert not rep.r2_ok and rep.fallback == "F2" and rep.kernel is K.GEMV


def test_packed3_ger():
    rep = check_requirements(v_of(PACKED3), (1, 0, 1), (1, 1, 0))
    assert not rep.r2_ok and not rep.r3_ok and rep.kernel is K.GER


def test_packed4_dot():
    rep = check_requirements(v_of(PACKED4), (0, 1, 0, 1), (0, 1, 0, 1))
    assert not rep.r3_ok and rep.fallback == "F3" and rep.kernel is K.DOT


def test_inconsistent_slicing_rejected():
    with pytest.raises(SlicingError):
        check_requirements(v_of(PACKED3), (1, 0, 0), (0, 0, 0))


def test_bad_vector_length():
    with pytest.raises(SlicingError):
        check_requirements(v_of(PACKED3), (1, 0), (0, 1, 0))


def test_matmul_unsliced_is_gemm():
    rep = check_requirements(v_of(MATMUL), (0, 0), (0, 0))
    assert rep.kernel is K.GEMM and rep.fallback == "none"


def test_matmul_decompositions():
    cat = catalog(MATMUL)
    assert cat[((1, 0), (0, 0))] is K.GEMV  # rows of A
    assert cat[((0, 0), (0, 1))] is K.GEMV  # columns of B
    assert cat[((0, 1), (1, 0))] is K.GER  # sum over k
    assert cat[((1, 0), (0, 1))] is K.DOT  # every entry
    assert cat[((0, 0), (0, 0))] is K.GEMM


def test_direct4_catalog_has_gemm():
    assert catalog(DIRECT4)[((0, 0, 1, 1), (0, 0, 1, 1))] is K.GEMM


def test_packed4_catalog():
    cat = catalog(PACKED4)
    assert cat[((0, 0, 1, 1), (1, 1, 0, 0))] is K.COPY_GEMM
    assert cat[((0, 1, 0, 1), (0, 1, 0, 1))] is K.DOT
    assert cat[((1, 0, 1, 1), (1, 0, 1, 1))] is K.GER


def test_packed3_catalog():
    cat = catalog(PACKED3)
    assert cat[((0, 0, 1), (1, 0, 1))] is K.GEMV
    assert cat[((1, 0, 1), (1, 1, 0))] is K.GER
    assert K.COPY_GEMM in cat.values() and K.GEMM not in cat.values()


def test_direct3_two_gemm_entries():
    cat = catalog(DIRECT3)
    gemm = sorted(k for k, kern in cat.items() if kern is K.GEMM)
    assert gemm == [((0, 0, 1), (0, 0, 1)), ((0, 1, 0), (0, 1, 0))]


def test_enumeration_is_lexicographic_and_rank_limited():
    v = v_of(PACKED4)
    rows = enumerate_slicings(v)
    keys = [s_l + s_r for s_l, s_r, _ in rows]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)
    for s_l, s_r, _ in rows:
        assert len(s_l) - sum(s_l) <= 2 and len(s_r) - sum(s_r) <= 2


def test_auto_class_3_2():
    p = plan(v_of(DIRECT3))
    assert p.kernel is K.GEMM
    assert len(p.loop_nest) == 1 and p.loop_nest[0].contracted
    assert p.accumulates and not p.copies


def test_auto_class_1():
    p = plan(v_of(FULL3, 3))
    assert p.kernel is K.DOT
    assert p.kernel_map.k is not None and not p.kernel_map.inner
    assert [ll.extent for ll in p.loop_nest] == [3, 3] and all(ll.contracted for ll in p.loop_nest)
    assert p.calls == 9


def test_auto_class_1_longest_label():
    p = plan(v_of(FULL3, a=2, b=7, g=3))
    assert p.kernel_map.k == "b"


@pytest.mark.parametrize("case", ["1", "2", "3"])
def test_auto_class_2(case):
    assert plan(v_of(MATVEC3[case])).kernel in (K.GEMV, K.COPY_GEMV)


def test_forced_copy_gemv():
    p = plan(v_of(MATVEC3["2"]), slicing=((1, 0, 0), (1, 0)))
    assert p.kernel is K.COPY_GEMV and len(p.copies) == 1


def test_matvec3_first_case_options():
    v = v_of(MATVEC3["1"])
    assert check_requirements(v, (0, 0, 1), (0, 1)).kernel is K.GEMV
    assert check_requirements(v, (0, 1, 0), (1, 0)).kernel is K.GEMV
    assert check_requirements(v, (1, 0, 0), (0, 0)).kernel is K.DOT


def test_auto_class_3_1():
    p = plan(v_of(PACKED3))
    assert p.kernel is K.COPY_GEMM
    assert sum(c.operand != "output" for c in p.copies) == 1


@pytest.mark.parametrize("expr", [FULL3, MATVEC3["1"], PACKED3, PACKED4])
def test_force_gemm_unreachable(expr):
    with pytest.raises(KernelUnreachableError) as info:
        plan(v_of(expr), kernel="GEMM")
    assert info.value.requirement in ("R1", "R2", "R3")


def test_force_gemm_names_r1_for_class_3_1():
    with pytest.raises(KernelUnreachableError, match="kernel unreachable: R1 violated"):
        plan(v_of(PACKED3), kernel="gemm")


def test_force_gemm_names_r3_for_class_1():
    with pytest.raises(KernelUnreachableError) as info:
        plan(v_of(FULL3), kernel=K.GEMM)
    assert info.value.requirement == "R3"


def test_force_kernel_and_slicing_exclusive():
    with pytest.raises(ValueError):
        plan(v_of(PACKED3), kernel="GER", slicing=((0, 0, 0), (0, 0, 0)))


def test_output_s_vector():
    p = plan(v_of(PACKED3), kernel="GER")
    spec = p.contraction.spec
    for lab, flag in zip(spec.output.labels, p.s_output):
        assert flag == int(lab in p.sliced_labels)


def test_gemm_prefers_writable_output():
    # keeping b would give the bigger kernel, but slicing b keeps the output's stride-1 mode
    v = v_of("R[+a,+b,+d] = A[+k,+a,+b] * B[-k,+d]", a=2, b=5)
    p = plan(v)
    assert p.kernel is K.GEMM and p.sliced_labels == ("b",)
    assert not p.report.output_staged
    staged = plan(v, slicing=((0, 1, 0), (0, 0)))
    assert staged.kernel is K.GEMM and staged.report.output_staged
    assert [c.operand for c in staged.copies] == ["output"]


def test_render_plan_golden():
    text = render_plan(plan(v_of(DIRECT3, 4)))
    assert text == "\n".join([
        "expression: R[+a,-e] = A[+a,+b,+g] * B[-e,-b,-g]",
        "class: 3.2",
        "deltas: (1, 1)",
        "extents: a=4 b=4 g=4 e=4",
        "slicing_left: (0, 0, 1)",
        "slicing_right: (0, 0, 1)",
        "slicing_output: (0, 0)",
        "kernel: GEMM",
        "requirements: R1=ok R2=ok R3=ok fallback=none",
        "loop_nest: g(contracted,4)",
        "kernel_map: M=a N=e K=b A=left B=right trans_a=0 trans_b=1",
        "copies: 0",
        "kernel_calls: 4",
        "flops: 512",
    ])


def test_storage_advice_for_3_1():
    advice = storage_advice(v_of(PACKED3))
    assert advice and all("Class 3.2" in line for line in advice)
    assert storage_advice(v_of(DIRECT3)) == []


def test_kernel_parse_aliases():
    assert K.parse("copy_gemm") is K.COPY_GEMM
    assert K.parse("gemv") is K.GEMV
    with pytest.raises(ValueError):
        K.parse("SYRK")


def double3d():
    """All 18 double contractions of a rank-3 A with a rank-3 B sharing two labels."""
    out = []
    for free_a in "abg":
        con = [lab for lab in "abg" if lab != free_a]
        for pos in (2, 1, 0):
            for order in (con, con[::-1]):
                b = list(order)
                b.insert(pos, "e")
                b_txt = ",".join("-" + lab for lab in b)
                out.append(f"R[+{free_a},-e] = A[+a,+b,+g] * B[{b_txt}]")
    return out


def test_double3d_has_18_distinct():
    exprs = double3d()
    assert len(set(exprs)) == 18
    assert "R[+b,-e] = A[+a,+b,+g] * B[-g,-a,-e]" in exprs
    assert "R[+a,-e] = A[+a,+b,+g] * B[-e,-b,-g]" in exprs


def test_double3d_subclass_matches_gemm_reachability():
    # 3.2 exactly when some slicing reaches GEMM without copies
    for expr in double3d():
        v = v_of(expr)
        direct = any(rep.kernel is K.GEMM for _, _, rep in enumerate_slicings(v))
        assert (classify(v) is C.THREE_TWO) == direct, expr


def _random_specs(rng, count):
    out = []
    letters = "abcdefgh"
    while len(out) < count:
        p = int(rng.integers(1, 4))
        rl = int(rng.integers(max(p, 2), 5))
        rr = int(rng.integers(max(p, 2), 5))
        if rl - p + rr - p > 4:
            continue
        labs = list(rng.permutation(list(letters)))
        con = labs[:p]
        fl = labs[p:p + rl - p]
        fr = labs[rl:rl + rr - p]
        left = list(rng.permutation(con + fl))
        right = list(rng.permutation(con + fr))
        outl = list(rng.permutation(fl + fr))
        txt = "R[{}] = A[{}] * B[{}]".format(
            ",".join("+" + x for x in outl),
            ",".join("+" + x for x in left),
            ",".join(("-" if x in con else "+") + x for x in right),
        )
        ext = {x: int(rng.integers(1, 5)) for x in con + fl + fr}
        out.append(validate_extents(parse(txt), ext))
    return out


def test_recipes_and_partition_on_random_specs():
    import numpy as np

    for v in _random_specs(np.random.default_rng(11), 300):
        p = plan(v)
        cls = classify(v)
        expected = {
            C.ONE: {K.DOT}, C.TWO: {K.GEMV, K.COPY_GEMV}, C.THREE_ONE: {K.COPY_GEMM}, C.THREE_TWO: {K.GEMM},
        }[cls]
        assert p.kernel in expected, (str(v.spec), p.kernel)
        used = list(p.sliced_labels) + list(p.kernel_map.labels)
        assert sorted(used) == sorted(v.spec.labels)
        if v.deltas[0] >= 1 and v.deltas[1] >= 1:
            kinds = {rep.kernel for _, _, rep in enumerate_slicings(v)}
            assert kinds & {K.GEMM, K.COPY_GEMM}


def test_report_invariants_exhaustive():
    import numpy as np

    for v in _random_specs(np.random.default_rng(5), 60):
        spec = v.spec
        for bits in itertools.product((0, 1), repeat=len(spec.labels)):
            sliced = {lab for lab, b in zip(spec.labels, bits) if b}
            s_l = tuple(int(lab in sliced) for lab in spec.left.labels)
            s_r = tuple(int(lab in sliced) for lab in spec.right.labels)
            rep = check_requirements(v, s_l, s_r)
            assert (rep.kernel is K.GEMM) == (rep.r1_ok and rep.r2_ok and rep.r3_ok)
            assert (rep.fallback == "F1") == (not rep.r1_ok and rep.r2_ok and rep.r3_ok)
            assert (rep.fallback == "F1") == (rep.kernel is K.COPY_GEMM)
            over = sum(s_l) > len(s_l) - 2 or sum(s_r) > len(s_r) - 2
            if over:
                assert rep.fallback == "F2"
                assert rep.kernel in (K.GEMV, K.COPY_GEMV, K.GER, K.DOT, K.ELEMENTWISE)
