"""Offline symbolic replay tests: path conditions, the memory model rules,
simplification, and replay consistency."""

import random

import pytest

import coyote_mc.symexpr as sx
from coyote_mc import interp, ir
from coyote_mc.harness import assemble_unit, plan_harness
from coyote_mc.interp import TestInput, execute
from coyote_mc.minic.linker import link_program
from coyote_mc.minic.parser import parse_text
from coyote_mc.symex import (
    StaleTraceError,
    check_consistency,
    render_path_condition,
    replay_symbolic,
)


def build_unit(src, target, depth_limit=3):
    program = link_program([parse_text("u.mc", src)])
    plan = plan_harness(program, target, depth_limit)
    module = ir.inject_checks(ir.lower(assemble_unit(program, plan)))
    return module, plan


def run_and_replay(module, plan, bindings, fresh=None):
    trace = execute(
        module, plan.driver_name, TestInput(dict(bindings), fresh or {}),
        required_symbols=plan.symbol_map.ids(),
    )
    pc = replay_symbolic(module, trace, plan.symbol_map)
    return trace, pc


class TestReplay:
    def test_abs_negative_single_constraint(self):
        module, plan = build_unit(
            "int abs(int x){ if (x < 0) { return 0 - x; } return x; }", "abs"
        )
        _, pc = run_and_replay(module, plan, {0: -3})
        assert len(pc.constraints) == 1
        c = pc.constraints[0]
        assert c.taken_dir == "then"
        assert c.flippable
        assert sx.to_prefix(c.expr) == "(slt (sym 0) (const 0))"

    def test_constant_branch_not_flippable(self):
        module, plan = build_unit(
            "int f(int x){ if (1 < 2) { return 1; } return x; }", "f"
        )
        _, pc = run_and_replay(module, plan, {0: 0})
        assert len(pc.constraints) == 1
        assert not pc.constraints[0].flippable
        assert pc.constraints[0].expr == sx.TRUE

    def test_div_by_zero_ends_with_fail_constraint(self):
        module, plan = build_unit("int f(int a, int b){ return a / b; }", "f")
        trace, pc = run_and_replay(module, plan, {0: 4, 1: 0})
        assert trace.outcome == interp.OUTCOME_ERROR
        last = pc.constraints[-1]
        assert last.taken_dir == "fail"
        assert sx.to_prefix(last.expr) == "(not (ne (sym 1) (const 0)))"

    def test_every_constraint_true_under_its_input(self):
        module, plan = build_unit(
            "int f(int a, int b){\n"
            "  int r = 0;\n"
            "  while (a > 0) { if (a % 2 == 0) { r = r + b; } a = a - 1; }\n"
            "  return r;\n"
            "}",
            "f",
        )
        rng = random.Random(5)
        for _ in range(25):
            bindings = {0: rng.randrange(-4, 9), 1: rng.randrange(-50, 50)}
            trace, pc = run_and_replay(module, plan, bindings)
            assert check_consistency(pc, trace.input)

    def test_stale_trace_detected(self):
        module, plan = build_unit(
            "int f(int x){ if (x > 0) { return 1; } return 0; }", "f"
        )
        trace, _ = run_and_replay(module, plan, {0: 5})
        other_module, other_plan = build_unit(
            "int f(int x){ if (x > 1) { if (x > 2) { return 2; } return 1; } return 0; }",
            "f",
        )
        with pytest.raises(StaleTraceError) as exc:
            replay_symbolic(other_module, trace, other_plan.symbol_map)
        assert exc.value.event_index >= 0

    def test_dump_pc_format(self):
        module, plan = build_unit(
            "int abs(int x){ if (x < 0) { return 0 - x; } return x; }", "abs"
        )
        _, pc = run_and_replay(module, plan, {0: -3})
        text = render_path_condition(pc)
        assert text == "[0] site=4 dir=then flippable (slt (sym 0) (const 0))\n"


class TestMemoryModel:
    LOOKUP = (
        "int lookup(int v[3], int i){ if (v[i] == 5) { return 1; } return 0; }"
    )

    def test_symbolic_load_ite_chain_matches_cells(self):
        # Oracle: evaluating the Ite under i in {0,1,2} must equal reading the
        # corresponding cell symbol directly.
        module, plan = build_unit(self.LOOKUP, "lookup")
        bindings = {0: 10, 1: 20, 2: 30, 3: 1}  # v[0..2], i
        _, pc = run_and_replay(module, plan, bindings)
        cmp_constraint = pc.constraints[-1]
        for i in (0, 1, 2):
            model = {0: 10, 1: 20, 2: 30, 3: i}
            expect_eq5 = model[i] == 5
            got = sx.evaluate(cmp_constraint.expr, model)
            # constraint is the comparison as taken (else direction: not ==).
            assert got == (not expect_eq5)
        model_hit = {0: 10, 1: 5, 2: 30, 3: 1}
        assert sx.evaluate(cmp_constraint.expr, model_hit) is False

    def test_concrete_index_load_is_plain_symbol(self):
        module, plan = build_unit(
            "int second(int v[3]){ if (v[1] == 5) { return 1; } return 0; }", "second"
        )
        _, pc = run_and_replay(module, plan, {0: 0, 1: 0, 2: 0})
        refs = sx.variables(pc.constraints[-1].expr)
        assert refs == {sx.SymRef(1, 32)}

    def test_store_concrete_address_rule(self):
        # Writing through a symbolic index updates exactly the concretely
        # addressed cell: afterwards reading another (concrete) cell stays
        # bound to its original symbol.
        src = (
            "int f(int v[3], int i, int x){\n"
            "  v[i] = x;\n"
            "  if (v[0] == 7) { return 1; }\n"
            "  return 0;\n"
            "}"
        )
        module, plan = build_unit(src, "f")
        # i = 2 concretely: cell 0 untouched.
        _, pc = run_and_replay(module, plan, {0: 1, 1: 2, 2: 3, 3: 2, 4: 9})
        final_cmp = pc.constraints[-1]
        assert sx.variables(final_cmp.expr) == {sx.SymRef(0, 32)}
        # i = 0 concretely: cell 0 now carries x's symbol.
        _, pc2 = run_and_replay(module, plan, {0: 1, 1: 2, 2: 3, 3: 0, 4: 9})
        assert sx.variables(pc2.constraints[-1].expr) == {sx.SymRef(4, 32)}

    def test_last_writer_wins(self):
        src = (
            "int f(int a, int b){\n"
            "  int t = 0;\n"
            "  t = a;\n"
            "  t = b;\n"
            "  if (t == 3) { return 1; }\n"
            "  return 0;\n"
            "}"
        )
        module, plan = build_unit(src, "f")
        _, pc = run_and_replay(module, plan, {0: 1, 1: 2})
        assert sx.variables(pc.constraints[-1].expr) == {sx.SymRef(1, 32)}

    def test_final_symbolic_memory_matches_concrete(self):
        # Concretization soundness: evaluating every symbolic cell under the
        # originating input reproduces the interpreter's final concrete memory.
        src = (
            "record P { int x; int y; }\n"
            "void mix(P* p, int k){\n"
            "  p.x = p.x + k;\n"
            "  if (p.x > 10) { p.y = p.x * 2; } else { p.y = 0 - p.x; }\n"
            "  return;\n"
            "}"
        )
        module, plan = build_unit(src, "mix")
        rng = random.Random(11)
        from coyote_mc.symex import _Replayer

        for _ in range(20):
            bindings = {i: rng.randrange(-20, 20) for i in plan.symbol_map.ids()}
            trace = execute(module, plan.driver_name, TestInput(dict(bindings)))
            replayer = _Replayer(module, trace, plan.symbol_map)
            replayer.run(trace.entry)
            for obj_id, cells in replayer.sym_heap.items():
                for offset, expr in cells.items():
                    concrete = trace.final_heap[obj_id][offset]
                    if isinstance(expr, sx.SymExpr) and not isinstance(
                        concrete, interp.Addr
                    ):
                        assert sx.evaluate(expr, bindings, {}) == concrete


class TestSimplify:
    def test_double_negation(self):
        a = sx.SymRef(0, 1)
        assert sx.simplify(sx.NotExpr(sx.NotExpr(a))) == a

    def test_constant_fold(self):
        e = sx.BinExpr("+", sx.ConstI32(3), sx.ConstI32(4))
        assert sx.simplify(e) == sx.ConstI32(7)

    def test_ite_constant_cond(self):
        a, b = sx.ConstI32(1), sx.ConstI32(2)
        assert sx.simplify(sx.IteExpr(sx.TRUE, a, b)) == a

    def test_neutral_elements(self):
        x = sx.SymRef(0)
        assert sx.simplify(sx.BinExpr("+", x, sx.ConstI32(0))) == x
        assert sx.simplify(sx.BinExpr("*", x, sx.ConstI32(1))) == x
        assert sx.simplify(sx.BinExpr("*", x, sx.ConstI32(0))) == sx.ConstI32(0)

    def test_simplify_preserves_evaluation(self):
        # 20 fuzzed expressions x 10,000 random assignments each.
        rng = random.Random(77)
        n_vars = 3

        def gen(depth, want_bool):
            if depth == 0:
                if want_bool:
                    return rng.choice([sx.TRUE, sx.FALSE, sx.SymRef(3, 1)])
                return rng.choice(
                    [sx.ConstI32(rng.randrange(-8, 8)), sx.SymRef(rng.randrange(n_vars))]
                )
            if want_bool:
                kind = rng.randrange(4)
                if kind == 0:
                    return sx.CmpExpr(
                        rng.choice(sx.CMP_OPS), gen(depth - 1, False), gen(depth - 1, False)
                    )
                if kind == 1:
                    return sx.NotExpr(gen(depth - 1, True))
                if kind == 2:
                    return sx.BinExpr(
                        rng.choice(["and", "or"]), gen(depth - 1, True), gen(depth - 1, True)
                    )
                return sx.IteExpr(gen(depth - 1, True), gen(depth - 1, True), gen(depth - 1, True))
            kind = rng.randrange(2)
            if kind == 0:
                return sx.BinExpr(
                    rng.choice(sx.ARITH_OPS), gen(depth - 1, False), gen(depth - 1, False)
                )
            return sx.IteExpr(gen(depth - 1, True), gen(depth - 1, False), gen(depth - 1, False))

        for _ in range(20):
            expr = gen(3, rng.random() < 0.5)
            simplified = sx.simplify(expr)
            for _ in range(10_000):
                model = {i: rng.randrange(-2**31, 2**31) for i in range(n_vars)}
                model[3] = rng.random() < 0.5
                assert sx.evaluate(expr, model) == sx.evaluate(simplified, model)
