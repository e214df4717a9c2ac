"""The concolic loop for one function under test.

Seed with all-zero inputs, execute, replay symbolically, pick a branch to
flip (coverage-guided search first, depth-first fallback), solve for an input
that takes the other direction, and repeat until the target is covered, the
frontier is exhausted, or a budget runs out.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

from . import interp, ir, solver
from . import symexpr as sx
from .diagnostics import InternalError
from .harness import HarnessPlan
from .interp import TestInput, Trace
from .symex import PathCondition, StaleTraceError, check_consistency, replay_symbolic

STRATEGY_CCS = "ccs"
STRATEGY_DFS = "dfs"
STRATEGY_AUTO = "auto"


@dataclass
class EngineConfig:
    max_tests: int = 500
    max_solver_calls: int = 2000
    wall_clock_ms: int = 30_000
    step_budget: int = interp.DEFAULT_STEP_BUDGET
    strategy: str = STRATEGY_AUTO
    stagnation_window: int = 25
    sufficient_coverage: float = 1.0  # fraction of target statement points
    solver_timeout_ms: int = solver.DEFAULT_TIMEOUT_MS
    solver_step_limit: int = solver.DEFAULT_STEP_LIMIT
    seed: int = 0
    debug_checks: bool = True


@dataclass
class Candidate:
    trace_ref: int
    flip_index: int
    order: int  # insertion index, breaks remaining ties deterministically


@dataclass
class TestCaseRecord:
    test_id: int
    input: TestInput
    outcome: str
    error_check_id: int | None
    newly_covered: set[int]
    origin: str  # "seed" | "ccs" | "dfs" | "manual"


@dataclass
class ErrorFinding:
    check_id: int
    kind: str
    func_name: str
    loc: str
    reproducing_input: TestInput


@dataclass
class EngineStats:
    tests: int = 0
    solver_sat: int = 0
    solver_unsat: int = 0
    solver_unknown: int = 0
    divergences: int = 0
    consistent_flips: int = 0
    interp_errors: int = 0
    strategy_switched: bool = False
    stop_reason: str = ""


@dataclass
class UnitState:
    module: ir.IrModule
    plan: HarnessPlan
    config: EngineConfig
    traces: list[Trace] = field(default_factory=list)
    path_conds: list[PathCondition] = field(default_factory=list)
    covered: set[int] = field(default_factory=set)
    frontier: list[Candidate] = field(default_factory=list)
    flip_hashes: list[dict[int, str]] = field(default_factory=list)
    attempted: set[str] = field(default_factory=set)
    strategy: str = STRATEGY_CCS
    stagnation: int = 0
    stats: EngineStats = field(default_factory=EngineStats)
    testcases: list[TestCaseRecord] = field(default_factory=list)
    findings: list[ErrorFinding] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


@dataclass
class UnitResult:
    target: str
    covered: set[int]
    testcases: list[TestCaseRecord]
    findings: list[ErrorFinding]
    stats: EngineStats
    warnings: list[str]


# --- branch flipping ------------------------------------------------------------


def flip(pc: PathCondition, index: int) -> solver.Query:
    """Prefix of the path condition conjoined with the negation of entry i."""
    entry = pc.constraints[index]
    if not entry.flippable:
        raise InternalError(f"constraint {index} is not flippable")
    constraints = [
        c.expr for c in pc.constraints[:index] if not sx.is_const(c.expr)
    ]
    constraints.append(sx.simplify(sx.mk_not(entry.expr)))
    return solver.Query(
        constraints=constraints,
        domains=dict(pc.domains),
        widths=dict(pc.widths),
    )


def _flip_hash(pc: PathCondition, index: int) -> str:
    parts = [sx.to_prefix(c.expr) for c in pc.constraints[:index]]
    parts.append("FLIP:" + sx.to_prefix(pc.constraints[index].expr))
    return hashlib.sha256("\n".join(parts).encode()).hexdigest()


def _all_flip_hashes(pc: PathCondition) -> dict[int, str]:
    """Flip hash per flippable index, computed in one pass over the path."""
    hashes: dict[int, str] = {}
    running = hashlib.sha256()
    first = True
    for c in pc.constraints:
        rendered = sx.to_prefix(c.expr)
        if c.flippable:
            h = running.copy()
            if not first:
                h.update(b"\n")
            h.update(b"FLIP:" + rendered.encode())
            hashes[c.index] = h.hexdigest()
        if not first:
            running.update(b"\n")
        running.update(rendered.encode())
        first = False
    return hashes


_NEGATED_DIR = {"then": "else", "else": "then", "pass": "fail", "fail": "pass"}


def predicted_prefix(pc: PathCondition, index: int) -> list[tuple[int, str]]:
    out = [(c.site_id, c.taken_dir) for c in pc.constraints[:index]]
    entry = pc.constraints[index]
    out.append((entry.site_id, _NEGATED_DIR[entry.taken_dir]))
    return out


def check_divergence(predicted: list[tuple[int, str]], actual: Trace):
    """Consistent iff the actual run matches the predicted prefix with the
    flipped direction negated. Returns ("consistent", None) or
    ("divergent", first_mismatch_index)."""
    dirs = actual.branch_directions()
    for k, want in enumerate(predicted):
        if k >= len(dirs) or dirs[k] != want:
            return ("divergent", k)
    return ("consistent", None)


# --- candidate selection -----------------------------------------------------------


def _flip_target(module: ir.IrModule, pc: PathCondition, index: int):
    """(function name, successor block, edge point id) of the flipped direction."""
    entry = pc.constraints[index]
    instr = module.instr_by_id(entry.site_id)
    fn_name = module.function_of_instr(entry.site_id)
    if isinstance(instr, ir.CondBr):
        if entry.taken_dir == "then":
            return fn_name, instr.else_blk, instr.else_point
        return fn_name, instr.then_blk, instr.then_point
    if isinstance(instr, ir.Check):
        if entry.taken_dir == "pass":
            return fn_name, instr.fail_blk, instr.error_point
        return fn_name, instr.cont_blk, None
    raise InternalError(f"constraint site {entry.site_id} is not a branch")


def _block_points(module: ir.IrModule, fn_name: str, block_index: int) -> set[int]:
    fn = module.functions[fn_name]
    return {
        i.stmt_point
        for i in fn.blocks[block_index].instrs
        if i.stmt_point is not None
    }


def _targets_uncovered(state: UnitState, cand: Candidate) -> bool:
    pc = state.path_conds[cand.trace_ref]
    fn_name, block, edge_point = _flip_target(state.module, pc, cand.flip_index)
    if edge_point is not None and edge_point not in state.covered:
        return True
    points = _block_points(state.module, fn_name, block)
    return bool(points - state.covered)


def next_candidate_ccs(state: UnitState) -> Candidate | None:
    """Highest-priority unattempted candidate whose flipped successor still
    contains an uncovered point: uncovered-target first (always true here),
    then shallower flips, then the most recent trace."""
    best = None
    best_key = None
    for cand in state.frontier:
        if state.flip_hashes[cand.trace_ref][cand.flip_index] in state.attempted:
            continue
        if not _targets_uncovered(state, cand):
            continue  # lazily demoted: target got covered since enqueueing
        key = (cand.flip_index, -cand.trace_ref, cand.order)
        if best_key is None or key < best_key:
            best = cand
            best_key = key
    return best


def next_candidate_dfs(state: UnitState) -> Candidate | None:
    """Deepest unattempted flippable index of the most recent trace, walking
    back through earlier traces when exhausted."""
    for trace_ref in range(len(state.traces) - 1, -1, -1):
        pc = state.path_conds[trace_ref]
        hashes = state.flip_hashes[trace_ref]
        for flip_index in reversed(pc.flippable_indexes()):
            if hashes[flip_index] not in state.attempted:
                return Candidate(trace_ref, flip_index, 0)
    return None


def switch_strategy(state: UnitState, stmt_fraction: float) -> None:
    """One-way CCS -> DFS switch when CCS ran dry or stagnated while the
    target's statement coverage is still below the sufficiency bar."""
    if state.strategy != STRATEGY_CCS or state.config.strategy == STRATEGY_CCS:
        return
    if stmt_fraction >= state.config.sufficient_coverage:
        return
    state.strategy = STRATEGY_DFS
    state.stats.strategy_switched = True


# --- the unit loop --------------------------------------------------------------------


def update_coverage(state: UnitState, trace: Trace) -> set[int]:
    delta = trace.covered_points - state.covered
    state.covered |= trace.covered_points
    return delta


class _UnitRunner:
    def __init__(self, module: ir.IrModule, plan: HarnessPlan, config: EngineConfig):
        self.module = module
        self.plan = plan
        self.config = config
        self.state = UnitState(module=module, plan=plan, config=config)
        if config.strategy == STRATEGY_DFS:
            self.state.strategy = STRATEGY_DFS
        self.target_points = {
            p.point_id for p in module.points if p.func_name == plan.target
        }
        self.target_stmt_points = {
            p.point_id
            for p in module.points
            if p.func_name == plan.target and p.kind == "stmt"
        }
        self.deadline = time.monotonic() + config.wall_clock_ms / 1000.0
        self.seen_findings: set[int] = set()

    # -- single test execution

    def run_test(self, test_input: TestInput, origin: str) -> Trace | None:
        state = self.state
        state.stats.tests += 1
        try:
            trace = interp.execute(
                self.module,
                self.plan.driver_name,
                test_input.copy(),
                step_budget=self.config.step_budget,
                required_symbols=self.plan.symbol_map.ids(),
            )
        except interp.InterpError as exc:
            state.stats.interp_errors += 1
            state.warnings.append(f"test rejected: {exc}")
            return None
        pc = replay_symbolic(self.module, trace, self.plan.symbol_map)
        if self.config.debug_checks and not check_consistency(pc, trace.input):
            raise InternalError(
                f"replay inconsistency for {self.plan.target}: path condition "
                "does not hold under its own input"
            )
        delta = update_coverage(state, trace)
        if delta:
            state.stagnation = 0
        else:
            state.stagnation += 1
        trace_ref = len(state.traces)
        state.traces.append(trace)
        state.path_conds.append(pc)
        state.flip_hashes.append(_all_flip_hashes(pc))
        for index in pc.flippable_indexes():
            state.frontier.append(Candidate(trace_ref, index, len(state.frontier)))
        if trace.outcome == interp.OUTCOME_ERROR:
            self.record_finding(trace)
        if delta or trace.outcome == interp.OUTCOME_ERROR or origin == "seed":
            state.testcases.append(
                TestCaseRecord(
                    test_id=len(state.testcases),
                    input=test_input.copy(),
                    outcome=trace.outcome,
                    error_check_id=trace.error_check_id,
                    newly_covered=delta,
                    origin=origin,
                )
            )
        return trace

    def record_finding(self, trace: Trace) -> None:
        check_id = trace.error_check_id
        if check_id in self.seen_findings:
            return
        self.seen_findings.add(check_id)
        instr = self.module.instr_by_id(check_id)
        self.state.findings.append(
            ErrorFinding(
                check_id=check_id,
                kind=instr.kind.value,
                func_name=self.module.function_of_instr(check_id),
                loc=str(instr.loc),
                reproducing_input=trace.input.copy(),
            )
        )

    # -- model -> input

    def input_from_model(self, parent: TestInput, result: solver.SolveResult) -> TestInput:
        new_input = parent.copy()
        for sid, value in (result.model or {}).items():
            new_input.bindings[sid] = value
        for (tag, seq), value in (result.fresh_model or {}).items():
            queue = new_input.fresh.setdefault(tag, [])
            while len(queue) <= seq:
                queue.append(0)
            queue[seq] = value
        return new_input

    # -- budgets / termination

    def budget_exceeded(self) -> str | None:
        stats = self.state.stats
        if stats.tests >= self.config.max_tests:
            return "max-tests"
        if stats.solver_sat + stats.solver_unsat + stats.solver_unknown >= self.config.max_solver_calls:
            return "max-solver-calls"
        if time.monotonic() > self.deadline:
            return "wall-clock"
        return None

    def stmt_fraction(self) -> float:
        if not self.target_stmt_points:
            return 1.0
        hit = len(self.target_stmt_points & self.state.covered)
        return hit / len(self.target_stmt_points)

    def target_fully_covered(self) -> bool:
        return self.target_points <= self.state.covered

    # -- main loop

    def run(self, manual_inputs: list[TestInput] | None = None) -> UnitResult:
        state = self.state
        self.run_test(interp.zero_input(self.plan), "seed")
        for test_input in manual_inputs or []:
            self.import_manual_test(test_input)
        while True:
            reason = self.budget_exceeded()
            if reason:
                state.stats.stop_reason = reason
                break
            if self.target_fully_covered():
                state.stats.stop_reason = "full-coverage"
                break
            if state.strategy == STRATEGY_CCS:
                cand = next_candidate_ccs(state)
            else:
                cand = next_candidate_dfs(state)
            if cand is None:
                if (
                    state.strategy == STRATEGY_CCS
                    and self.config.strategy != STRATEGY_CCS
                    and self.stmt_fraction() < self.config.sufficient_coverage
                ):
                    switch_strategy(state, self.stmt_fraction())
                    continue
                state.stats.stop_reason = f"{state.strategy}-exhausted"
                break
            if (
                state.strategy == STRATEGY_CCS
                and state.stagnation >= self.config.stagnation_window
                and self.stmt_fraction() < self.config.sufficient_coverage
            ):
                switch_strategy(state, self.stmt_fraction())
                continue
            self.attempt(cand)
        return UnitResult(
            target=self.plan.target,
            covered=set(state.covered),
            testcases=state.testcases,
            findings=state.findings,
            stats=state.stats,
            warnings=state.warnings,
        )

    def attempt(self, cand: Candidate) -> None:
        state = self.state
        pc = state.path_conds[cand.trace_ref]
        state.attempted.add(state.flip_hashes[cand.trace_ref][cand.flip_index])
        query = flip(pc, cand.flip_index)
        query.timeout_ms = self.config.solver_timeout_ms
        query.step_limit = self.config.solver_step_limit
        result = solver.solve(query)
        if result.status == "unsat":
            state.stats.solver_unsat += 1
            return
        if result.status == "unknown":
            state.stats.solver_unknown += 1
            return
        state.stats.solver_sat += 1
        parent = state.traces[cand.trace_ref].input
        new_input = self.input_from_model(parent, result)
        origin = state.strategy
        trace = self.run_test(new_input, origin)
        if trace is None:
            return
        verdict, _at = check_divergence(
            predicted_prefix(pc, cand.flip_index), trace
        )
        if verdict == "divergent":
            state.stats.divergences += 1
        else:
            state.stats.consistent_flips += 1

    def import_manual_test(self, test_input: TestInput) -> None:
        known = set(self.plan.symbol_map.ids())
        unknown = set(test_input.bindings) - known
        if unknown:
            self.state.warnings.append(
                f"manual test skipped: unknown symbol ids {sorted(unknown)}"
            )
            return
        filled = test_input.copy()
        for sid in known:
            filled.bindings.setdefault(sid, 0)
        self.run_test(filled, "manual")


def run_unit(
    module: ir.IrModule,
    plan: HarnessPlan,
    config: EngineConfig | None = None,
    manual_inputs: list[TestInput] | None = None,
) -> UnitResult:
    """Run the concolic loop for one assembled unit."""
    runner = _UnitRunner(module, plan, config or EngineConfig())
    return runner.run(manual_inputs)


def import_manual_tests(
    module: ir.IrModule,
    plan: HarnessPlan,
    config: EngineConfig,
    inputs: list[TestInput],
) -> UnitResult:
    """Fold externally supplied inputs into a fresh unit run."""
    return run_unit(module, plan, config, manual_inputs=inputs)
