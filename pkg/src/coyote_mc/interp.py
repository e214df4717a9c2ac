"""Concrete IR interpreter.

Executes an assembled module from a driver entry point under a given input and
records the trace that offline symbolic replay consumes. Deterministic: equal
(module, entry, input) triples produce equal traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from . import ir, semantics
from .diagnostics import InternalError

if TYPE_CHECKING:
    from .harness import HarnessPlan

DEFAULT_STEP_BUDGET = 100_000


class InterpError(Exception):
    """Interpreter-level misuse (unbound symbol, uninitialized read, ...)."""


@dataclass(frozen=True)
class Addr:
    object_id: int
    offset: int

    @property
    def is_null(self) -> bool:
        return self.object_id == 0

    def __str__(self) -> str:
        return f"{self.object_id}:{self.offset}"


NULL = Addr(0, 0)

# A heap slot that was never written; loading one is an interpreter error.
UNINIT = object()


@dataclass
class TestInput:
    """Concrete values for one execution: symbol bindings plus queued values
    for fresh-symbol draws made by stubs (keyed by tag, in draw order)."""

    bindings: dict[int, int] = field(default_factory=dict)
    fresh: dict[int, list[int]] = field(default_factory=dict)

    def copy(self) -> "TestInput":
        return TestInput(dict(self.bindings), {t: list(v) for t, v in self.fresh.items()})


# --- trace events -------------------------------------------------------------


@dataclass(frozen=True)
class BranchTaken:
    cond_br_id: int
    direction: str  # "then" | "else"


@dataclass(frozen=True)
class CheckPassed:
    check_id: int


@dataclass(frozen=True)
class CheckFailed:
    check_id: int


@dataclass(frozen=True)
class LoadEv:
    instr_id: int
    addr: Addr
    value: object


@dataclass(frozen=True)
class StoreEv:
    instr_id: int
    addr: Addr
    value: object


@dataclass(frozen=True)
class SymBindEv:
    symbol_id: int
    addr: Addr


@dataclass(frozen=True)
class FreshEv:
    tag: int
    seq: int
    value: int
    addr: Addr | None = None


@dataclass(frozen=True)
class CallEv:
    fn: str


@dataclass(frozen=True)
class RetEv:
    fn: str


@dataclass(frozen=True)
class StmtHit:
    point_id: int


OUTCOME_COMPLETED = "completed"
OUTCOME_ERROR = "error"
OUTCOME_BUDGET = "budget"


@dataclass
class Trace:
    events: list
    outcome: str
    input: TestInput
    covered_points: set[int]
    error_check_id: int | None = None
    return_value: object = None
    final_heap: dict[int, list] | None = None
    steps: int = 0
    entry: str = ""


    def branch_directions(self) -> list[tuple[int, str]]:
        """(instr id, direction) for every branch-like event, in order."""
        out = []
        for ev in self.events:
            if isinstance(ev, BranchTaken):
                out.append((ev.cond_br_id, ev.direction))
            elif isinstance(ev, CheckPassed):
                out.append((ev.check_id, "pass"))
            elif isinstance(ev, CheckFailed):
                out.append((ev.check_id, "fail"))
        return out


# --- the machine ------------------------------------------------------------------


@dataclass
class _Frame:
    fn: ir.IrFunction
    block: int
    index: int
    temps: dict[int, object]
    objects: list[int]  # slot index -> heap object id
    call_iid: int | None  # caller instruction awaiting our return value


class _Machine:
    def __init__(self, module: ir.IrModule, test_input: TestInput, step_budget: int):
        self.module = module
        self.input = test_input
        self.step_budget = step_budget
        self.heap: dict[int, list] = {}
        self.next_object = 1
        self.frames: list[_Frame] = []
        self.events: list = []
        self.covered: set[int] = set()
        self.fresh_seq: dict[int, int] = {}
        self.steps = 0
        self.outcome = OUTCOME_COMPLETED
        self.error_check_id: int | None = None
        self.return_value: object = None

    # -- memory

    def alloc(self, size: int) -> int:
        oid = self.next_object
        self.next_object += 1
        self.heap[oid] = [UNINIT] * size
        return oid

    def load(self, addr: Addr, iid: int):
        if addr.is_null:
            raise InternalError(f"load through null at instruction {iid}")
        obj = self.heap.get(addr.object_id)
        if obj is None or not (0 <= addr.offset < len(obj)):
            raise InternalError(f"load outside object bounds at instruction {iid}")
        value = obj[addr.offset]
        if value is UNINIT:
            raise InterpError(f"load of uninitialized memory at instruction {iid}")
        return value

    def store(self, addr: Addr, value, iid: int) -> None:
        if addr.is_null:
            raise InternalError(f"store through null at instruction {iid}")
        obj = self.heap.get(addr.object_id)
        if obj is None or not (0 <= addr.offset < len(obj)):
            raise InternalError(f"store outside object bounds at instruction {iid}")
        obj[addr.offset] = value

    # -- frames

    def push_frame(self, fn: ir.IrFunction, args: list, call_iid: int | None) -> None:
        objects = [self.alloc(slot.size) for slot in fn.slots]
        frame = _Frame(fn, fn.entry, 0, {}, objects, call_iid)
        for k, (_, _ptype) in enumerate(fn.params):
            self.heap[objects[k]][0] = args[k]
        self.frames.append(frame)
        self.events.append(CallEv(fn.name))

    # -- operand evaluation

    def value_of(self, frame: _Frame, op: ir.Operand):
        if op.kind == "tmp":
            try:
                return frame.temps[op.value]
            except KeyError:
                raise InternalError(f"use of undefined temp %{op.value}") from None
        if op.kind == "int":
            return op.value
        if op.kind == "bool":
            return bool(op.value)
        if op.kind == "null":
            return NULL
        if op.kind == "slot":
            return Addr(frame.objects[op.value], 0)
        raise InternalError(f"unknown operand kind {op.kind}")

    # -- main loop

    def run(self, entry: str, args: list) -> None:
        fn = self.module.functions.get(entry)
        if fn is None:
            raise InterpError(f"no function named {entry!r}")
        if len(args) != len(fn.params):
            raise InterpError(f"{entry!r} expects {len(fn.params)} arguments")
        self.push_frame(fn, args, None)
        while self.frames:
            if self.steps >= self.step_budget:
                self.outcome = OUTCOME_BUDGET
                return
            self.steps += 1
            frame = self.frames[-1]
            instr = frame.fn.blocks[frame.block].instrs[frame.index]
            if instr.stmt_point is not None:
                self.covered.add(instr.stmt_point)
                self.events.append(StmtHit(instr.stmt_point))
            if not self.step(frame, instr):
                return

    def step(self, frame: _Frame, instr: ir.Instr) -> bool:
        """Execute one instruction; False stops the run (error outcome)."""
        if isinstance(instr, ir.Const):
            frame.temps[instr.iid] = self.value_of(frame, instr.value)
        elif isinstance(instr, ir.BinOp):
            a = self.value_of(frame, instr.lhs)
            b = self.value_of(frame, instr.rhs)
            if instr.op in ("/", "%") and b == 0:
                raise InternalError("division by zero reached the arithmetic unit")
            frame.temps[instr.iid] = semantics.binop(instr.op, a, b)
        elif isinstance(instr, ir.Cmp):
            a = self.value_of(frame, instr.lhs)
            b = self.value_of(frame, instr.rhs)
            frame.temps[instr.iid] = semantics.compare(instr.op, a, b)
        elif isinstance(instr, ir.Load):
            addr = self.value_of(frame, instr.addr)
            value = self.load(addr, instr.iid)
            frame.temps[instr.iid] = value
            self.events.append(LoadEv(instr.iid, addr, value))
        elif isinstance(instr, ir.Store):
            addr = self.value_of(frame, instr.addr)
            value = self.value_of(frame, instr.value)
            self.store(addr, value, instr.iid)
            self.events.append(StoreEv(instr.iid, addr, value))
        elif isinstance(instr, ir.FieldAddr):
            base = self.value_of(frame, instr.base)
            frame.temps[instr.iid] = Addr(base.object_id, base.offset + instr.offset)
        elif isinstance(instr, ir.IndexAddr):
            base = self.value_of(frame, instr.base)
            index = self.value_of(frame, instr.index)
            frame.temps[instr.iid] = Addr(
                base.object_id, base.offset + index * instr.elem_size
            )
        elif isinstance(instr, ir.SymBind):
            sid = self.value_of(frame, instr.symbol_id)
            dest = self.value_of(frame, instr.dest)
            if sid not in self.input.bindings:
                raise InterpError(f"unbound symbol {sid}")
            raw = self.input.bindings[sid]
            value = bool(raw) if instr.width == 1 else semantics.wrap32(int(raw))
            self.store(dest, value, instr.iid)
            self.events.append(SymBindEv(sid, dest))
        elif isinstance(instr, ir.CallInstr):
            return self.do_call(frame, instr)
        elif isinstance(instr, ir.Ret):
            return self.do_ret(frame, instr)
        elif isinstance(instr, ir.Br):
            frame.block = instr.target
            frame.index = 0
            return True
        elif isinstance(instr, ir.CondBr):
            cond = self.value_of(frame, instr.cond)
            if cond:
                self.events.append(BranchTaken(instr.iid, "then"))
                if instr.then_point is not None:
                    self.covered.add(instr.then_point)
                frame.block = instr.then_blk
            else:
                self.events.append(BranchTaken(instr.iid, "else"))
                if instr.else_point is not None:
                    self.covered.add(instr.else_point)
                frame.block = instr.else_blk
            frame.index = 0
            return True
        elif isinstance(instr, ir.Check):
            return self.do_check(frame, instr)
        else:
            raise InternalError(f"unknown instruction {type(instr).__name__}")
        frame.index += 1
        return True

    def do_call(self, frame: _Frame, instr: ir.CallInstr) -> bool:
        args = [self.value_of(frame, a) for a in instr.args]
        if instr.fn == ir.INTRINSIC_FRESH_I32:
            tag = int(args[0])
            seq = self.fresh_seq.get(tag, 0)
            self.fresh_seq[tag] = seq + 1
            queue = self.input.fresh.get(tag, [])
            value = semantics.wrap32(int(queue[seq])) if seq < len(queue) else 0
            frame.temps[instr.iid] = value
            self.events.append(FreshEv(tag, seq, value))
            frame.index += 1
            return True
        if instr.fn == ir.INTRINSIC_ASSERT:
            # Only reachable when checks were not injected; asserts are inert then.
            frame.index += 1
            return True
        callee = self.module.functions.get(instr.fn)
        if callee is None:
            raise InterpError(f"call to undefined function {instr.fn!r}")
        self.push_frame(callee, args, instr.iid)
        return True

    def do_ret(self, frame: _Frame, instr: ir.Ret) -> bool:
        value = None if instr.value is None else self.value_of(frame, instr.value)
        self.events.append(RetEv(frame.fn.name))
        self.frames.pop()
        if not self.frames:
            self.return_value = value
            return False  # normal completion
        caller = self.frames[-1]
        call_instr = caller.fn.blocks[caller.block].instrs[caller.index]
        if isinstance(call_instr, ir.CallInstr) and call_instr.returns_value:
            caller.temps[frame.call_iid] = value
        caller.index += 1
        return True

    def do_check(self, frame: _Frame, instr: ir.Check) -> bool:
        ok = self.check_passes(frame, instr)
        if ok:
            self.events.append(CheckPassed(instr.iid))
            frame.block = instr.cont_blk
            frame.index = 0
            return True
        self.events.append(CheckFailed(instr.iid))
        if instr.error_point is not None:
            self.covered.add(instr.error_point)
        self.outcome = OUTCOME_ERROR
        self.error_check_id = instr.iid
        return False

    def check_passes(self, frame: _Frame, instr: ir.Check) -> bool:
        kind = instr.kind
        if kind in (ir.CheckKind.DIV_BY_ZERO, ir.CheckKind.MOD_BY_ZERO):
            return self.value_of(frame, instr.operands[0]) != 0
        if kind == ir.CheckKind.INDEX_OUT_OF_BOUNDS:
            index = self.value_of(frame, instr.operands[0])
            return 0 <= index < instr.bound
        if kind == ir.CheckKind.NULL_DEREF:
            return not self.value_of(frame, instr.operands[0]).is_null
        if kind == ir.CheckKind.USER_ASSERT:
            return bool(self.value_of(frame, instr.operands[0]))
        raise InternalError(f"unknown check kind {kind}")


def run_function(
    module: ir.IrModule,
    name: str,
    args: list,
    test_input: TestInput | None = None,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> Trace:
    """Run an arbitrary function with concrete scalar arguments."""
    machine = _Machine(module, test_input or TestInput(), step_budget)
    machine.run(name, args)
    return Trace(
        events=machine.events,
        outcome=machine.outcome,
        input=machine.input,
        covered_points=machine.covered,
        error_check_id=machine.error_check_id,
        return_value=machine.return_value,
        final_heap=machine.heap,
        steps=machine.steps,
        entry=name,
    )


def execute(
    module: ir.IrModule,
    driver: str,
    test_input: TestInput,
    step_budget: int = DEFAULT_STEP_BUDGET,
    required_symbols: list[int] | None = None,
) -> Trace:
    """Execute a driver entry point, producing the trace of the run."""
    if driver not in module.functions:
        raise InterpError(f"no driver named {driver!r}")
    if required_symbols is not None:
        missing = [s for s in required_symbols if s not in test_input.bindings]
        if missing:
            raise InterpError(f"unbound symbols: {missing}")
    return run_function(module, driver, [], test_input, step_budget)


def zero_input(plan: "HarnessPlan") -> TestInput:
    """The all-zeros seed, clamped into each symbol's declared domain."""
    bindings: dict[int, int] = {}
    for entry in plan.symbol_map.entries:
        value = 0
        if entry.domain is not None:
            lo, hi = entry.domain
            if not (lo <= 0 <= hi):
                value = lo
        bindings[entry.symbol_id] = value
    return TestInput(bindings=bindings, fresh={})


# --- trace text format ------------------------------------------------------------


def _value_token(v) -> str:
    if isinstance(v, Addr):
        return f"a:{v.object_id}:{v.offset}"
    if isinstance(v, bool):
        return f"b:{1 if v else 0}"
    return f"i:{v}"


def _parse_value(tok: str):
    kind, _, rest = tok.partition(":")
    if kind == "a":
        oid, _, off = rest.partition(":")
        return Addr(int(oid), int(off))
    if kind == "b":
        return rest == "1"
    return int(rest)


def _addr_token(a: Addr | None) -> str:
    return "-" if a is None else f"{a.object_id}:{a.offset}"


def _parse_addr(tok: str) -> Addr | None:
    if tok == "-":
        return None
    oid, _, off = tok.partition(":")
    return Addr(int(oid), int(off))


def serialize_trace(trace: Trace) -> str:
    """One event per line, stable field order; bijective with deserialize_trace."""
    if trace.outcome == OUTCOME_ERROR:
        header = f"# trace v1 outcome=error check={trace.error_check_id}"
    else:
        header = f"# trace v1 outcome={trace.outcome}"
    lines = [header]
    for ev in trace.events:
        if isinstance(ev, BranchTaken):
            lines.append(f"BR {ev.cond_br_id} {'T' if ev.direction == 'then' else 'E'}")
        elif isinstance(ev, CheckPassed):
            lines.append(f"CKP {ev.check_id}")
        elif isinstance(ev, CheckFailed):
            lines.append(f"CKF {ev.check_id}")
        elif isinstance(ev, LoadEv):
            lines.append(f"LD {ev.instr_id} {_addr_token(ev.addr)} {_value_token(ev.value)}")
        elif isinstance(ev, StoreEv):
            lines.append(f"ST {ev.instr_id} {_addr_token(ev.addr)} {_value_token(ev.value)}")
        elif isinstance(ev, SymBindEv):
            lines.append(f"SYM {ev.symbol_id} {_addr_token(ev.addr)}")
        elif isinstance(ev, FreshEv):
            lines.append(f"FRESH {ev.tag} {ev.seq} {ev.value} {_addr_token(ev.addr)}")
        elif isinstance(ev, CallEv):
            lines.append(f"CALL {ev.fn}")
        elif isinstance(ev, RetEv):
            lines.append(f"RET {ev.fn}")
        elif isinstance(ev, StmtHit):
            lines.append(f"STMT {ev.point_id}")
        else:
            raise InternalError(f"unknown event {type(ev).__name__}")
    return "\n".join(lines) + "\n"


def deserialize_trace(text: str) -> Trace:
    """Rebuild the event list and outcome from trace text."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# trace v1 outcome="):
        raise ValueError("not a trace: missing header")
    header = lines[0]
    error_check_id = None
    if "outcome=error" in header:
        outcome = OUTCOME_ERROR
        error_check_id = int(header.rsplit("check=", 1)[1])
    elif "outcome=budget" in header:
        outcome = OUTCOME_BUDGET
    else:
        outcome = OUTCOME_COMPLETED
    events: list = []
    covered: set[int] = set()
    for line in lines[1:]:
        parts = line.split(" ")
        tag = parts[0]
        if tag == "BR":
            events.append(BranchTaken(int(parts[1]), "then" if parts[2] == "T" else "else"))
        elif tag == "CKP":
            events.append(CheckPassed(int(parts[1])))
        elif tag == "CKF":
            events.append(CheckFailed(int(parts[1])))
        elif tag == "LD":
            events.append(LoadEv(int(parts[1]), _parse_addr(parts[2]), _parse_value(parts[3])))
        elif tag == "ST":
            events.append(StoreEv(int(parts[1]), _parse_addr(parts[2]), _parse_value(parts[3])))
        elif tag == "SYM":
            events.append(SymBindEv(int(parts[1]), _parse_addr(parts[2])))
        elif tag == "FRESH":
            events.append(FreshEv(int(parts[1]), int(parts[2]), int(parts[3]), _parse_addr(parts[4])))
        elif tag == "CALL":
            events.append(CallEv(parts[1]))
        elif tag == "RET":
            events.append(RetEv(parts[1]))
        elif tag == "STMT":
            events.append(StmtHit(int(parts[1])))
            covered.add(int(parts[1]))
        else:
            raise ValueError(f"unknown trace line {line!r}")
    return Trace(
        events=events,
        outcome=outcome,
        input=TestInput(),
        covered_points=covered,
        error_check_id=error_check_id,
    )
