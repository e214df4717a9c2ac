"""Constraint solver for conjunctions of boolean expressions over bounded
32-bit symbols.

Algorithm: interval narrowing (HC4-style forward/backward passes) to a
fixpoint, then backtracking search branching on the symbol with the smallest
interval, values tried low to high, re-propagating per assignment. Complete on
bounded domains given budget; nonlinear terms are handled by search only.
Interval arithmetic is wrap-safe: any operation whose exact result range
leaves int32 widens to the full range instead of narrowing unsoundly.

Sat models are verified by evaluation before being returned, so an unsound
model is impossible; Unsat is reported only after exhausting the search space.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import symexpr as sx
from .semantics import INT_MAX, INT_MIN

DEFAULT_TIMEOUT_MS = 200
DEFAULT_STEP_LIMIT = 200_000

TOP = (INT_MIN, INT_MAX)
BOOL_RANGE = (0, 1)


class SolverError(Exception):
    pass


@dataclass
class Query:
    constraints: list[sx.SymExpr]
    domains: dict[int, tuple[int, int]] = field(default_factory=dict)
    widths: dict[int, int] = field(default_factory=dict)
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    step_limit: int = DEFAULT_STEP_LIMIT


@dataclass
class SolveResult:
    status: str  # "sat" | "unsat" | "unknown"
    model: dict[int, int] | None = None  # symbol id -> value
    fresh_model: dict[tuple[int, int], int] | None = None  # (tag, seq) -> value
    reason: str | None = None  # for unknown: "timeout" | "incomplete"

    @property
    def is_sat(self) -> bool:
        return self.status == "sat"


class _Budget(Exception):
    pass


class _SubtreeQuota(Exception):
    pass


def _var_key(ref) -> tuple:
    if isinstance(ref, sx.SymRef):
        return (0, ref.symbol_id)
    return (1, ref.tag, ref.seq)


_NEGATED = {"==": "!=", "!=": "==", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}


def _negate_cmp(op: str) -> str:
    return _NEGATED[op]


class _Search:
    def __init__(self, query: Query):
        self.query = query
        self.steps = 0
        self.deadline = time.monotonic() + query.timeout_ms / 1000.0
        self.refs = sorted(
            {r for c in query.constraints for r in sx.variables(c)}, key=_var_key
        )
        self.keys = [_var_key(r) for r in self.refs]
        self.ref_of = dict(zip(self.keys, self.refs))
        # Per-top-level-value subtree quota: a pathological subtree is
        # abandoned (marking the result incomplete) instead of eating the
        # whole step budget. Deterministic, unlike wall-clock cutoffs.
        self.value_quota = max(2000, query.step_limit // 32)
        self.cap: int | None = None
        self.incomplete = False

    def initial_intervals(self) -> dict:
        intervals = {}
        for ref, key in zip(self.refs, self.keys):
            if isinstance(ref, sx.SymRef):
                dom = self.query.domains.get(ref.symbol_id, TOP)
                if ref.width == 1:
                    dom = (max(dom[0], 0), min(dom[1], 1))
                intervals[key] = dom
            else:
                intervals[key] = TOP
        return intervals

    def tick(self) -> None:
        self.steps += 1
        if self.steps > self.query.step_limit:
            raise _Budget()
        if self.cap is not None and self.steps > self.cap:
            raise _SubtreeQuota()
        if self.steps % 512 == 0 and time.monotonic() > self.deadline:
            raise _Budget()

    # -- interval arithmetic

    @staticmethod
    def _fit(lo: int, hi: int) -> tuple[int, int]:
        if lo < INT_MIN or hi > INT_MAX:
            return TOP
        return (lo, hi)

    def forward(self, e: sx.SymExpr, intervals: dict, cache: dict) -> tuple[int, int]:
        hit = cache.get(id(e))
        if hit is not None:
            return hit
        result = self._forward(e, intervals, cache)
        cache[id(e)] = result
        return result

    def _forward(self, e, intervals, cache):
        if isinstance(e, sx.ConstI32):
            return (e.value, e.value)
        if isinstance(e, sx.ConstBool):
            v = 1 if e.value else 0
            return (v, v)
        if isinstance(e, (sx.SymRef, sx.FreshRef)):
            return intervals[_var_key(e)]
        if isinstance(e, sx.BinExpr):
            a = self.forward(e.lhs, intervals, cache)
            b = self.forward(e.rhs, intervals, cache)
            if e.op == "and":
                return (min(a[0], b[0]), min(a[1], b[1]))
            if e.op == "or":
                return (max(a[0], b[0]), max(a[1], b[1]))
            if e.op == "+":
                return self._fit(a[0] + b[0], a[1] + b[1])
            if e.op == "-":
                return self._fit(a[0] - b[1], a[1] - b[0])
            if e.op == "*":
                products = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
                return self._fit(min(products), max(products))
            return TOP  # division and remainder: search only
        if isinstance(e, sx.CmpExpr):
            a = self.forward(e.lhs, intervals, cache)
            b = self.forward(e.rhs, intervals, cache)
            return self._cmp_range(e.op, a, b)
        if isinstance(e, sx.NotExpr):
            r = self.forward(e.operand, intervals, cache)
            return (1 - r[1], 1 - r[0])
        if isinstance(e, sx.IteExpr):
            c = self.forward(e.cond, intervals, cache)
            t = self.forward(e.then_val, intervals, cache)
            f = self.forward(e.else_val, intervals, cache)
            if c == (1, 1):
                return t
            if c == (0, 0):
                return f
            return (min(t[0], f[0]), max(t[1], f[1]))
        raise SolverError(f"malformed expression {type(e).__name__}")

    @staticmethod
    def _cmp_range(op, a, b):
        lt = (1, 1) if a[1] < b[0] else (0, 0) if a[0] >= b[1] else BOOL_RANGE
        if op == "<":
            return lt
        if op == ">=":
            return (1 - lt[1], 1 - lt[0])
        if op == "<=":
            le = (1, 1) if a[1] <= b[0] else (0, 0) if a[0] > b[1] else BOOL_RANGE
            return le
        if op == ">":
            le = (1, 1) if a[1] <= b[0] else (0, 0) if a[0] > b[1] else BOOL_RANGE
            return (1 - le[1], 1 - le[0])
        if op == "==":
            if a[0] == a[1] == b[0] == b[1]:
                return (1, 1)
            if a[1] < b[0] or b[1] < a[0]:
                return (0, 0)
            return BOOL_RANGE
        if op == "!=":
            if a[0] == a[1] == b[0] == b[1]:
                return (0, 0)
            if a[1] < b[0] or b[1] < a[0]:
                return (1, 1)
            return BOOL_RANGE
        raise SolverError(f"unknown comparison {op}")

    # -- backward narrowing

    def backward(self, e, req, intervals, cache, changed) -> bool:
        """Narrow variable intervals so e's value can lie within req.
        Returns False when a variable interval becomes empty."""
        self.tick()
        fwd = self.forward(e, intervals, cache)
        lo, hi = max(fwd[0], req[0]), min(fwd[1], req[1])
        if lo > hi:
            return False
        if isinstance(e, (sx.SymRef, sx.FreshRef)):
            key = _var_key(e)
            cur = intervals[key]
            nlo, nhi = max(cur[0], lo), min(cur[1], hi)
            if (nlo, nhi) != cur:
                intervals[key] = (nlo, nhi)
                changed[0] = True
            return nlo <= nhi
        if isinstance(e, (sx.ConstI32, sx.ConstBool)):
            return True
        if isinstance(e, sx.NotExpr):
            return self.backward(e.operand, (1 - hi, 1 - lo), intervals, cache, changed)
        if isinstance(e, sx.BinExpr):
            return self._backward_bin(e, (lo, hi), intervals, cache, changed)
        if isinstance(e, sx.CmpExpr):
            if (lo, hi) == (1, 1):
                return self._backward_cmp(e.op, e.lhs, e.rhs, intervals, cache, changed)
            if (lo, hi) == (0, 0):
                return self._backward_cmp(
                    _negate_cmp(e.op), e.lhs, e.rhs, intervals, cache, changed
                )
            return True
        if isinstance(e, sx.IteExpr):
            c = self.forward(e.cond, intervals, cache)
            if c == (1, 1):
                return self.backward(e.then_val, (lo, hi), intervals, cache, changed)
            if c == (0, 0):
                return self.backward(e.else_val, (lo, hi), intervals, cache, changed)
            t = self.forward(e.then_val, intervals, cache)
            f = self.forward(e.else_val, intervals, cache)
            t_ok = max(t[0], lo) <= min(t[1], hi)
            f_ok = max(f[0], lo) <= min(f[1], hi)
            if t_ok and not f_ok:
                if not self.backward(e.cond, (1, 1), intervals, cache, changed):
                    return False
                return self.backward(e.then_val, (lo, hi), intervals, cache, changed)
            if f_ok and not t_ok:
                if not self.backward(e.cond, (0, 0), intervals, cache, changed):
                    return False
                return self.backward(e.else_val, (lo, hi), intervals, cache, changed)
            return t_ok or f_ok
        return True

    def _backward_bin(self, e, req, intervals, cache, changed) -> bool:
        a = self.forward(e.lhs, intervals, cache)
        b = self.forward(e.rhs, intervals, cache)
        if e.op == "and":
            if req == (1, 1):
                return self.backward(e.lhs, (1, 1), intervals, cache, changed) and \
                    self.backward(e.rhs, (1, 1), intervals, cache, changed)
            if req == (0, 0):
                if a == (1, 1):
                    return self.backward(e.rhs, (0, 0), intervals, cache, changed)
                if b == (1, 1):
                    return self.backward(e.lhs, (0, 0), intervals, cache, changed)
            return True
        if e.op == "or":
            if req == (0, 0):
                return self.backward(e.lhs, (0, 0), intervals, cache, changed) and \
                    self.backward(e.rhs, (0, 0), intervals, cache, changed)
            if req == (1, 1):
                if a == (0, 0):
                    return self.backward(e.rhs, (1, 1), intervals, cache, changed)
                if b == (0, 0):
                    return self.backward(e.lhs, (1, 1), intervals, cache, changed)
            return True
        if e.op == "+":
            ok = self.backward(e.lhs, self._wrap_hull(req[0] - b[1], req[1] - b[0]),
                               intervals, cache, changed)
            if not ok:
                return False
            a = self.forward(e.lhs, intervals, {})
            return self.backward(e.rhs, self._wrap_hull(req[0] - a[1], req[1] - a[0]),
                                 intervals, cache, changed)
        if e.op == "-":
            ok = self.backward(e.lhs, self._wrap_hull(req[0] + b[0], req[1] + b[1]),
                               intervals, cache, changed)
            if not ok:
                return False
            a = self.forward(e.lhs, intervals, {})
            return self.backward(e.rhs, self._wrap_hull(a[0] - req[1], a[1] - req[0]),
                                 intervals, cache, changed)
        return True  # *, /, %: search handles these

    @staticmethod
    def _clip(lo: int, hi: int) -> tuple[int, int]:
        return (max(lo, INT_MIN), min(hi, INT_MAX))

    @staticmethod
    def _wrap_hull(lo: int, hi: int) -> tuple[int, int]:
        """Sound operand refinement under wrapping arithmetic: the exact
        mathematical solution interval may correspond to operands shifted by
        +/- 2^32, so hull every shift that intersects int32."""
        out_lo, out_hi = None, None
        for shift in (0, 2**32, -(2**32)):
            clo, chi = max(lo + shift, INT_MIN), min(hi + shift, INT_MAX)
            if clo <= chi:
                out_lo = clo if out_lo is None else min(out_lo, clo)
                out_hi = chi if out_hi is None else max(out_hi, chi)
        if out_lo is None:
            return (1, 0)  # empty: no operand value can produce the result
        return (out_lo, out_hi)

    def _backward_cmp(self, op, lhs, rhs, intervals, cache, changed) -> bool:
        if lhs == rhs:
            # Structurally identical operands decide immediately; interval
            # ping-pong would take one pass per excluded value otherwise.
            return op in ("<=", ">=", "==")
        a = self.forward(lhs, intervals, cache)
        b = self.forward(rhs, intervals, cache)
        if op == "<":
            return self.backward(lhs, self._clip(INT_MIN, b[1] - 1), intervals, cache, changed) \
                and self.backward(rhs, self._clip(a[0] + 1, INT_MAX), intervals, cache, changed)
        if op == "<=":
            return self.backward(lhs, self._clip(INT_MIN, b[1]), intervals, cache, changed) \
                and self.backward(rhs, self._clip(a[0], INT_MAX), intervals, cache, changed)
        if op == ">":
            return self.backward(lhs, self._clip(b[0] + 1, INT_MAX), intervals, cache, changed) \
                and self.backward(rhs, self._clip(INT_MIN, a[1] - 1), intervals, cache, changed)
        if op == ">=":
            return self.backward(lhs, self._clip(b[0], INT_MAX), intervals, cache, changed) \
                and self.backward(rhs, self._clip(INT_MIN, a[1]), intervals, cache, changed)
        if op == "==":
            meet = (max(a[0], b[0]), min(a[1], b[1]))
            if meet[0] > meet[1]:
                return False
            return self.backward(lhs, meet, intervals, cache, changed) \
                and self.backward(rhs, meet, intervals, cache, changed)
        if op == "!=":
            if a[0] == a[1]:
                if b == (a[0], a[0]):
                    return False
                if b[0] == a[0]:
                    return self.backward(rhs, (b[0] + 1, b[1]), intervals, cache, changed)
                if b[1] == a[0]:
                    return self.backward(rhs, (b[0], b[1] - 1), intervals, cache, changed)
            if b[0] == b[1]:
                if a[0] == b[0] and a[1] > a[0]:
                    return self.backward(lhs, (a[0] + 1, a[1]), intervals, cache, changed)
                if a[1] == b[0] and a[1] > a[0]:
                    return self.backward(lhs, (a[0], a[1] - 1), intervals, cache, changed)
            return True
        raise SolverError(f"unknown comparison {op}")

    # -- fixpoint + search

    def propagate(self, intervals: dict) -> bool:
        for _ in range(64):
            changed = [False]
            for c in self.query.constraints:
                self.tick()
                if not self.backward(c, (1, 1), intervals, {}, changed):
                    return False
            if not changed[0]:
                return True
        return True

    def model_from(self, intervals: dict):
        bindings: dict[int, int] = {}
        fresh: dict[tuple[int, int], int] = {}
        for ref, key in zip(self.refs, self.keys):
            lo = intervals[key][0]
            if isinstance(ref, sx.SymRef):
                bindings[ref.symbol_id] = bool(lo) if ref.width == 1 else lo
            else:
                fresh[(ref.tag, ref.seq)] = lo
        return bindings, fresh

    def search(self, intervals: dict, top: bool = False):
        if not self.propagate(intervals):
            return None
        pick = None
        pick_width = None
        for key in self.keys:
            lo, hi = intervals[key]
            if lo < hi and (pick_width is None or hi - lo < pick_width):
                pick = key
                pick_width = hi - lo
        if pick is None:
            bindings, fresh = self.model_from(intervals)
            for c in self.query.constraints:
                if not sx.evaluate(c, bindings, fresh):
                    return None
            return intervals
        lo, hi = intervals[pick]
        if hi - lo >= 64:
            # Too wide to enumerate: bisect, low half first, re-propagating
            # per half so pruning keeps the low-to-high value preference.
            mid = lo + (hi - lo) // 2
            ranges = ((lo, mid), (mid + 1, hi))
        else:
            ranges = tuple((v, v) for v in range(lo, hi + 1))
        for rng in ranges:
            self.tick()
            child = dict(intervals)
            child[pick] = rng
            saved_cap = self.cap
            if top:
                quota_cap = self.steps + self.value_quota
                self.cap = quota_cap if saved_cap is None else min(saved_cap, quota_cap)
            try:
                result = self.search(child)
            except _SubtreeQuota:
                self.cap = saved_cap
                if saved_cap is not None and self.steps > saved_cap:
                    raise  # an ancestor's quota, not ours
                self.incomplete = True
                continue
            self.cap = saved_cap
            if result is not None:
                return result
        return None


def solve(query: Query) -> SolveResult:
    """Decide a conjunction; Sat models are verified before being returned."""
    search = _Search(query)
    try:
        result = search.search(search.initial_intervals(), top=True)
    except _Budget:
        return SolveResult(status="unknown", reason="timeout")
    except (RecursionError, _SubtreeQuota):
        return SolveResult(status="unknown", reason="incomplete")
    if result is None:
        if search.incomplete:
            # Some subtree was abandoned: exhaustion was not proven.
            return SolveResult(status="unknown", reason="incomplete")
        return SolveResult(status="unsat")
    bindings, fresh = search.model_from(result)
    if not eval_model(query.constraints, bindings, fresh):
        raise SolverError("unsound model escaped the search")  # soundness gate
    return SolveResult(status="sat", model=bindings, fresh_model=fresh)


def propagate_intervals(query: Query) -> dict[int, tuple[int, int]] | None:
    """Fixpoint interval narrowing; None means Unsat. Never removes a
    satisfying assignment (wrap-prone ranges widen to the full int32 range)."""
    search = _Search(query)
    intervals = search.initial_intervals()
    try:
        ok = search.propagate(intervals)
    except _Budget:
        ok = True  # partial narrowing is still sound
    if not ok:
        return None
    out: dict[int, tuple[int, int]] = {}
    for ref, key in zip(search.refs, search.keys):
        if isinstance(ref, sx.SymRef):
            out[ref.symbol_id] = intervals[key]
    return out


def eval_model(
    constraints: list[sx.SymExpr],
    bindings: dict[int, int],
    fresh: dict[tuple[int, int], int] | None = None,
) -> bool:
    """Evaluate a model against constraints with exact wrapping semantics."""
    try:
        return all(sx.evaluate(c, bindings, fresh or {}) for c in constraints)
    except KeyError as exc:
        raise SolverError(str(exc)) from None


# --- SMT-LIB2 export -----------------------------------------------------------------

_SMT_CMP = {"==": "=", "<": "bvslt", "<=": "bvsle", ">": "bvsgt", ">=": "bvsge"}
_SMT_ARITH = {"+": "bvadd", "-": "bvsub", "*": "bvmul", "/": "bvsdiv", "%": "bvsrem"}


def _smt_name(ref) -> str:
    if isinstance(ref, sx.SymRef):
        return f"s{ref.symbol_id}"
    return f"f{ref.tag}_{ref.seq}"


def _smt_const(v: int) -> str:
    return f"(_ bv{v & 0xFFFFFFFF} 32)"


def _to_smt(e: sx.SymExpr) -> str:
    if isinstance(e, sx.ConstI32):
        return _smt_const(e.value)
    if isinstance(e, sx.ConstBool):
        return "true" if e.value else "false"
    if isinstance(e, (sx.SymRef, sx.FreshRef)):
        return _smt_name(e)
    if isinstance(e, sx.BinExpr):
        if e.op in ("and", "or"):
            return f"({e.op} {_to_smt(e.lhs)} {_to_smt(e.rhs)})"
        return f"({_SMT_ARITH[e.op]} {_to_smt(e.lhs)} {_to_smt(e.rhs)})"
    if isinstance(e, sx.CmpExpr):
        if e.op == "!=":
            return f"(not (= {_to_smt(e.lhs)} {_to_smt(e.rhs)}))"
        return f"({_SMT_CMP[e.op]} {_to_smt(e.lhs)} {_to_smt(e.rhs)})"
    if isinstance(e, sx.NotExpr):
        return f"(not {_to_smt(e.operand)})"
    if isinstance(e, sx.IteExpr):
        return f"(ite {_to_smt(e.cond)} {_to_smt(e.then_val)} {_to_smt(e.else_val)})"
    raise SolverError(f"cannot export {type(e).__name__}")


def export_smtlib(query: Query) -> str:
    """QF_BV script for offline cross-checking with an external solver."""
    lines = ["(set-logic QF_BV)"]
    refs = sorted({r for c in query.constraints for r in sx.variables(c)}, key=_var_key)
    for ref in refs:
        sort = "Bool" if isinstance(ref, sx.SymRef) and ref.width == 1 else "(_ BitVec 32)"
        lines.append(f"(declare-const {_smt_name(ref)} {sort})")
    for ref in refs:
        if isinstance(ref, sx.SymRef) and ref.width == 32:
            dom = query.domains.get(ref.symbol_id)
            if dom is not None:
                name = _smt_name(ref)
                lines.append(f"(assert (bvsge {name} {_smt_const(dom[0])}))")
                lines.append(f"(assert (bvsle {name} {_smt_const(dom[1])}))")
    for c in query.constraints:
        lines.append(f"(assert {_to_smt(c)})")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"
