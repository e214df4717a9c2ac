"""Symbolic expressions over 32-bit symbols and fresh stub values.

Expression nodes are immutable dataclasses with structural equality, so DAGs
deduplicate naturally in dicts/sets. Evaluation uses the same wrapping
arithmetic as the concrete interpreter.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import semantics

ARITH_OPS = ("+", "-", "*", "/", "%")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
BOOL_OPS = ("and", "or")


class SymExpr:
    __slots__ = ()


@dataclass(frozen=True)
class SymRef(SymExpr):
    symbol_id: int
    width: int = 32  # 32 (int) or 1 (bool)


@dataclass(frozen=True)
class FreshRef(SymExpr):
    tag: int
    seq: int


@dataclass(frozen=True)
class ConstI32(SymExpr):
    value: int


@dataclass(frozen=True)
class ConstBool(SymExpr):
    value: bool


@dataclass(frozen=True)
class BinExpr(SymExpr):
    op: str  # arithmetic ops (int) or "and"/"or" (bool)
    lhs: SymExpr
    rhs: SymExpr


@dataclass(frozen=True)
class CmpExpr(SymExpr):
    op: str
    lhs: SymExpr
    rhs: SymExpr


@dataclass(frozen=True)
class NotExpr(SymExpr):
    operand: SymExpr


@dataclass(frozen=True)
class IteExpr(SymExpr):
    cond: SymExpr
    then_val: SymExpr
    else_val: SymExpr


TRUE = ConstBool(True)
FALSE = ConstBool(False)


def is_bool(e: SymExpr) -> bool:
    if isinstance(e, (ConstBool, CmpExpr, NotExpr)):
        return True
    if isinstance(e, SymRef):
        return e.width == 1
    if isinstance(e, BinExpr):
        return e.op in BOOL_OPS
    if isinstance(e, IteExpr):
        return is_bool(e.then_val)
    return False


def is_const(e: SymExpr) -> bool:
    return isinstance(e, (ConstI32, ConstBool))


def variables(e: SymExpr) -> set:
    """All SymRef/FreshRef leaves in an expression."""
    out: set = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, (SymRef, FreshRef)):
            out.add(node)
        elif isinstance(node, (BinExpr, CmpExpr)):
            stack.append(node.lhs)
            stack.append(node.rhs)
        elif isinstance(node, NotExpr):
            stack.append(node.operand)
        elif isinstance(node, IteExpr):
            stack.extend((node.cond, node.then_val, node.else_val))
    return out


def evaluate(e: SymExpr, bindings: dict, fresh: dict | None = None):
    """Evaluate under a model: bindings maps symbol id -> value, fresh maps
    (tag, seq) -> value. Exact 32-bit wrapping semantics."""
    if isinstance(e, ConstI32):
        return e.value
    if isinstance(e, ConstBool):
        return e.value
    if isinstance(e, SymRef):
        if e.symbol_id not in bindings:
            raise KeyError(f"model is missing symbol {e.symbol_id}")
        v = bindings[e.symbol_id]
        return bool(v) if e.width == 1 else semantics.wrap32(int(v))
    if isinstance(e, FreshRef):
        key = (e.tag, e.seq)
        if fresh is None or key not in fresh:
            raise KeyError(f"model is missing fresh value {key}")
        return semantics.wrap32(int(fresh[key]))
    if isinstance(e, BinExpr):
        a = evaluate(e.lhs, bindings, fresh)
        b = evaluate(e.rhs, bindings, fresh)
        if e.op == "and":
            return bool(a) and bool(b)
        if e.op == "or":
            return bool(a) or bool(b)
        return semantics.binop(e.op, a, b)
    if isinstance(e, CmpExpr):
        a = evaluate(e.lhs, bindings, fresh)
        b = evaluate(e.rhs, bindings, fresh)
        return semantics.compare(e.op, a, b)
    if isinstance(e, NotExpr):
        return not evaluate(e.operand, bindings, fresh)
    if isinstance(e, IteExpr):
        if evaluate(e.cond, bindings, fresh):
            return evaluate(e.then_val, bindings, fresh)
        return evaluate(e.else_val, bindings, fresh)
    raise TypeError(f"cannot evaluate {type(e).__name__}")


# --- construction with on-the-fly simplification --------------------------------


def mk_bin(op: str, lhs: SymExpr, rhs: SymExpr) -> SymExpr:
    if op in BOOL_OPS:
        if isinstance(lhs, ConstBool):
            if op == "and":
                return rhs if lhs.value else FALSE
            return TRUE if lhs.value else rhs
        if isinstance(rhs, ConstBool):
            if op == "and":
                return lhs if rhs.value else FALSE
            return TRUE if rhs.value else lhs
        return BinExpr(op, lhs, rhs)
    if isinstance(lhs, ConstI32) and isinstance(rhs, ConstI32):
        return ConstI32(semantics.binop(op, lhs.value, rhs.value))
    if op == "+":
        if isinstance(lhs, ConstI32) and lhs.value == 0:
            return rhs
        if isinstance(rhs, ConstI32) and rhs.value == 0:
            return lhs
    if op == "-" and isinstance(rhs, ConstI32) and rhs.value == 0:
        return lhs
    if op == "*":
        if isinstance(lhs, ConstI32) and lhs.value == 1:
            return rhs
        if isinstance(rhs, ConstI32) and rhs.value == 1:
            return lhs
        if (isinstance(lhs, ConstI32) and lhs.value == 0) or (
            isinstance(rhs, ConstI32) and rhs.value == 0
        ):
            return ConstI32(0)
    return BinExpr(op, lhs, rhs)


def mk_cmp(op: str, lhs: SymExpr, rhs: SymExpr) -> SymExpr:
    if is_const(lhs) and is_const(rhs):
        a = lhs.value
        b = rhs.value
        return ConstBool(semantics.compare(op, a, b))
    # `!x` lowers as (x == false); read it back as a negation.
    if op == "==" and isinstance(rhs, ConstBool) and not rhs.value:
        return mk_not(lhs)
    if op == "==" and isinstance(rhs, ConstBool) and rhs.value:
        return lhs
    return CmpExpr(op, lhs, rhs)


def mk_not(e: SymExpr) -> SymExpr:
    if isinstance(e, ConstBool):
        return ConstBool(not e.value)
    if isinstance(e, NotExpr):
        return e.operand
    return NotExpr(e)


def mk_ite(cond: SymExpr, then_val: SymExpr, else_val: SymExpr) -> SymExpr:
    if isinstance(cond, ConstBool):
        return then_val if cond.value else else_val
    if then_val == else_val:
        return then_val
    return IteExpr(cond, then_val, else_val)


def simplify(e: SymExpr) -> SymExpr:
    """Bottom-up simplification: constant folding, double negation, neutral
    elements, constant-condition Ite. Semantics preserving."""
    if isinstance(e, BinExpr):
        return mk_bin(e.op, simplify(e.lhs), simplify(e.rhs))
    if isinstance(e, CmpExpr):
        return mk_cmp(e.op, simplify(e.lhs), simplify(e.rhs))
    if isinstance(e, NotExpr):
        return mk_not(simplify(e.operand))
    if isinstance(e, IteExpr):
        return mk_ite(simplify(e.cond), simplify(e.then_val), simplify(e.else_val))
    return e


# --- stable prefix rendering --------------------------------------------------------

_PREFIX_OPS = {
    "+": "add", "-": "sub", "*": "mul", "/": "sdiv", "%": "srem",
    "==": "eq", "!=": "ne", "<": "slt", "<=": "sle", ">": "sgt", ">=": "sge",
    "and": "and", "or": "or",
}


def to_prefix(e: SymExpr) -> str:
    """Deterministic prefix notation, used by --dump-pc and path hashing."""
    if isinstance(e, ConstI32):
        return f"(const {e.value})"
    if isinstance(e, ConstBool):
        return "(true)" if e.value else "(false)"
    if isinstance(e, SymRef):
        return f"(sym {e.symbol_id})"
    if isinstance(e, FreshRef):
        return f"(fresh {e.tag} {e.seq})"
    if isinstance(e, BinExpr):
        return f"({_PREFIX_OPS[e.op]} {to_prefix(e.lhs)} {to_prefix(e.rhs)})"
    if isinstance(e, CmpExpr):
        return f"({_PREFIX_OPS[e.op]} {to_prefix(e.lhs)} {to_prefix(e.rhs)})"
    if isinstance(e, NotExpr):
        return f"(not {to_prefix(e.operand)})"
    if isinstance(e, IteExpr):
        return f"(ite {to_prefix(e.cond)} {to_prefix(e.then_val)} {to_prefix(e.else_val)})"
    raise TypeError(f"cannot render {type(e).__name__}")
