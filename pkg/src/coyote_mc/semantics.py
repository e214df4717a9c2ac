"""Exact 32-bit two's-complement arithmetic shared by the interpreter, the
symbolic evaluator, and the solver's model checker. One implementation so the
three can never disagree."""

from __future__ import annotations

INT_MIN = -(2**31)
INT_MAX = 2**31 - 1
_MOD = 2**32


def wrap32(v: int) -> int:
    return (v + 2**31) % _MOD - 2**31


def div_trunc(a: int, b: int) -> int:
    """C-style truncating division, total: x/0 == 0, INT_MIN/-1 wraps."""
    if b == 0:
        return 0
    q = abs(a) // abs(b)
    if (a < 0) != (b < 0):
        q = -q
    return wrap32(q)


def rem_trunc(a: int, b: int) -> int:
    """C-style remainder (sign of dividend), total: x%0 == 0."""
    if b == 0:
        return 0
    return wrap32(a - wrap32(div_trunc(a, b) * b))


def binop(op: str, a: int, b: int) -> int:
    if op == "+":
        return wrap32(a + b)
    if op == "-":
        return wrap32(a - b)
    if op == "*":
        return wrap32(a * b)
    if op == "/":
        return div_trunc(a, b)
    if op == "%":
        return rem_trunc(a, b)
    raise ValueError(f"unknown arithmetic operator {op!r}")


def compare(op: str, a, b) -> bool:
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise ValueError(f"unknown comparison operator {op!r}")
