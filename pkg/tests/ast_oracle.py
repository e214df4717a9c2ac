"""Direct AST interpreter used as an independent oracle for the IR pipeline.

Deliberately separate from the package's interpreter: it walks the typed AST
with its own arithmetic, so agreement with the lowered-IR interpreter is
meaningful. Scalar programs only (ints and bools, no memory objects).
"""

from __future__ import annotations

from coyote_mc.minic import ast


class DivByZero(Exception):
    pass


class _ReturnValue(Exception):
    def __init__(self, value):
        self.value = value


def _wrap(v: int) -> int:
    v &= 0xFFFFFFFF
    return v - 0x100000000 if v >= 0x80000000 else v


def _eval(e: ast.Expr, env: dict, program) -> object:
    if isinstance(e, ast.IntLit):
        return e.value
    if isinstance(e, ast.BoolLit):
        return e.value
    if isinstance(e, ast.VarRef):
        return env[e.name]
    if isinstance(e, ast.Unary):
        if e.op == "-":
            return _wrap(-_eval(e.operand, env, program))
        if e.op == "!":
            return not _eval(e.operand, env, program)
        raise NotImplementedError(f"oracle cannot evaluate unary {e.op!r}")
    if isinstance(e, ast.Binary):
        if e.op == "&&":
            return bool(_eval(e.lhs, env, program)) and bool(_eval(e.rhs, env, program))
        if e.op == "||":
            return bool(_eval(e.lhs, env, program)) or bool(_eval(e.rhs, env, program))
        a = _eval(e.lhs, env, program)
        b = _eval(e.rhs, env, program)
        if e.op == "+":
            return _wrap(a + b)
        if e.op == "-":
            return _wrap(a - b)
        if e.op == "*":
            return _wrap(a * b)
        if e.op in ("/", "%"):
            if b == 0:
                raise DivByZero()
            q = abs(a) // abs(b)
            if (a < 0) != (b < 0):
                q = -q
            return _wrap(q) if e.op == "/" else _wrap(a - _wrap(q * b))
        if e.op == "==":
            return a == b
        if e.op == "!=":
            return a != b
        if e.op == "<":
            return a < b
        if e.op == "<=":
            return a <= b
        if e.op == ">":
            return a > b
        if e.op == ">=":
            return a >= b
    if isinstance(e, ast.Call):
        args = [_eval(a, env, program) for a in e.args]
        return call_function(program, e.name, args)
    raise NotImplementedError(f"oracle cannot evaluate {type(e).__name__}")


def _exec(s: ast.Stmt, env: dict, program) -> None:
    if isinstance(s, ast.Block):
        for inner in s.stmts:
            _exec(inner, env, program)
    elif isinstance(s, ast.VarDecl):
        env[s.name] = _eval(s.init, env, program) if s.init is not None else None
    elif isinstance(s, ast.Assign):
        assert isinstance(s.target, ast.VarRef), "oracle handles scalar variables only"
        env[s.target.name] = _eval(s.value, env, program)
    elif isinstance(s, ast.If):
        if _eval(s.cond, env, program):
            _exec(s.then_body, env, program)
        elif s.else_body is not None:
            _exec(s.else_body, env, program)
    elif isinstance(s, ast.While):
        while _eval(s.cond, env, program):
            _exec(s.body, env, program)
    elif isinstance(s, ast.Return):
        raise _ReturnValue(None if s.value is None else _eval(s.value, env, program))
    elif isinstance(s, ast.ExprStmt):
        _eval(s.expr, env, program)
    else:
        raise NotImplementedError(f"oracle cannot execute {type(s).__name__}")


def call_function(program, name: str, args: list):
    fn = program.functions[name]
    env = {pname: arg for (pname, _), arg in zip(fn.params, args)}
    try:
        _exec(fn.body, env, program)
    except _ReturnValue as ret:
        return ret.value
    return None
