"""Tiny expression grammar for user-defined coefficient functions.

Accepted syntax: the binary operators ``+ - * / ^`` (``^`` means power,
``**`` also works), unary minus, the functions ``exp`` and ``log``, numeric
literals, and the variables ``r`` and ``s``.  Compiled callables broadcast
over numpy arrays.  Anything outside this grammar is rejected, so config
files cannot execute arbitrary code.
"""

from __future__ import annotations

import ast
from typing import Callable

import numpy as np

from .errors import InputError

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_FUNCS = {"exp": np.exp, "log": np.log}
_ALLOWED_NAMES = {"r", "s"}


def _validate(node: ast.AST, text: str) -> None:
    if isinstance(node, ast.Expression):
        _validate(node.body, text)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _ALLOWED_BINOPS):
            raise InputError(f"operator not allowed in {text!r}")
        _validate(node.left, text)
        _validate(node.right, text)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise InputError(f"unary operator not allowed in {text!r}")
        _validate(node.operand, text)
    elif isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id in _ALLOWED_FUNCS):
            raise InputError(f"only exp/log calls are allowed in {text!r}")
        if node.keywords or len(node.args) != 1:
            raise InputError(f"exp/log take exactly one argument in {text!r}")
        _validate(node.args[0], text)
    elif isinstance(node, ast.Name):
        if node.id not in _ALLOWED_NAMES:
            raise InputError(f"unknown variable {node.id!r} in {text!r} (use r, s)")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise InputError(f"non-numeric constant in {text!r}")
    else:
        raise InputError(f"unsupported syntax in {text!r}")


def parse_expression(text: str) -> Callable[..., np.ndarray]:
    """Compile ``text`` into ``f(r, s)``; either variable may be unused."""
    source = text.replace("^", "**")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise InputError(f"cannot parse expression {text!r}: {exc.msg}") from None
    _validate(tree, text)
    code = compile(tree, "<coefficient>", "eval")
    env = {"__builtins__": {}, **_ALLOWED_FUNCS}

    def func(r, s):
        out = eval(code, env, {"r": r, "s": s})  # noqa: S307 - AST whitelisted above
        if np.ndim(out) == 0 and (np.ndim(r) > 0 or np.ndim(s) > 0):
            out = np.full(np.broadcast_shapes(np.shape(r), np.shape(s)), float(out))
        return out

    func.expression = text  # type: ignore[attr-defined]
    return func
