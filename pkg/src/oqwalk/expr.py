"""Arithmetic micro-grammar for matrix entries in coin files.

Entries are strings such as ``"1/sqrt(3)"``, ``"-sqrt(2)/sqrt(3)"`` or, in
family files, ``"sqrt(1-2*x^2)/sqrt(2)"``. Allowed: decimal numbers, named
variables, ``+ - * / ^`` (``**`` too), parentheses and ``sqrt(...)``.
Evaluation walks a whitelisted Python AST; nothing is ever ``eval``-ed.
"""

from __future__ import annotations

import ast
import math
import operator
from typing import Mapping

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCS = {"sqrt": math.sqrt}


class ExprError(ValueError):
    pass


def evaluate(text: str, variables: Mapping[str, float] | None = None) -> float:
    """Evaluate one entry expression to a float."""
    if not isinstance(text, str):
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            return float(text)
        raise ExprError(f"expected an expression string, got {type(text).__name__}")
    source = text.strip().replace("^", "**")
    if not source:
        raise ExprError("empty expression")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ExprError(f"cannot parse {text!r}") from exc
    env = dict(variables or {})
    try:
        return float(_eval(tree.body, env, text))
    except (ZeroDivisionError, OverflowError) as exc:
        raise ExprError(f"cannot evaluate {text!r}: {exc}") from exc


def _eval(node, env, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _eval(node.operand, env, text)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left, env, text), _eval(node.right, env, text))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
        arg = _eval(node.args[0], env, text)
        if node.func.id == "sqrt" and arg < 0:
            raise ExprError(f"sqrt of negative value in {text!r}")
        return _FUNCS[node.func.id](arg)
    if isinstance(node, ast.Name):
        if node.id not in env:
            raise ExprError(f"unknown variable {node.id!r} in {text!r}")
        return env[node.id]
    raise ExprError(f"unsupported syntax in {text!r}")
