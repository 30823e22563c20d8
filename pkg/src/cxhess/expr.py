"""Safe arithmetic expressions over the real coordinates of C^n.

Grammar (a subset of Python expression syntax)::

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := ('+' | '-') factor | power
    power   := atom ('**' | '^') factor
    atom    := NUMBER | NAME | FUNC '(' expr (',' expr)* ')' | '(' expr ')' | '|z|'

Names: ``x1, y1, ..., xn, yn`` (real and imaginary parts of z_k), ``absz``
or ``|z|`` for the Euclidean norm, ``r2`` for |z|^2, constants ``pi``, ``e``
and any extra constants passed by the caller (e.g. ``delta``).  Callers
working in R^d pass ``coords`` (e.g. ``["x1", "x2", "x3"]``) instead.  Functions:
exp, log, sqrt, sin, cos, tan, sinh, cosh, tanh, abs, min, max.
"""
import ast
from functools import reduce
import re

import numpy as np

from .errors import DomainError

_FUNCS = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos,
    "tan": np.tan, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh, "abs": np.abs,
    "min": lambda *a: reduce(np.minimum, a), "max": lambda *a: reduce(np.maximum, a),
}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


class ExpressionError(DomainError):
    def __init__(self, message, text=None, col=None):
        loc = f" at column {col}" if col is not None else ""
        super().__init__(f"{message}{loc}" + (f" in {text!r}" if text else ""))
        self.col = col


class Expression:
    """A compiled expression; call with an array of points of shape (..., 2n)."""

    def __init__(self, text, n, constants=None, coords=None):
        if isinstance(text, (int, float)):
            text = repr(float(text))
        self.text = str(text)
        self.n = n
        if coords is None:
            coords = [c for k in range(1, n + 1) for c in (f"x{k}", f"y{k}")]
        self.coords = list(coords)
        self.constants = {"pi": np.pi, "e": np.e, **(constants or {})}
        src = self.text.replace("|z|", "absz").replace("^", "**")
        try:
            self._tree = ast.parse(src, mode="eval").body
        except SyntaxError as exc:
            raise ExpressionError("syntax error", self.text, exc.offset) from None
        self._validate(self._tree)

    def _validate(self, node):
        names = set(self.coords) | {"absz", "r2"} | set(self.constants)
        for sub in ast.walk(node):
            col = getattr(sub, "col_offset", None)
            if isinstance(sub, ast.Call):
                if not isinstance(sub.func, ast.Name) or sub.func.id not in _FUNCS or sub.keywords:
                    raise ExpressionError("unknown function", self.text, col)
            elif isinstance(sub, ast.Name):
                if sub.id not in names and sub.id not in _FUNCS:
                    raise ExpressionError(f"unknown name {sub.id!r}", self.text, col)
            elif isinstance(sub, ast.Constant):
                if not isinstance(sub.value, (int, float)) or isinstance(sub.value, bool):
                    raise ExpressionError("only numeric literals allowed", self.text, col)
            elif isinstance(sub, ast.BinOp):
                if type(sub.op) not in _BINOPS:
                    raise ExpressionError("operator not allowed", self.text, col)
            elif isinstance(sub, ast.UnaryOp):
                if not isinstance(sub.op, (ast.UAdd, ast.USub)):
                    raise ExpressionError("operator not allowed", self.text, col)
            elif not isinstance(sub, (ast.Load, ast.operator, ast.unaryop, ast.expr_context)):
                raise ExpressionError(f"construct {type(sub).__name__} not allowed", self.text, col)

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != len(self.coords):
            raise DomainError(f"points need {len(self.coords)} real coordinates")
        env = dict(self.constants)
        for k, name in enumerate(self.coords):
            env[name] = pts[..., k]
        r2 = np.sum(pts * pts, axis=-1)
        env["r2"] = r2
        env["absz"] = np.sqrt(r2)
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), pts.shape[:-1]).copy()

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id]
        if isinstance(node, ast.UnaryOp):
            val = self._eval(node.operand, env)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.Call):
            args = [self._eval(a, env) for a in node.args]
            return _FUNCS[node.func.id](*args)
        raise ExpressionError(f"cannot evaluate {type(node).__name__}", self.text)

    def __repr__(self):
        return f"Expression({self.text!r})"


_NUM = re.compile(r"^\s*[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?\s*$")


def as_callable(value, n, constants=None, coords=None):
    """Accept a number, an expression string or a callable and return a callable of points."""
    if callable(value):
        return value
    if isinstance(value, (int, float)) or (isinstance(value, str) and _NUM.match(value)):
        c = float(value)
        return lambda pts: np.full(np.asarray(pts).shape[:-1], c)
    if isinstance(value, str):
        return Expression(value, n, constants, coords)
    raise ExpressionError(f"cannot interpret {value!r} as a scalar field")
