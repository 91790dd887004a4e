"""Tiny arithmetic expression language used for potentials and warps in configs.

Grammar: numbers, ``+ - * / **``, parentheses, ``sin cos exp``, the constant
``pi`` (or ``π``) and the variables ``r t x y``. Expressions compile to
vectorized callables over numpy arrays.
"""

import ast

import numpy as np

from .errors import ConfigError

VARIABLES = ("r", "t", "x", "y")
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTS = {"pi": np.pi}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class Expression:
    """A parsed expression; call with keyword arrays for the variables it uses."""

    def __init__(self, source):
        if isinstance(source, (int, float)):
            source = repr(float(source))
        if not isinstance(source, str):
            raise ConfigError(f"expression must be a string, got {type(source).__name__}")
        self.source = source
        text = source.replace("π", "pi").replace("−", "-").replace("^", "**")
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {source!r}: {exc.msg}") from None
        self._body = tree.body
        self.variables = set()
        self._check(self._body)

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ConfigError(f"bad literal in {self.source!r}")
        elif isinstance(node, ast.Name):
            if node.id in VARIABLES:
                self.variables.add(node.id)
            elif node.id not in _CONSTS:
                raise ConfigError(f"unknown name {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ConfigError(f"operator not allowed in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ConfigError(f"operator not allowed in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ConfigError(f"unknown function in {self.source!r}")
            if len(node.args) != 1 or node.keywords:
                raise ConfigError(f"functions take one argument in {self.source!r}")
            self._check(node.args[0])
        else:
            raise ConfigError(f"unsupported syntax in {self.source!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            return env[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            val = self._eval(node.operand, env)
            return -val if isinstance(node.op, ast.USub) else val
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, **env):
        missing = self.variables - set(env)
        if missing:
            raise ConfigError(f"expression {self.source!r} needs {sorted(missing)}")
        shape = np.broadcast(*[np.asarray(v) for v in env.values()]).shape if env else ()
        out = self._eval(self._body, env)
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()

    def __repr__(self):
        return f"Expression({self.source!r})"


def compile_expr(source):
    return Expression(source)
