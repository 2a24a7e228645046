"""The arithmetic expression language of case files.

Grammar: decimal literals, the variables ``x``, ``y``, ``t``, the constant
``pi``, the functions ``sin cos exp sqrt min max abs``, parentheses and the
binary operators ``+ - * / ^`` (``^`` is right-associative, the others
left-associative). Expressions are parsed with sympy so they can be
differentiated, then compiled to vectorized numpy callables.
"""
import re
from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np
import sympy
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

from .exceptions import ExpressionParseError

X, Y, T = sympy.symbols("x y t", real=True)

FUNCTIONS = {
    "sin": sympy.sin,
    "cos": sympy.cos,
    "exp": sympy.exp,
    "sqrt": sympy.sqrt,
    "min": sympy.Min,
    "max": sympy.Max,
    "abs": sympy.Abs,
}
NAMES = {"x": X, "y": Y, "t": T, "pi": sympy.pi, **FUNCTIONS}

_TOKEN = re.compile(
    r"\s*(?:(?P<number>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)

# min/max are compiled to elementwise numpy reductions
_MINIMUM = sympy.Function("cutmove_minimum")
_MAXIMUM = sympy.Function("cutmove_maximum")
_NUMPY_EXTRAS = {
    "cutmove_minimum": lambda *args: reduce(np.minimum, args),
    "cutmove_maximum": lambda *args: reduce(np.maximum, args),
}


def _check_tokens(source):
    position = 0
    previous = None
    while position < len(source):
        if source[position:].strip() == "":
            break
        match = _TOKEN.match(source, position)
        if match is None:
            raise ExpressionParseError(
                f"Unexpected character {source[position:].strip()[0]!r} in '{source}'."
            )
        name = match.group("name")
        if name is not None and name not in NAMES:
            raise ExpressionParseError(f"Unknown identifier '{name}' in '{source}'.")
        op = match.group("op")
        if op == "*" and previous == "*":
            raise ExpressionParseError(f"Use '^' for powers in '{source}'.")
        previous = op
        position = match.end()


def parse(source):
    """Parse ``source`` into a sympy expression in ``x``, ``y``, ``t``."""
    if not isinstance(source, str) or not source.strip():
        raise ExpressionParseError(f"Empty expression {source!r}.")
    _check_tokens(source)
    try:
        expr = parse_expr(
            source,
            local_dict=dict(NAMES),
            transformations=standard_transformations + (convert_xor,),
        )
    except Exception as e:
        # sympy raises SyntaxError, TokenError or TypeError depending on the input
        raise ExpressionParseError(f"Cannot parse '{source}': {e}") from e
    if not isinstance(expr, sympy.Expr):
        raise ExpressionParseError(f"'{source}' is not a scalar expression.")
    stray = expr.free_symbols - {X, Y, T}
    if stray:
        raise ExpressionParseError(f"Unknown symbols {sorted(map(str, stray))} in '{source}'.")
    return expr


def compile_expr(expr):
    """Vectorized ``f(x, y, t)`` for a sympy expression."""
    expr = expr.replace(sympy.Min, _MINIMUM).replace(sympy.Max, _MAXIMUM)
    fn = sympy.lambdify((X, Y, T), expr, modules=[_NUMPY_EXTRAS, "numpy"])

    def evaluate(x, y, t=0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            value = fn(x, y, t)
        return np.broadcast_to(np.asarray(value, dtype=float), np.broadcast(x, y).shape)

    return evaluate


@dataclass(frozen=True, eq=False)
class Expression:
    """A parsed expression together with its source text and compiled form.

    Derived expressions (derivatives, manufactured sources) have no source.
    """

    expr: sympy.Expr
    source: str = None

    @classmethod
    def from_source(cls, source):
        return cls(expr=parse(source), source=source)

    @cached_property
    def function(self):
        return compile_expr(self.expr)

    def __call__(self, x, y, t=0.0):
        return self.function(x, y, t)

    def diff(self, symbol):
        return Expression(expr=sympy.diff(self.expr, symbol))

    @property
    def is_zero(self):
        return self.expr == 0

    def __str__(self):
        return self.source if self.source is not None else str(self.expr)
