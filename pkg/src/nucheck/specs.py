"""Text grammar for analytic functions.

Atoms::

    z                          the identity
    poly:[re,im;re,im;...]     coefficients in ascending degree
    kernel:c_re,c_im,p         (1 - conj(c) z)**(-p)

Compound forms (prefix, whitespace separated)::

    (+ f g ...)   (* f g)   (o f g)   (scale re,im f)   (d f)   (int f)

``(o f g)`` is ``f(g(z))``; ``(d f)`` the derivative; ``(int f)`` the
antiderivative vanishing at 0.  Every function's ``spec()`` is valid input,
and parsing it back reproduces the same ``spec()``.
"""

from __future__ import annotations

import re

from .analytic import (
    KernelPower,
    Polynomial,
    add,
    antiderivative,
    compose,
    multiply,
    scale,
    z,
)
from .errors import ConstructionError, ParseError

__all__ = ["parse_function", "format_function"]

_TOKEN = re.compile(r"\(|\)|poly:\[[^\]]*\]|[^\s()]+")


def _complex_pair(text, what):
    parts = text.split(",")
    if len(parts) != 2:
        raise ParseError(f"{what}: expected 're,im', got {text!r}")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ParseError(f"{what}: bad number in {text!r}") from exc


def _atom(tok):
    if tok == "z":
        return z
    if tok.startswith("poly:"):
        body = tok[5:].strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise ParseError(f"polynomial must be written poly:[...], got {tok!r}")
        inner = body[1:-1].strip()
        if not inner:
            raise ParseError("polynomial needs at least one coefficient")
        return Polynomial(tuple(_complex_pair(c.strip(), "polynomial coefficient")
                                for c in inner.split(";")))
    if tok.startswith("kernel:"):
        parts = tok[7:].split(",")
        if len(parts) != 3:
            raise ParseError(f"kernel must be kernel:c_re,c_im,p, got {tok!r}")
        try:
            c, p = complex(float(parts[0]), float(parts[1])), float(parts[2])
        except ValueError as exc:
            raise ParseError(f"bad number in {tok!r}") from exc
        try:
            return KernelPower(c, p)
        except ConstructionError as exc:
            raise ParseError(str(exc)) from exc
    raise ParseError(f"unknown function atom {tok!r}")


_ARITY = {"*": 2, "o": 2, "d": 1, "int": 1}


def _parse(tokens, i):
    if i >= len(tokens):
        raise ParseError("unexpected end of function expression")
    tok = tokens[i]
    if tok == ")":
        raise ParseError("unexpected ')'")
    if tok != "(":
        return _atom(tok), i + 1
    if i + 1 >= len(tokens):
        raise ParseError("unexpected end after '('")
    op = tokens[i + 1]
    i += 2
    factor = None
    if op == "scale":
        if i >= len(tokens):
            raise ParseError("scale needs a factor")
        factor = _complex_pair(tokens[i], "scale factor")
        i += 1
    elif op not in _ARITY and op != "+":
        raise ParseError(f"unknown operator {op!r}")
    args = []
    while i < len(tokens) and tokens[i] != ")":
        f, i = _parse(tokens, i)
        args.append(f)
    if i >= len(tokens):
        raise ParseError(f"missing ')' after {op!r}")
    i += 1
    if op == "+":
        if not args:
            raise ParseError("'+' needs at least one argument")
        return add(*args), i
    if op == "scale":
        if len(args) != 1:
            raise ParseError("scale takes exactly one function")
        return scale(factor, args[0]), i
    if len(args) != _ARITY[op]:
        raise ParseError(f"{op!r} takes {_ARITY[op]} argument(s), got {len(args)}")
    if op == "*":
        return multiply(*args), i
    if op == "o":
        return compose(*args), i
    if op == "d":
        return args[0].derivative(), i
    return antiderivative(args[0]), i


def parse_function(text):
    """Parse a function expression.

    Raises
    ------
    ParseError
        Malformed expression, with the offending token in the message.
    """
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise ParseError("empty function expression")
    f, i = _parse(tokens, 0)
    if i != len(tokens):
        raise ParseError(f"trailing input after expression: {' '.join(tokens[i:])!r}")
    return f


def format_function(f):
    return f.spec()
