"""Predicate and assignment expression language.

Grammar (no arithmetic, no side effects):

    expr       := or_expr
    or_expr    := and_expr ("or" and_expr)*
    and_expr   := not_expr ("and" not_expr)*
    not_expr   := "not" not_expr | comparison
    comparison := operand (cmp_op operand)?
    cmp_op     := "=" | "!=" | "<" | "<=" | ">" | ">="
    operand    := literal | "prop" "." NAME | "outcome" "." NAME "." NAME ("." NAME)?
                | "(" expr ")"
    literal    := NUMBER | STRING | "true" | "false"

Evaluation is total: a missing property or outcome field yields ABSENT, and
any comparison involving ABSENT or operands of different types is false.
Integers and non-integer numbers compare as numbers; booleans compare only
to booleans and have no ordering.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol

from . import errors
from .errors import err


class _Absent:
    def __repr__(self) -> str:  # pragma: no cover
        return "ABSENT"


ABSENT = _Absent()


class EvalContext(Protocol):
    """What an expression can see: properties and latest outcome fields."""

    def property_value(self, name: str) -> object: ...

    def outcome_field(self, schema_name: str, path: tuple[str, ...]) -> object: ...


@dataclass(frozen=True)
class Lit:
    value: object


@dataclass(frozen=True)
class PropRef:
    name: str


@dataclass(frozen=True)
class OutcomeRef:
    schema: str
    path: tuple[str, ...]


@dataclass(frozen=True)
class Cmp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Bool:
    op: str  # "and" | "or" | "not"
    operands: tuple


_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<num>-?\d+(?:\.\d+)?)
      | (?P<str>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
      | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<op><=|>=|!=|=|<|>|\(|\)|\.)
    )""",
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "not", "true", "false", "prop", "outcome"}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            rest = text[pos:].strip()
            if not rest:
                break
            raise err(errors.BAD_EXPRESSION, f"cannot tokenize at {rest[:20]!r}")
        pos = m.end()
        for kind in ("num", "str", "name", "op"):
            val = m.group(kind)
            if val is not None:
                tokens.append((kind, val))
                break
    return tokens


def _unescape(raw: str) -> str:
    body = raw[1:-1]
    return re.sub(r"\\(.)", lambda m: m.group(1), body)


class _Parser:
    def __init__(self, tokens: list[tuple[str, str]], source: str):
        self.tokens = tokens
        self.pos = 0
        self.source = source

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise err(errors.BAD_EXPRESSION, f"unexpected end of expression: {self.source!r}")
        self.pos += 1
        return tok

    def expect_op(self, symbol: str) -> None:
        kind, val = self.take()
        if kind != "op" or val != symbol:
            raise err(errors.BAD_EXPRESSION, f"expected {symbol!r}, got {val!r} in {self.source!r}")

    def parse(self):
        node = self.or_expr()
        if self.peek() is not None:
            raise err(errors.BAD_EXPRESSION,
                      f"trailing tokens after expression in {self.source!r}")
        return node

    def or_expr(self):
        parts = [self.and_expr()]
        while self.peek() == ("name", "or"):
            self.take()
            parts.append(self.and_expr())
        return parts[0] if len(parts) == 1 else Bool("or", tuple(parts))

    def and_expr(self):
        parts = [self.not_expr()]
        while self.peek() == ("name", "and"):
            self.take()
            parts.append(self.not_expr())
        return parts[0] if len(parts) == 1 else Bool("and", tuple(parts))

    def not_expr(self):
        if self.peek() == ("name", "not"):
            self.take()
            return Bool("not", (self.not_expr(),))
        return self.comparison()

    def comparison(self):
        left = self.operand()
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] in ("=", "!=", "<", "<=", ">", ">="):
            op = self.take()[1]
            right = self.operand()
            return Cmp(op, left, right)
        return left

    def _name_segment(self) -> str:
        kind, val = self.take()
        if kind != "name":
            raise err(errors.BAD_EXPRESSION, f"expected a name, got {val!r} in {self.source!r}")
        return val

    def operand(self):
        tok = self.take()
        kind, val = tok
        if kind == "num":
            return Lit(float(val) if "." in val else int(val))
        if kind == "str":
            return Lit(_unescape(val))
        if kind == "op" and val == "(":
            inner = self.or_expr()
            self.expect_op(")")
            return inner
        if kind == "name":
            if val == "true":
                return Lit(True)
            if val == "false":
                return Lit(False)
            if val == "prop":
                self.expect_op(".")
                return PropRef(self._name_segment())
            if val == "outcome":
                self.expect_op(".")
                schema = self._name_segment()
                self.expect_op(".")
                path = [self._name_segment()]
                if self.peek() == ("op", "."):
                    self.take()
                    path.append(self._name_segment())
                return OutcomeRef(schema, tuple(path))
            raise err(errors.BAD_EXPRESSION, f"unknown name {val!r} in {self.source!r}")
        raise err(errors.BAD_EXPRESSION, f"unexpected token {val!r} in {self.source!r}")


def parse(text: str):
    """Parse an expression; raises KernelError(bad-expression) on bad syntax."""
    if not isinstance(text, str) or not text.strip():
        raise err(errors.BAD_EXPRESSION, "expression must be a non-empty string")
    return _Parser(_tokenize(text), text).parse()


def _type_class(value: object) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, str):
        return "string"
    if isinstance(value, (int, float)):
        return "number"
    return "other"


def _compare(op: str, a: object, b: object) -> bool:
    if a is ABSENT or b is ABSENT:
        return False
    ta, tb = _type_class(a), _type_class(b)
    if ta != tb or ta == "other":
        return False
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if ta == "boolean":
        return False  # no ordering on booleans
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _truth(value: object) -> bool:
    return value is True


def evaluate(node, ctx: EvalContext):
    """Evaluate to a primitive, True/False, or ABSENT. Never raises."""
    if isinstance(node, Lit):
        return node.value
    if isinstance(node, PropRef):
        return ctx.property_value(node.name)
    if isinstance(node, OutcomeRef):
        return ctx.outcome_field(node.schema, node.path)
    if isinstance(node, Cmp):
        return _compare(node.op, evaluate(node.left, ctx), evaluate(node.right, ctx))
    if isinstance(node, Bool):
        if node.op == "not":
            return not _truth(evaluate(node.operands[0], ctx))
        if node.op == "and":
            return all(_truth(evaluate(n, ctx)) for n in node.operands)
        return any(_truth(evaluate(n, ctx)) for n in node.operands)
    raise err(errors.BAD_EXPRESSION, f"unknown node {node!r}")  # pragma: no cover


def holds(text: str, ctx: EvalContext) -> bool:
    """Parse and evaluate a predicate; true iff the result is exactly True."""
    return _truth(evaluate(parse(text), ctx))
