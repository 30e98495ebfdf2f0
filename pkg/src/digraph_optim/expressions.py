"""A small scalar expression language for objective functions.

Grammar (standard precedence, ``^`` binds tighter than unary minus):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' posint)?
    atom   := number | 'x' | ident '(' expr (',' expr)* ')' | '(' expr ')'

Known functions: exp, log, abs, max(a, b).  The only free variable is x.
Differentiation is symbolic; at kinks the least-norm element of the
generalized gradient is used (so d|x|/dx is 0 at x = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Expression", "Var", "Const", "Add", "Sub", "Mul", "Div", "Neg", "Pow",
    "Exp", "Log", "Abs", "Max", "Sign", "KinkSelect",
    "ParseError", "EvalError", "parse_expression", "differentiate",
    "evaluate", "is_smooth",
]


class ParseError(ValueError):
    """Syntax error; ``offset`` is the byte offset into the source text."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalError(ValueError):
    pass


class Expression:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Expression):
    pass


@dataclass(frozen=True)
class Const(Expression):
    value: float


@dataclass(frozen=True)
class Add(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Sub(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Mul(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Div(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Neg(Expression):
    operand: Expression


@dataclass(frozen=True)
class Pow(Expression):
    base: Expression
    exponent: int


@dataclass(frozen=True)
class Exp(Expression):
    operand: Expression


@dataclass(frozen=True)
class Log(Expression):
    operand: Expression


@dataclass(frozen=True)
class Abs(Expression):
    operand: Expression


@dataclass(frozen=True)
class Max(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Sign(Expression):
    """sign(u) with the least-norm convention sign(0) = 0.

    Appears only in derivatives (of Abs); not part of the surface syntax.
    """
    operand: Expression


@dataclass(frozen=True)
class KinkSelect(Expression):
    """Derivative of max(a, b): da where a > b, db where b > a, and at a tie
    the least-norm point of the segment [da, db] (0 if the endpoints have
    opposite signs, otherwise the endpoint of smaller magnitude)."""
    a: Expression
    b: Expression
    da: Expression
    db: Expression


_FUNCTIONS = {"exp": (Exp, 1), "log": (Log, 1), "abs": (Abs, 1),
              "max": (Max, 2)}


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.pos)

    def skip_ws(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def accept(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def expect(self, ch: str):
        if not self.accept(ch):
            raise self.error(f"expected {ch!r}")

    def parse(self) -> Expression:
        e = self.expr()
        self.skip_ws()
        if self.pos != len(self.src):
            raise self.error(f"unexpected {self.src[self.pos]!r}")
        return e

    def expr(self) -> Expression:
        e = self.term()
        while True:
            if self.accept("+"):
                e = Add(e, self.term())
            elif self.accept("-"):
                e = Sub(e, self.term())
            else:
                return e

    def term(self) -> Expression:
        e = self.unary()
        while True:
            if self.accept("*"):
                e = Mul(e, self.unary())
            elif self.accept("/"):
                e = Div(e, self.unary())
            else:
                return e

    def unary(self) -> Expression:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        if self.accept("^"):
            exponent = self.posint()
            return Pow(base, exponent)
        return base

    def posint(self) -> int:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.src) and self.src[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            raise self.error("expected a positive integer exponent")
        value = int(self.src[start:self.pos])
        if value < 1:
            self.pos = start
            raise self.error("exponent must be >= 1")
        return value

    def atom(self) -> Expression:
        self.skip_ws()
        if self.pos >= len(self.src):
            raise self.error("unexpected end of input")
        ch = self.src[self.pos]
        if ch == "(":
            self.pos += 1
            e = self.expr()
            self.expect(")")
            return e
        if ch.isdigit() or ch == ".":
            return self.number()
        if ch.isalpha() or ch == "_":
            return self.identifier()
        raise self.error(f"unexpected {ch!r}")

    def number(self) -> Const:
        start = self.pos
        seen_dot = seen_exp = False
        while self.pos < len(self.src):
            c = self.src[self.pos]
            if c.isdigit():
                self.pos += 1
            elif c == "." and not seen_dot and not seen_exp:
                seen_dot = True
                self.pos += 1
            elif c in "eE" and not seen_exp and self.pos > start:
                nxt = self.src[self.pos + 1:self.pos + 2]
                if nxt.isdigit() or nxt in "+-":
                    seen_exp = True
                    self.pos += 2 if nxt in "+-" else 1
                else:
                    break
            else:
                break
        text = self.src[start:self.pos]
        try:
            return Const(float(text))
        except ValueError:
            self.pos = start
            raise self.error(f"bad number literal {text!r}") from None

    def identifier(self) -> Expression:
        start = self.pos
        while self.pos < len(self.src) and (
                self.src[self.pos].isalnum() or self.src[self.pos] == "_"):
            self.pos += 1
        name = self.src[start:self.pos]
        if name == "x":
            return Var()
        if name in _FUNCTIONS:
            node, arity = _FUNCTIONS[name]
            self.expect("(")
            args = [self.expr()]
            while self.accept(","):
                args.append(self.expr())
            self.expect(")")
            if len(args) != arity:
                self.pos = start
                raise self.error(
                    f"{name} takes {arity} argument(s), got {len(args)}")
            return node(*args)
        self.pos = start
        raise self.error(f"unknown identifier {name!r}")


def parse_expression(src: str) -> Expression:
    if not src or not src.strip():
        raise ParseError("empty expression", 0)
    return _Parser(src).parse()


def evaluate(e: Expression, x: float) -> float:
    if isinstance(e, Var):
        return x
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Add):
        return evaluate(e.left, x) + evaluate(e.right, x)
    if isinstance(e, Sub):
        return evaluate(e.left, x) - evaluate(e.right, x)
    if isinstance(e, Mul):
        return evaluate(e.left, x) * evaluate(e.right, x)
    if isinstance(e, Div):
        denom = evaluate(e.right, x)
        if denom == 0:
            raise EvalError("division by zero")
        return evaluate(e.left, x) / denom
    if isinstance(e, Neg):
        return -evaluate(e.operand, x)
    if isinstance(e, Pow):
        b = evaluate(e.base, x)
        try:
            return b ** e.exponent
        except OverflowError:
            return math.inf if (b > 0 or e.exponent % 2 == 0) else -math.inf
    if isinstance(e, Exp):
        try:
            return math.exp(evaluate(e.operand, x))
        except OverflowError:
            return math.inf
    if isinstance(e, Log):
        v = evaluate(e.operand, x)
        if v <= 0:
            raise EvalError(f"log of non-positive value {v}")
        return math.log(v)
    if isinstance(e, Abs):
        return abs(evaluate(e.operand, x))
    if isinstance(e, Max):
        return max(evaluate(e.left, x), evaluate(e.right, x))
    if isinstance(e, Sign):
        v = evaluate(e.operand, x)
        return float(v > 0) - float(v < 0)
    if isinstance(e, KinkSelect):
        a, b = evaluate(e.a, x), evaluate(e.b, x)
        if a > b:
            return evaluate(e.da, x)
        if b > a:
            return evaluate(e.db, x)
        da, db = evaluate(e.da, x), evaluate(e.db, x)
        lo, hi = min(da, db), max(da, db)
        if lo <= 0 <= hi:
            return 0.0
        return lo if abs(lo) < abs(hi) else hi
    raise EvalError(f"cannot evaluate node {type(e).__name__}")


def differentiate(e: Expression) -> Expression:
    """d/dx with least-norm selections at kinks (abs, max)."""
    if isinstance(e, Var):
        return Const(1.0)
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Add):
        return Add(differentiate(e.left), differentiate(e.right))
    if isinstance(e, Sub):
        return Sub(differentiate(e.left), differentiate(e.right))
    if isinstance(e, Mul):
        return Add(Mul(differentiate(e.left), e.right),
                   Mul(e.left, differentiate(e.right)))
    if isinstance(e, Div):
        num = Sub(Mul(differentiate(e.left), e.right),
                  Mul(e.left, differentiate(e.right)))
        return Div(num, Pow(e.right, 2))
    if isinstance(e, Neg):
        return Neg(differentiate(e.operand))
    if isinstance(e, Pow):
        if e.exponent == 1:
            return differentiate(e.base)
        return Mul(Mul(Const(float(e.exponent)), Pow(e.base, e.exponent - 1)),
                   differentiate(e.base))
    if isinstance(e, Exp):
        return Mul(e, differentiate(e.operand))
    if isinstance(e, Log):
        return Div(differentiate(e.operand), e.operand)
    if isinstance(e, Abs):
        return Mul(Sign(e.operand), differentiate(e.operand))
    if isinstance(e, Max):
        return KinkSelect(e.left, e.right,
                          differentiate(e.left), differentiate(e.right))
    if isinstance(e, Sign):
        # Zero almost everywhere; the jump at 0 contributes nothing to the
        # least-norm selection.
        return Const(0.0)
    raise EvalError(f"cannot differentiate node {type(e).__name__}")


def is_smooth(e: Expression) -> bool:
    """True when the expression contains no kink-introducing node."""
    if isinstance(e, (Abs, Max, Sign, KinkSelect)):
        return False
    if isinstance(e, (Var, Const)):
        return True
    if isinstance(e, (Add, Sub, Mul, Div)):
        return is_smooth(e.left) and is_smooth(e.right)
    if isinstance(e, (Neg, Exp, Log)):
        return is_smooth(e.operand)
    if isinstance(e, Pow):
        return is_smooth(e.base)
    raise EvalError(f"unknown node {type(e).__name__}")
