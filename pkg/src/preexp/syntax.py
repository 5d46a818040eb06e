"""AST for guarded-command programs and expectation expressions.

Programs are built from skip, integer assignment, sequencing, and
probabilistic if/while whose guards evaluate to a probability of taking
the "true" branch.  Expectation expressions denote per-state rational
values (possibly infinite, for integrability witnesses) and include
indicator brackets over predicates and finite or infinite series.

All nodes are immutable and compare structurally, so parsed values can be
shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ParseError


# --------------------------------------------------------------------------
# expression nodes


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class RatConst(Expr):
    value: Fraction


@dataclass(frozen=True)
class IntVar(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mod(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True)
class Abs(Expr):
    operand: Expr


@dataclass(frozen=True)
class SignOf(Expr):
    operand: Expr


@dataclass(frozen=True)
class Min(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Max(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Indicator(Expr):
    pred: "Pred"


@dataclass(frozen=True)
class Sum(Expr):
    """sum(index, lo, hi, body); hi=None denotes an infinite upper bound."""

    index: str
    lo: Expr
    hi: Expr | None
    body: Expr


@dataclass(frozen=True)
class InfLiteral(Expr):
    pass


# --------------------------------------------------------------------------
# predicate nodes (used inside indicator brackets and as guard sugar)


class Pred:
    __slots__ = ()


CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Cmp(Pred):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And(Pred):
    left: Pred
    right: Pred


@dataclass(frozen=True)
class Or(Pred):
    left: Pred
    right: Pred


@dataclass(frozen=True)
class Not(Pred):
    operand: Pred


# --------------------------------------------------------------------------
# program nodes


class Program:
    __slots__ = ()


@dataclass(frozen=True)
class ProbGuard:
    expr: Expr


@dataclass(frozen=True)
class Skip(Program):
    pass


@dataclass(frozen=True)
class Assign(Program):
    var: str
    expr: Expr


@dataclass(frozen=True)
class Seq(Program):
    first: Program
    second: Program


@dataclass(frozen=True)
class If(Program):
    guard: ProbGuard
    then: Program
    orelse: Program


@dataclass(frozen=True)
class While(Program):
    guard: ProbGuard
    body: Program


# --------------------------------------------------------------------------
# smart constructors with constant folding
#
# Folding is deliberately limited to literal arithmetic plus the 0/1 weight
# short-circuits used by guard-weighted sums; no other algebraic rewriting
# happens anywhere in the toolkit.

ZERO = RatConst(Fraction(0))
ONE = RatConst(Fraction(1))


def rat(value) -> RatConst:
    return RatConst(Fraction(value))


def add(left: Expr, right: Expr) -> Expr:
    if isinstance(left, RatConst) and isinstance(right, RatConst):
        return RatConst(left.value + right.value)
    if left == ZERO:
        return right
    if right == ZERO:
        return left
    return Add(left, right)


def sub(left: Expr, right: Expr) -> Expr:
    if isinstance(left, RatConst) and isinstance(right, RatConst):
        return RatConst(left.value - right.value)
    if right == ZERO:
        return left
    return Sub(left, right)


def mul(left: Expr, right: Expr) -> Expr:
    if isinstance(left, RatConst) and isinstance(right, RatConst):
        return RatConst(left.value * right.value)
    # Zero weights short-circuit before multiplication; this is what lets
    # guard-weighted sums skip branches whose probability is zero.
    if left == ZERO or right == ZERO:
        return ZERO
    if left == ONE:
        return right
    if right == ONE:
        return left
    return Mul(left, right)


def div(left: Expr, right: Expr) -> Expr:
    if (
        isinstance(left, RatConst)
        and isinstance(right, RatConst)
        and right.value != 0
    ):
        return RatConst(left.value / right.value)
    return Div(left, right)


def neg(operand: Expr) -> Expr:
    if isinstance(operand, RatConst):
        return RatConst(-operand.value)
    return Neg(operand)


def power(base: Expr, exponent: Expr) -> Expr:
    if (
        isinstance(base, RatConst)
        and isinstance(exponent, RatConst)
        and exponent.value.denominator == 1
        and exponent.value >= 0
    ):
        return RatConst(base.value ** int(exponent.value))
    return Pow(base, exponent)


def mod_(left: Expr, right: Expr) -> Expr:
    if (
        isinstance(left, RatConst)
        and isinstance(right, RatConst)
        and left.value.denominator == 1
        and right.value.denominator == 1
        and right.value != 0
    ):
        return RatConst(Fraction(int(left.value) % int(right.value)))
    return Mod(left, right)


def abs_(operand: Expr) -> Expr:
    if isinstance(operand, RatConst):
        return RatConst(abs(operand.value))
    return Abs(operand)


def sign_(operand: Expr) -> Expr:
    if isinstance(operand, RatConst):
        v = operand.value
        return RatConst(Fraction(0 if v == 0 else (1 if v > 0 else -1)))
    return SignOf(operand)


def min_(left: Expr, right: Expr) -> Expr:
    if isinstance(left, RatConst) and isinstance(right, RatConst):
        return RatConst(min(left.value, right.value))
    return Min(left, right)


def max_(left: Expr, right: Expr) -> Expr:
    if isinstance(left, RatConst) and isinstance(right, RatConst):
        return RatConst(max(left.value, right.value))
    return Max(left, right)


def seq(*programs: Program) -> Program:
    """Right-nested sequence of one or more statements."""
    if not programs:
        return Skip()
    result = programs[-1]
    for stmt in reversed(programs[:-1]):
        result = Seq(stmt, result)
    return result


# --------------------------------------------------------------------------
# free variables


def free_variables(node) -> set[str]:
    """Free variable names of a Program, Expr, Pred or ProbGuard.

    Sum indices are binders: they shadow outer variables of the same name
    inside the series body (but not inside the bounds).
    """
    if isinstance(node, Program):
        return _program_vars(node)
    if isinstance(node, ProbGuard):
        return free_variables(node.expr)
    if isinstance(node, Pred):
        return _pred_vars(node)
    return _expr_vars(node)


def _program_vars(p: Program) -> set[str]:
    if isinstance(p, Skip):
        return set()
    if isinstance(p, Assign):
        return {p.var} | _expr_vars(p.expr)
    if isinstance(p, Seq):
        return _program_vars(p.first) | _program_vars(p.second)
    if isinstance(p, If):
        return (
            _expr_vars(p.guard.expr)
            | _program_vars(p.then)
            | _program_vars(p.orelse)
        )
    if isinstance(p, While):
        return _expr_vars(p.guard.expr) | _program_vars(p.body)
    raise TypeError(f"not a program node: {p!r}")


def _expr_vars(e: Expr) -> set[str]:
    if isinstance(e, (RatConst, InfLiteral)):
        return set()
    if isinstance(e, IntVar):
        return {e.name}
    if isinstance(e, (Neg, Abs, SignOf)):
        return _expr_vars(e.operand)
    if isinstance(e, (Add, Sub, Mul, Div, Mod, Min, Max)):
        return _expr_vars(e.left) | _expr_vars(e.right)
    if isinstance(e, Pow):
        return _expr_vars(e.base) | _expr_vars(e.exponent)
    if isinstance(e, Indicator):
        return _pred_vars(e.pred)
    if isinstance(e, Sum):
        inner = _expr_vars(e.body) - {e.index}
        bounds = _expr_vars(e.lo) | (_expr_vars(e.hi) if e.hi is not None else set())
        return inner | bounds
    raise TypeError(f"not an expression node: {e!r}")


def _pred_vars(p: Pred) -> set[str]:
    if isinstance(p, Cmp):
        return _expr_vars(p.left) | _expr_vars(p.right)
    if isinstance(p, (And, Or)):
        return _pred_vars(p.left) | _pred_vars(p.right)
    if isinstance(p, Not):
        return _pred_vars(p.operand)
    raise TypeError(f"not a predicate node: {p!r}")


# --------------------------------------------------------------------------
# capture-free substitution


def substitute(e: Expr, var: str, replacement: Expr) -> Expr:
    """e with every free occurrence of `var` replaced by `replacement`.

    Sum binders are alpha-renamed when they would capture a free variable
    of the replacement.
    """
    if isinstance(e, (RatConst, InfLiteral)):
        return e
    if isinstance(e, IntVar):
        return replacement if e.name == var else e
    if isinstance(e, Neg):
        return neg(substitute(e.operand, var, replacement))
    if isinstance(e, Abs):
        return abs_(substitute(e.operand, var, replacement))
    if isinstance(e, SignOf):
        return sign_(substitute(e.operand, var, replacement))
    if isinstance(e, Add):
        return add(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Sub):
        return sub(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Mul):
        return mul(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Div):
        return div(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Mod):
        return mod_(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Min):
        return min_(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Max):
        return max_(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Pow):
        return power(substitute(e.base, var, replacement), substitute(e.exponent, var, replacement))
    if isinstance(e, Indicator):
        return Indicator(substitute_pred(e.pred, var, replacement))
    if isinstance(e, Sum):
        lo = substitute(e.lo, var, replacement)
        hi = substitute(e.hi, var, replacement) if e.hi is not None else None
        if e.index == var:
            return Sum(e.index, lo, hi, e.body)
        if e.index in free_variables(replacement):
            fresh = _fresh_name(e.index, free_variables(e.body) | free_variables(replacement) | {var})
            body = substitute(e.body, e.index, IntVar(fresh))
            return Sum(fresh, lo, hi, substitute(body, var, replacement))
        return Sum(e.index, lo, hi, substitute(e.body, var, replacement))
    raise TypeError(f"not an expression node: {e!r}")


def substitute_pred(p: Pred, var: str, replacement: Expr) -> Pred:
    if isinstance(p, Cmp):
        return Cmp(p.op, substitute(p.left, var, replacement), substitute(p.right, var, replacement))
    if isinstance(p, And):
        return And(substitute_pred(p.left, var, replacement), substitute_pred(p.right, var, replacement))
    if isinstance(p, Or):
        return Or(substitute_pred(p.left, var, replacement), substitute_pred(p.right, var, replacement))
    if isinstance(p, Not):
        return Not(substitute_pred(p.operand, var, replacement))
    raise TypeError(f"not a predicate node: {p!r}")


def _fresh_name(base: str, taken: set[str]) -> str:
    k = 1
    while f"{base}_{k}" in taken:
        k += 1
    return f"{base}_{k}"


# --------------------------------------------------------------------------
# structural checks


def contains_series_or_inf(e: Expr) -> bool:
    if isinstance(e, (Sum, InfLiteral)):
        return True
    if isinstance(e, (RatConst, IntVar)):
        return False
    if isinstance(e, (Neg, Abs, SignOf)):
        return contains_series_or_inf(e.operand)
    if isinstance(e, (Add, Sub, Mul, Div, Mod, Min, Max)):
        return contains_series_or_inf(e.left) or contains_series_or_inf(e.right)
    if isinstance(e, Pow):
        return contains_series_or_inf(e.base) or contains_series_or_inf(e.exponent)
    if isinstance(e, Indicator):
        return _pred_has_series_or_inf(e.pred)
    raise TypeError(f"not an expression node: {e!r}")


def _pred_has_series_or_inf(p: Pred) -> bool:
    if isinstance(p, Cmp):
        return contains_series_or_inf(p.left) or contains_series_or_inf(p.right)
    if isinstance(p, (And, Or)):
        return _pred_has_series_or_inf(p.left) or _pred_has_series_or_inf(p.right)
    if isinstance(p, Not):
        return _pred_has_series_or_inf(p.operand)
    raise TypeError(f"not a predicate node: {p!r}")


def contains_infinite_series(e) -> bool:
    """True when `e` has a sum with an unbounded upper index anywhere."""
    if isinstance(e, Sum):
        return (
            e.hi is None
            or contains_infinite_series(e.lo)
            or contains_infinite_series(e.hi)
            or contains_infinite_series(e.body)
        )
    if isinstance(e, (RatConst, IntVar, InfLiteral)):
        return False
    if isinstance(e, (Neg, Abs, SignOf)):
        return contains_infinite_series(e.operand)
    if isinstance(e, (Add, Sub, Mul, Div, Mod, Min, Max)):
        return contains_infinite_series(e.left) or contains_infinite_series(e.right)
    if isinstance(e, Pow):
        return contains_infinite_series(e.base) or contains_infinite_series(e.exponent)
    if isinstance(e, Indicator):
        return _pred_has_infinite_series(e.pred)
    if isinstance(e, Cmp):
        return contains_infinite_series(e.left) or contains_infinite_series(e.right)
    if isinstance(e, (And, Or)):
        return contains_infinite_series(e.left) or contains_infinite_series(e.right)
    if isinstance(e, Not):
        return contains_infinite_series(e.operand)
    raise TypeError(f"not an expression node: {e!r}")


def _pred_has_infinite_series(p: Pred) -> bool:
    return contains_infinite_series(p)


def contains_inf_literal(e: Expr) -> bool:
    if isinstance(e, InfLiteral):
        return True
    if isinstance(e, (RatConst, IntVar)):
        return False
    if isinstance(e, (Neg, Abs, SignOf)):
        return contains_inf_literal(e.operand)
    if isinstance(e, (Add, Sub, Mul, Div, Mod, Min, Max)):
        return contains_inf_literal(e.left) or contains_inf_literal(e.right)
    if isinstance(e, Pow):
        return contains_inf_literal(e.base) or contains_inf_literal(e.exponent)
    if isinstance(e, Indicator):
        return False  # predicate operands are validated inf-free at parse
    if isinstance(e, Sum):
        return (
            contains_inf_literal(e.lo)
            or (e.hi is not None and contains_inf_literal(e.hi))
            or contains_inf_literal(e.body)
        )
    raise TypeError(f"not an expression node: {e!r}")


def check_program(p: Program) -> None:
    """Reject programs that use series or infinity anywhere.

    Program values are plain integers; series and the infinity literal
    exist only in expectation expressions.
    """
    for e in _program_exprs(p):
        if contains_series_or_inf(e):
            raise ParseError("'sum' and 'inf' are not allowed inside programs")


def _program_exprs(p: Program):
    if isinstance(p, Skip):
        return
    elif isinstance(p, Assign):
        yield p.expr
    elif isinstance(p, Seq):
        yield from _program_exprs(p.first)
        yield from _program_exprs(p.second)
    elif isinstance(p, If):
        yield p.guard.expr
        yield from _program_exprs(p.then)
        yield from _program_exprs(p.orelse)
    elif isinstance(p, While):
        yield p.guard.expr
        yield from _program_exprs(p.body)
    else:
        raise TypeError(f"not a program node: {p!r}")


# --------------------------------------------------------------------------
# pretty printing (canonical concrete syntax; parse(print(ast)) == ast)

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def print_expr(e: Expr) -> str:
    return _pe(e, 0)


def _pe(e: Expr, parent_prec: int) -> str:
    if isinstance(e, RatConst):
        text = str(e.value)
        prec = _PREC_NEG if e.value < 0 else _PREC_ATOM
    elif isinstance(e, IntVar):
        text, prec = e.name, _PREC_ATOM
    elif isinstance(e, InfLiteral):
        text, prec = "inf", _PREC_ATOM
    elif isinstance(e, Neg):
        text, prec = f"-{_pe(e.operand, _PREC_NEG + 1)}", _PREC_NEG
    elif isinstance(e, Add):
        text = f"{_pe(e.left, _PREC_ADD)} + {_pe(e.right, _PREC_ADD + 1)}"
        prec = _PREC_ADD
    elif isinstance(e, Sub):
        text = f"{_pe(e.left, _PREC_ADD)} - {_pe(e.right, _PREC_ADD + 1)}"
        prec = _PREC_ADD
    elif isinstance(e, Mul):
        text = f"{_pe(e.left, _PREC_MUL)}*{_pe(e.right, _PREC_MUL + 1)}"
        prec = _PREC_MUL
    elif isinstance(e, Div):
        text = f"{_pe(e.left, _PREC_MUL)}/{_pe(e.right, _PREC_MUL + 1)}"
        prec = _PREC_MUL
    elif isinstance(e, Pow):
        text = f"{_pe(e.base, _PREC_POW + 1)}^{_pe(e.exponent, _PREC_POW)}"
        prec = _PREC_POW
    elif isinstance(e, Mod):
        text, prec = f"mod({print_expr(e.left)}, {print_expr(e.right)})", _PREC_ATOM
    elif isinstance(e, Abs):
        text, prec = f"abs({print_expr(e.operand)})", _PREC_ATOM
    elif isinstance(e, SignOf):
        text, prec = f"sign({print_expr(e.operand)})", _PREC_ATOM
    elif isinstance(e, Min):
        text, prec = f"min({print_expr(e.left)}, {print_expr(e.right)})", _PREC_ATOM
    elif isinstance(e, Max):
        text, prec = f"max({print_expr(e.left)}, {print_expr(e.right)})", _PREC_ATOM
    elif isinstance(e, Indicator):
        text, prec = f"[{print_pred(e.pred)}]", _PREC_ATOM
    elif isinstance(e, Sum):
        hi = "inf" if e.hi is None else print_expr(e.hi)
        text = f"sum({e.index}, {print_expr(e.lo)}, {hi}, {print_expr(e.body)})"
        prec = _PREC_ATOM
    else:
        raise TypeError(f"not an expression node: {e!r}")
    return f"({text})" if prec < parent_prec else text


def print_pred(p: Pred) -> str:
    return _pp(p, 0)


def _pp(p: Pred, parent_prec: int) -> str:
    if isinstance(p, Cmp):
        text, prec = f"{print_expr(p.left)} {p.op} {print_expr(p.right)}", 3
    elif isinstance(p, Not):
        text, prec = f"not {_pp(p.operand, 3)}", 2  # binds tighter than and/or
    elif isinstance(p, And):
        text, prec = f"{_pp(p.left, 2)} and {_pp(p.right, 3)}", 2
    elif isinstance(p, Or):
        text, prec = f"{_pp(p.left, 1)} or {_pp(p.right, 2)}", 1
    else:
        raise TypeError(f"not a predicate node: {p!r}")
    return f"({text})" if prec < parent_prec else text


def print_program(p: Program, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(p, Skip):
        return f"{pad}skip"
    if isinstance(p, Assign):
        return f"{pad}{p.var} := {print_expr(p.expr)}"
    if isinstance(p, Seq):
        return f"{print_program(p.first, indent)};\n{print_program(p.second, indent)}"
    if isinstance(p, If):
        return (
            f"{pad}if ({print_expr(p.guard.expr)}) {{\n"
            f"{print_program(p.then, indent + 1)}\n"
            f"{pad}}} else {{\n"
            f"{print_program(p.orelse, indent + 1)}\n"
            f"{pad}}}"
        )
    if isinstance(p, While):
        return (
            f"{pad}while ({print_expr(p.guard.expr)}) {{\n"
            f"{print_program(p.body, indent + 1)}\n"
            f"{pad}}}"
        )
    raise TypeError(f"not a program node: {p!r}")
