"""Exact evaluation of expectation expressions and guards at a state.

Values are arbitrary-precision rationals; the only non-rational value is
INF, which can enter through the `inf` literal or through a series that
the stabilization policy declares divergent.  Division by zero, negative
or fractional exponents, fractional modulus operands and 0 * inf are
evaluation-time errors, since they can depend on the state.
"""

from __future__ import annotations

from fractions import Fraction

from .domain import INF, SERIES_POLICY, ConvergencePolicy, format_state, sum_series
from .errors import EvaluationError, GuardRangeError
from .syntax import (
    Abs,
    Add,
    And,
    Cmp,
    Div,
    Expr,
    Indicator,
    InfLiteral,
    IntVar,
    Max,
    Min,
    Mod,
    Mul,
    Neg,
    Not,
    Or,
    Pow,
    Pred,
    ProbGuard,
    RatConst,
    SignOf,
    Sub,
    Sum,
)


def eval_expr(e: Expr, state: dict, policy: ConvergencePolicy = SERIES_POLICY):
    """Value of `e` at `state`: a Fraction, or INF.

    Finite sums and series-free expressions are exact; a sum to infinity
    is resolved by the stabilization policy (partial-sum limit, or INF on
    a divergence verdict).
    """
    env = {name: Fraction(value) for name, value in state.items()}
    return _eval(e, env, policy)


def _eval(e: Expr, env: dict, policy: ConvergencePolicy):
    if isinstance(e, RatConst):
        return e.value
    if isinstance(e, IntVar):
        try:
            return env[e.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {e.name!r}") from None
    if isinstance(e, InfLiteral):
        return INF
    if isinstance(e, Neg):
        return -_eval(e.operand, env, policy)
    if isinstance(e, Abs):
        return abs(_eval(e.operand, env, policy))
    if isinstance(e, SignOf):
        v = _eval(e.operand, env, policy)
        if v is INF:
            raise EvaluationError("sign(inf) is undefined")
        return Fraction(0 if v == 0 else (1 if v > 0 else -1))
    if isinstance(e, Add):
        return _eval(e.left, env, policy) + _eval(e.right, env, policy)
    if isinstance(e, Sub):
        return _eval(e.left, env, policy) - _eval(e.right, env, policy)
    if isinstance(e, Mul):
        left = _eval(e.left, env, policy)
        right = _eval(e.right, env, policy)
        return left * right  # 0 * inf raises inside Infinity
    if isinstance(e, Div):
        left = _eval(e.left, env, policy)
        right = _eval(e.right, env, policy)
        if right is not INF and right == 0:
            raise EvaluationError("division by zero")
        return left / right
    if isinstance(e, Mod):
        left = _eval(e.left, env, policy)
        right = _eval(e.right, env, policy)
        if left is INF or right is INF:
            raise EvaluationError("mod with infinite operand")
        if left.denominator != 1 or right.denominator != 1:
            raise EvaluationError("mod requires integer operands")
        if right == 0:
            raise EvaluationError("mod by zero")
        return Fraction(int(left) % int(right))
    if isinstance(e, Pow):
        base = _eval(e.base, env, policy)
        exponent = _eval(e.exponent, env, policy)
        if base is INF or exponent is INF:
            raise EvaluationError("pow with infinite operand")
        if exponent.denominator != 1 or exponent < 0:
            raise EvaluationError(
                f"exponent must be a non-negative integer, got {exponent}"
            )
        return base ** int(exponent)
    if isinstance(e, Min):
        return min(_eval(e.left, env, policy), _eval(e.right, env, policy))
    if isinstance(e, Max):
        return max(_eval(e.left, env, policy), _eval(e.right, env, policy))
    if isinstance(e, Indicator):
        return Fraction(1) if _eval_pred(e.pred, env, policy) else Fraction(0)
    if isinstance(e, Sum):
        return _eval_sum(e, env, policy)
    raise TypeError(f"not an expression node: {e!r}")


def _eval_sum(e: Sum, env: dict, policy: ConvergencePolicy):
    lo = _eval(e.lo, env, policy)
    if lo is INF or lo.denominator != 1:
        raise EvaluationError(f"sum lower bound must be an integer, got {lo}")
    lo = int(lo)
    saved = env.get(e.index, _MISSING)

    def terms(upper):
        k = lo
        try:
            while upper is None or k <= upper:
                env[e.index] = Fraction(k)
                yield _eval(e.body, env, policy)
                k += 1
        finally:
            if saved is _MISSING:
                env.pop(e.index, None)
            else:
                env[e.index] = saved

    if e.hi is None:
        value, _info = sum_series(terms(None), policy)
        return value
    hi = _eval(e.hi, env, policy)
    if hi is INF:
        value, _info = sum_series(terms(None), policy)
        return value
    if hi.denominator != 1:
        raise EvaluationError(f"sum upper bound must be an integer, got {hi}")
    total = Fraction(0)
    for term in terms(int(hi)):
        total = total + term
    return total


_MISSING = object()


def _eval_pred(p: Pred, env: dict, policy: ConvergencePolicy) -> bool:
    if isinstance(p, Cmp):
        left = _eval(p.left, env, policy)
        right = _eval(p.right, env, policy)
        if p.op == "=":
            return left == right
        if p.op == "!=":
            return left != right
        if p.op == "<":
            return left < right
        if p.op == "<=":
            return left <= right
        if p.op == ">":
            return left > right
        if p.op == ">=":
            return left >= right
        raise EvaluationError(f"unknown comparison {p.op!r}")
    if isinstance(p, And):
        return _eval_pred(p.left, env, policy) and _eval_pred(p.right, env, policy)
    if isinstance(p, Or):
        return _eval_pred(p.left, env, policy) or _eval_pred(p.right, env, policy)
    if isinstance(p, Not):
        return not _eval_pred(p.operand, env, policy)
    raise TypeError(f"not a predicate node: {p!r}")


def eval_pred(p: Pred, state: dict) -> bool:
    env = {name: Fraction(value) for name, value in state.items()}
    return _eval_pred(p, env, SERIES_POLICY)


def eval_guard(guard: ProbGuard, state: dict, policy: ConvergencePolicy = SERIES_POLICY) -> Fraction:
    """Probability that the guard holds at `state`; must land in [0, 1]."""
    value = eval_expr(guard.expr, state, policy)
    if value is INF or value < 0 or value > 1:
        raise GuardRangeError(
            f"guard value {value} outside [0, 1] at state {{{format_state(state)}}}"
        )
    return value
