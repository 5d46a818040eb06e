"""Weakest pre-expectation transformer for non-negative post-expectations.

Loop-free programs are transformed symbolically by substitution and
guard-weighted sums.  Loops are resolved per state: the characteristic
map of a loop is iterated from zero, which yields a non-decreasing value
sequence whose limit is detected by the convergence policy (divergence
verdicts are heuristic and flagged).  Grid-based invariant checks certify
the loop rules for upper bounds and for lower-bound families; a passing
check certifies the inequality on the supplied grid only.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction

from . import syntax as ast
from .domain import (
    INF,
    LOOP_POLICY,
    ConvergenceInfo,
    ConvergencePolicy,
    detect_monotone_limit,
    format_state,
    fraction_str,
    state_key,
)
from .errors import EvaluationError, NonNegativityError
from .evaluator import eval_expr, eval_guard
from .syntax import (
    Assign,
    Expr,
    If,
    Indicator,
    ProbGuard,
    Program,
    RatConst,
    Seq,
    Skip,
    While,
    substitute,
)

_RECURSION_HEADROOM = 100_000


# --------------------------------------------------------------------------
# symbolic transformer (loop-free)


def wp_symbolic(program: Program, post: Expr) -> Expr:
    """Pre-expectation of a loop-free program as an expression.

    skip is the identity, assignment substitutes, sequencing composes and
    a probabilistic branch mixes both arms weighted by the guard.  Only
    constant folding is applied; equality of results is meant pointwise.
    """
    if isinstance(program, Skip):
        return post
    if isinstance(program, Assign):
        return substitute(post, program.var, program.expr)
    if isinstance(program, Seq):
        return wp_symbolic(program.first, wp_symbolic(program.second, post))
    if isinstance(program, If):
        guard = program.guard.expr
        left = ast.mul(guard, wp_symbolic(program.then, post))
        right = ast.mul(ast.sub(ast.ONE, guard), wp_symbolic(program.orelse, post))
        return ast.add(left, right)
    if isinstance(program, While):
        raise EvaluationError("wp_symbolic does not handle loops")
    raise TypeError(f"not a program node: {program!r}")


def characteristic_expr(guard: ProbGuard, body: Program, post: Expr, inner: Expr) -> Expr:
    """One application of a loop's characteristic map, as an expression:
    (1 - guard) * post + guard * wp(body, inner).  The body must be
    loop-free."""
    keep = ast.mul(ast.sub(ast.ONE, guard.expr), post)
    step = ast.mul(guard.expr, wp_symbolic(body, inner))
    return ast.add(keep, step)


# --------------------------------------------------------------------------
# per-state evaluation


class _Ctx:
    """Evaluation context: policies, nested-loop notes and loop memoization."""

    def __init__(self, policy: ConvergencePolicy = LOOP_POLICY,
                 series_policy: ConvergencePolicy | None = None):
        self.policy = policy
        self.series_policy = series_policy
        self.notes: list[str] = []

    def series(self):
        from .domain import SERIES_POLICY

        return self.series_policy or SERIES_POLICY


def _check_nonneg(value, state):
    if value is not INF and value < 0:
        raise NonNegativityError(
            f"not a non-negative expectation: value {value} at "
            f"state {{{format_state(state)}}}"
        )
    return value


def _wp_eval(program: Program, cont, state: dict, ctx: _Ctx):
    """Value of wp(program, cont) at `state`, with cont a per-state
    continuation returning the post value."""
    if isinstance(program, Skip):
        return cont(state)
    if isinstance(program, Assign):
        value = eval_expr(program.expr, state, ctx.series())
        if value is INF or value.denominator != 1:
            raise EvaluationError(
                f"assignment {program.var} := {value} is not an integer"
            )
        updated = dict(state)
        updated[program.var] = int(value)
        return cont(updated)
    if isinstance(program, Seq):
        first, second = program.first, program.second
        return _wp_eval(first, lambda s: _wp_eval(second, cont, s, ctx), state, ctx)
    if isinstance(program, If):
        p = eval_guard(program.guard, state, ctx.series())
        total = Fraction(0)
        if p > 0:
            total = total + p * _wp_eval(program.then, cont, state, ctx)
        if p < 1:
            total = total + (1 - p) * _wp_eval(program.orelse, cont, state, ctx)
        return total
    if isinstance(program, While):
        value, info = _loop_limit(program.guard, program.body, cont, state, ctx)
        if info.diverged:
            ctx.notes.append(
                f"loop at state {{{format_state(state)}}}: {info.verdict} "
                f"after {info.iterations} iterations (heuristic)"
            )
        return value
    raise TypeError(f"not a program node: {program!r}")


class _LoopIterator:
    """Iterates of a loop's characteristic map from zero, memoized on
    (remaining applications, state)."""

    def __init__(self, guard: ProbGuard, body: Program, post, ctx: _Ctx):
        self.guard = guard
        self.body = body
        self.post = post
        self.ctx = ctx
        self.memo: dict = {}

    def value(self, n: int, state: dict):
        if n == 0:
            return Fraction(0)
        key = (n, state_key(state))
        cached = self.memo.get(key)
        if cached is not None:
            return cached
        p = eval_guard(self.guard, state, self.ctx.series())
        total = Fraction(0)
        if p < 1:
            total = total + (1 - p) * _check_nonneg(self.post(state), state)
        if p > 0:
            inner = _wp_eval(
                self.body, lambda s: self.value(n - 1, s), state, self.ctx
            )
            total = total + p * inner
        self.memo[key] = total
        return total


def _loop_limit(guard: ProbGuard, body: Program, post, state: dict, ctx: _Ctx):
    """Limit of the loop iterates at `state` under the convergence policy."""
    if sys.getrecursionlimit() < _RECURSION_HEADROOM:
        sys.setrecursionlimit(_RECURSION_HEADROOM)
    iterator = _LoopIterator(guard, body, post, ctx)

    def iterates():
        yield Fraction(0)
        n = 1
        while True:
            yield iterator.value(n, state)
            n += 1

    return detect_monotone_limit(iterates(), ctx.policy)


# --------------------------------------------------------------------------
# public operations


def _post_fn(post: Expr, ctx: _Ctx):
    def fn(state):
        return _check_nonneg(eval_expr(post, state, ctx.series()), state)

    return fn


def wp_loop_iterate(guard: ProbGuard, body: Program, post: Expr, state: dict,
                    n: int, policy: ConvergencePolicy = LOOP_POLICY):
    """n-th iterate of the loop's characteristic map on zero, at `state`."""
    ctx = _Ctx(policy)
    if sys.getrecursionlimit() < _RECURSION_HEADROOM:
        sys.setrecursionlimit(_RECURSION_HEADROOM)
    iterator = _LoopIterator(guard, body, _post_fn(post, ctx), ctx)
    return iterator.value(n, state)


def wp_value(program: Program, post: Expr, state: dict,
             policy: ConvergencePolicy = LOOP_POLICY):
    """wp(program, post) at `state` for a non-negative post-expectation."""
    value, _notes = wp_value_traced(program, post, state, policy)
    return value


def wp_value_traced(program: Program, post: Expr, state: dict,
                    policy: ConvergencePolicy = LOOP_POLICY):
    """Like `wp_value` but also returns heuristic notes from loop limits."""
    ctx = _Ctx(policy)
    value = _wp_eval(program, _post_fn(post, ctx), state, ctx)
    return value, ctx.notes


# --------------------------------------------------------------------------
# invariant checks (grid-certified)


@dataclass
class CheckRow:
    state: dict
    lhs: object
    rhs: object
    ok: bool
    n: int | None = None

    def to_json(self) -> dict:
        data = {
            "state": dict(sorted(self.state.items())),
            "lhs": fraction_str(self.lhs),
            "rhs": fraction_str(self.rhs),
            "ok": self.ok,
        }
        if self.n is not None:
            data["n"] = self.n
        return data


@dataclass
class NonNegCheckReport:
    """Outcome of a grid-certified inequality check.

    `passed` is the conjunction of the per-state rows; a pass certifies
    the inequality on the grid only, nothing beyond it.
    """

    description: str
    rows: list[CheckRow] = field(default_factory=list)
    exact: bool = True
    tol: Fraction = Fraction(0)

    @property
    def passed(self) -> bool:
        return all(row.ok for row in self.rows)

    @property
    def failures(self) -> list[CheckRow]:
        return [row for row in self.rows if not row.ok]

    def to_json(self) -> dict:
        return {
            "description": self.description,
            "passed": self.passed,
            "exact": self.exact,
            "rows": [row.to_json() for row in self.rows],
            "failing_states": [
                dict(sorted(row.state.items())) for row in self.failures
            ],
        }


def _leq_with_slack(lhs, rhs, slack: Fraction) -> bool:
    if rhs is INF:
        return True
    if lhs is INF:
        return False
    return lhs <= rhs + slack


def compare_leq_on_grid(description, lhs_expr: Expr, rhs_expr: Expr, states,
                        tol, series_policy, n: int | None = None) -> NonNegCheckReport:
    """Pointwise lhs <= rhs over the grid; exact unless either side
    contains an infinite series, in which case `tol` slack applies."""
    exact = not (
        ast.contains_infinite_series(lhs_expr)
        or ast.contains_infinite_series(rhs_expr)
    )
    slack = Fraction(0) if exact else Fraction(tol)
    report = NonNegCheckReport(description, exact=exact, tol=slack)
    for state in states:
        lhs = eval_expr(lhs_expr, state, series_policy)
        rhs = eval_expr(rhs_expr, state, series_policy)
        report.rows.append(
            CheckRow(state, lhs, rhs, _leq_with_slack(lhs, rhs, slack), n=n)
        )
    return report


def verify_upper_invariant(guard: ProbGuard, body: Program, post: Expr,
                           invariant: Expr, states,
                           tol=Fraction(1, 10**9),
                           series_policy: ConvergencePolicy | None = None) -> NonNegCheckReport:
    """Grid-certify that one application of the loop's characteristic map
    keeps the candidate below itself, which bounds the loop from above."""
    from .domain import SERIES_POLICY

    series_policy = series_policy or SERIES_POLICY
    phi = characteristic_expr(guard, body, post, invariant)
    return compare_leq_on_grid(
        "upper invariant: phi(I) <= I", phi, invariant, states, tol, series_policy
    )


def verify_lower_omega_invariant(guard: ProbGuard, body: Program, post: Expr,
                                 family: Expr, states, n_max: int,
                                 index: str = "n",
                                 tol=Fraction(1, 10**9),
                                 series_policy: ConvergencePolicy | None = None) -> NonNegCheckReport:
    """Grid-certify a lower-bound family H_n: H_0 below the first iterate
    and H_{n+1} below the map applied to H_n, for n up to n_max - 1."""
    from .domain import SERIES_POLICY

    series_policy = series_policy or SERIES_POLICY

    def member(k: int) -> Expr:
        return substitute(family, index, RatConst(Fraction(k)))

    exact = not ast.contains_infinite_series(family)
    slack = Fraction(0) if exact else Fraction(tol)
    report = NonNegCheckReport(
        "lower omega-invariant: H_0 <= phi(0), H_{n+1} <= phi(H_n)",
        exact=exact,
        tol=slack,
    )
    base = characteristic_expr(guard, body, post, ast.ZERO)
    for state in states:
        lhs = eval_expr(member(0), state, series_policy)
        rhs = eval_expr(base, state, series_policy)
        report.rows.append(
            CheckRow(state, lhs, rhs, _leq_with_slack(lhs, rhs, slack), n=0)
        )
    for k in range(n_max):
        phi_k = characteristic_expr(guard, body, post, member(k))
        next_member = member(k + 1)
        for state in states:
            lhs = eval_expr(next_member, state, series_policy)
            rhs = eval_expr(phi_k, state, series_policy)
            report.rows.append(
                CheckRow(state, lhs, rhs, _leq_with_slack(lhs, rhs, slack), n=k + 1)
            )
    return report
