"""Exact value domain: extended non-negative rationals and witness pairs.

A per-state analysis result is an `IWValue`: a rational `first` component
(the quantity of interest) paired with a non-negative `witness` bound on
its absolute value.  A finite witness certifies that the first component
is the absolutely-convergent expected value; an infinite witness means no
such certificate exists, and the first component carries no information.
The canonical representative fixes `first = 0` whenever the witness is
infinite, which turns equivalence of results into structural equality.

The module also houses the shared convergence policy used to sum series
and to detect limits of monotone loop iterations.  Its verdicts for
infinite objects are heuristic and flagged as such.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import EvaluationError, LimitUndetectedError


# --------------------------------------------------------------------------
# the extended non-negative domain: Fraction or INF


class Infinity:
    """Absorbing infinity for the non-negative domain (0 * inf is an error)."""

    _instance = None
    __slots__ = ()

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "inf"

    # comparisons: INF is strictly above every finite value
    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    # arithmetic
    def __add__(self, other):
        return self

    __radd__ = __add__

    def __mul__(self, other):
        if other is self:
            return self
        if other == 0:
            raise EvaluationError("0 * inf is undefined")
        if other < 0:
            raise EvaluationError("inf cannot be scaled by a negative value")
        return self

    __rmul__ = __mul__

    def __truediv__(self, other):
        if other is self:
            raise EvaluationError("inf / inf is undefined")
        if other <= 0:
            raise EvaluationError("inf divided by a non-positive value")
        return self

    def __rtruediv__(self, other):
        raise EvaluationError("division by inf is undefined")

    def __sub__(self, other):
        raise EvaluationError("subtraction involving inf is undefined")

    __rsub__ = __sub__

    def __neg__(self):
        raise EvaluationError("negation of inf is undefined")

    def __abs__(self):
        return self

    def __hash__(self):
        return hash("preexp-inf")


INF = Infinity()

ExtNonNeg = Fraction | Infinity  # type alias for signatures


def is_finite(value) -> bool:
    return value is not INF


def fraction_str(value) -> str:
    """Exact decimal-free serialization: "p/q", an integer string, or "inf"."""
    if value is INF:
        return "inf"
    return str(Fraction(value))


def parse_fraction_str(text: str):
    if text.strip() == "inf":
        return INF
    return Fraction(text)


# --------------------------------------------------------------------------
# program states


def state_key(state: dict) -> tuple:
    """Hashable, order-independent key for a variable valuation."""
    return tuple(sorted(state.items()))


def state_from_key(key: tuple) -> dict:
    return dict(key)


def format_state(state: dict) -> str:
    return ", ".join(f"{k}={v}" for k, v in sorted(state.items()))


# --------------------------------------------------------------------------
# integrability-witnessing values


@dataclass(frozen=True)
class IWValue:
    """One (first, witness) pair at a single state.

    Invariant: |first| <= witness whenever the witness is finite.  Pairs
    with an infinite witness may carry any first component; use
    `canonical()` to normalize it to zero.
    """

    first: Fraction
    witness: ExtNonNeg

    def __post_init__(self):
        if self.witness is not INF:
            if self.witness < 0:
                raise EvaluationError(f"negative witness {self.witness}")
            if abs(self.first) > self.witness:
                raise EvaluationError(
                    f"|first| = {abs(self.first)} exceeds witness {self.witness}"
                )

    def canonical(self) -> "IWValue":
        if self.witness is INF and self.first != 0:
            return IWValue(Fraction(0), INF)
        return self

    @property
    def is_canonical(self) -> bool:
        return self.witness is not INF or self.first == 0

    def to_json(self) -> dict:
        return {"first": fraction_str(self.first), "witness": fraction_str(self.witness)}

    @staticmethod
    def from_json(data: dict) -> "IWValue":
        witness = parse_fraction_str(data["witness"])
        return IWValue(Fraction(data["first"]), witness)


def iw(first, witness) -> IWValue:
    if witness is not INF:
        witness = Fraction(witness)
    return IWValue(Fraction(first), witness)


IW_ZERO = IWValue(Fraction(0), Fraction(0))


def iw_add(a: IWValue, b: IWValue) -> IWValue:
    """(f, g) + (f', g') = (f + f', g + g'), re-canonicalized."""
    witness = a.witness + b.witness
    if witness is INF:
        return IWValue(Fraction(0), INF)
    return IWValue(a.first + b.first, witness)


def iw_scale(c, a: IWValue) -> IWValue:
    """c * (f, g) = (c*f, |c|*g) for a rational constant c."""
    c = Fraction(c)
    if a.witness is INF:
        if c == 0:
            raise EvaluationError("0 * inf is undefined; skip zero-weight branches")
        return IWValue(Fraction(0), INF)
    return IWValue(c * a.first, abs(c) * a.witness)


def iw_mul(h, a: IWValue) -> IWValue:
    """Pointwise weighting h * (f, g) = (h*f, |h|*g); h is the weight's
    value at the current state, so this coincides with `iw_scale`."""
    return iw_scale(h, a)


def iw_leq(a: IWValue, b: IWValue) -> bool:
    """The quasi-order at one state: comparisons are vacuous wherever the
    right witness is infinite."""
    if b.witness is INF:
        return True
    if a.witness is INF:
        return False
    return a.first <= b.first and a.witness <= b.witness


def iw_equiv(a: IWValue, b: IWValue) -> bool:
    """Kernel of the quasi-order: first components are ignored when both
    witnesses are infinite."""
    if a.witness is INF and b.witness is INF:
        return True
    if (a.witness is INF) != (b.witness is INF):
        return False
    return a.first == b.first and a.witness == b.witness


def iw_sup(values) -> IWValue:
    """Least upper bound of a non-empty finite set of values."""
    values = list(values)
    if not values:
        raise ValueError("supremum of an empty set")
    witness = Fraction(0)
    for v in values:
        if v.witness is INF:
            return IWValue(Fraction(0), INF)
        witness = max(witness, v.witness)
    first = max(v.first for v in values)
    return IWValue(first, witness)


# --------------------------------------------------------------------------
# convergence policy and detection


@dataclass(frozen=True)
class ConvergencePolicy:
    """Heuristic stabilization policy for series and iterate sequences.

    Convergence requires `window` consecutive increments below `tol`
    together with a geometric tail certificate (last increment ratio < 1
    and the implied tail below `tol`); a window of exactly-zero increments
    counts as exact convergence.  Divergence is declared when a value
    exceeds `threshold` or when positive increments fail to decrease for a
    whole window.  Anything else within the budget is "no verdict".
    """

    tol: Fraction = Fraction(1, 10**12)
    threshold: Fraction = Fraction(10**9)
    window: int = 8
    max_terms: int = 10_000


SERIES_POLICY = ConvergencePolicy()

# Loop iterations default to a looser tolerance and a small budget; the
# budget cap doubles as the divergence heuristic for slowly growing sums.
LOOP_POLICY = ConvergencePolicy(tol=Fraction(1, 10**9), max_terms=200)


CONVERGED = "converged"
CONVERGED_EXACT = "converged-exact"
DIVERGED_THRESHOLD = "diverged-threshold"
DIVERGED_TREND = "diverged-trend"
NO_VERDICT = "no-verdict"
REACHED_INF = "reached-inf"


@dataclass
class ConvergenceInfo:
    verdict: str
    iterations: int
    last_increment: Fraction | None = None
    heuristic: bool = False

    @property
    def diverged(self) -> bool:
        return self.verdict in (DIVERGED_THRESHOLD, DIVERGED_TREND, NO_VERDICT, REACHED_INF)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "iterations": self.iterations,
            "last_increment": None
            if self.last_increment is None
            else fraction_str(self.last_increment),
            "heuristic": self.heuristic,
        }


class _IncrementTracker:
    """Shared verdict logic over a stream of partial values."""

    def __init__(self, policy: ConvergencePolicy):
        self.policy = policy
        self.increments: list[Fraction] = []
        self.count = 0

    def feed(self, value, previous) -> str | None:
        """Record one more partial value; return a verdict or None."""
        pol = self.policy
        self.count += 1
        if value is INF:
            return REACHED_INF
        if value > pol.threshold:
            return DIVERGED_THRESHOLD
        if previous is None:
            return None
        inc = abs(value - previous)
        self.increments.append(inc)
        window = self.increments[-pol.window:]
        if len(window) < pol.window:
            return None
        if all(d == 0 for d in window):
            return CONVERGED_EXACT
        if all(d < pol.tol for d in window):
            prev_inc, last_inc = self.increments[-2], self.increments[-1]
            if last_inc == 0:
                return CONVERGED
            if prev_inc > 0 and last_inc < prev_inc:
                ratio = last_inc / prev_inc
                if last_inc * ratio / (1 - ratio) < pol.tol:
                    return CONVERGED
        if (
            all(b >= a for a, b in zip(window, window[1:]))
            and window[-1] > 0
            and window[-1] >= pol.tol
        ):
            return DIVERGED_TREND
        return None


def sum_series(terms, policy: ConvergencePolicy = SERIES_POLICY):
    """Sum a (possibly infinite) term stream under the stabilization policy.

    Returns (value, ConvergenceInfo).  The value is INF on a divergence
    verdict.  `terms` is any iterable of Fractions (or INF, which makes the
    sum INF immediately).  Raises LimitUndetectedError when the budget runs
    out without a verdict.
    """
    tracker = _IncrementTracker(policy)
    total = Fraction(0)
    previous = None
    for n, term in enumerate(terms):
        if n >= policy.max_terms:
            raise LimitUndetectedError(
                f"series did not stabilize within {policy.max_terms} terms"
            )
        if term is INF:
            return INF, ConvergenceInfo(REACHED_INF, n + 1)
        total += term
        verdict = tracker.feed(total, previous)
        previous = total
        if verdict in (CONVERGED, CONVERGED_EXACT):
            return total, ConvergenceInfo(verdict, n + 1, tracker.increments[-1])
        if verdict in (DIVERGED_THRESHOLD, DIVERGED_TREND):
            return INF, ConvergenceInfo(
                verdict, n + 1, tracker.increments[-1] if tracker.increments else None,
                heuristic=True,
            )
        if verdict == REACHED_INF:
            return INF, ConvergenceInfo(REACHED_INF, n + 1)
    # finite stream exhausted without a verdict: its sum is exact
    return total, ConvergenceInfo(CONVERGED_EXACT, tracker.count)


def detect_monotone_limit(values, policy: ConvergencePolicy):
    """Limit of a non-decreasing value stream (loop iterates from zero).

    Returns (value, ConvergenceInfo); the value is INF whenever the verdict
    is a divergence or the budget ran out (`no-verdict`, flagged heuristic).
    """
    tracker = _IncrementTracker(policy)
    previous = None
    last = Fraction(0)
    for n, value in enumerate(values):
        if n >= policy.max_terms:
            return INF, ConvergenceInfo(
                NO_VERDICT, n, tracker.increments[-1] if tracker.increments else None,
                heuristic=True,
            )
        if value is INF:
            # monotone sequences stay at INF once reached: exact limit
            return INF, ConvergenceInfo(REACHED_INF, n + 1)
        verdict = tracker.feed(value, previous)
        previous = last = value
        if verdict in (CONVERGED, CONVERGED_EXACT):
            return last, ConvergenceInfo(verdict, n + 1, tracker.increments[-1])
        if verdict in (DIVERGED_THRESHOLD, DIVERGED_TREND):
            return INF, ConvergenceInfo(
                verdict, n + 1, tracker.increments[-1] if tracker.increments else None,
                heuristic=True,
            )
    return INF, ConvergenceInfo(
        NO_VERDICT, tracker.count, tracker.increments[-1] if tracker.increments else None,
        heuristic=True,
    )


def stabilized_limit(values, policy: ConvergencePolicy):
    """Limit of a not-necessarily-monotone value stream.

    Convergence: a window of small increments (with the tail certificate),
    or strictly alternating, shrinking increments, in which case the
    midpoint of the last two values is returned with certified error below
    half the last increment.  Divergence verdicts as in the policy.
    Raises LimitUndetectedError when the stream ends without a verdict.
    """
    pol = policy
    history: list[Fraction] = []
    tracker = _IncrementTracker(policy)
    previous = None
    for n, value in enumerate(values):
        if n >= pol.max_terms:
            break
        if value is INF:
            return INF, ConvergenceInfo(REACHED_INF, n + 1)
        verdict = tracker.feed(value, previous)
        previous = value
        history.append(value)
        if verdict in (CONVERGED, CONVERGED_EXACT):
            return value, ConvergenceInfo(verdict, n + 1, tracker.increments[-1])
        if verdict in (DIVERGED_THRESHOLD, DIVERGED_TREND):
            return INF, ConvergenceInfo(
                verdict, n + 1, tracker.increments[-1] if tracker.increments else None,
                heuristic=True,
            )
        # alternating-series midpoint: signed increments alternate and shrink
        if len(history) > pol.window:
            signed = [b - a for a, b in zip(history[-pol.window - 1:], history[-pol.window:])]
            if (
                all(d != 0 for d in signed)
                and all(a * b < 0 for a, b in zip(signed, signed[1:]))
                and all(abs(b) < abs(a) for a, b in zip(signed, signed[1:]))
                and abs(signed[-1]) / 2 < pol.tol
            ):
                midpoint = (history[-1] + history[-2]) / 2
                return midpoint, ConvergenceInfo(
                    CONVERGED, n + 1, abs(signed[-1]), heuristic=True
                )
    raise LimitUndetectedError("sequence did not stabilize within its budget")


def iw_limit(values, policy: ConvergencePolicy = LOOP_POLICY):
    """Limit of a finite prefix of an IWValue sequence.

    The witness components decide: if they stabilize, the limit is
    (limit of firsts, limit of witnesses); if they exceed the divergence
    threshold or never stabilize, the canonical (0, INF) is returned with
    a heuristic divergence flag.  Stabilized witnesses with first
    components that fail to stabilize raise LimitUndetectedError.
    """
    values = [v.canonical() for v in values]
    if not values:
        raise ValueError("limit of an empty sequence")

    def witnesses():
        for v in values:
            yield v.witness

    bounded = ConvergencePolicy(
        tol=policy.tol,
        threshold=policy.threshold,
        window=policy.window,
        max_terms=min(policy.max_terms, len(values)),
    )
    try:
        w_limit, w_info = stabilized_limit(witnesses(), bounded)
    except LimitUndetectedError:
        return IWValue(Fraction(0), INF), ConvergenceInfo(
            NO_VERDICT, len(values), heuristic=True
        )
    if w_limit is INF:
        return IWValue(Fraction(0), INF), w_info
    firsts = [v.first for v in values]
    f_limit, f_info = stabilized_limit(iter(firsts), bounded)  # may raise
    if f_limit is INF:
        raise LimitUndetectedError("first components escaped to infinity")
    info = ConvergenceInfo(
        w_info.verdict,
        max(w_info.iterations, f_info.iterations),
        f_info.last_increment,
        heuristic=w_info.heuristic or f_info.heuristic,
    )
    return IWValue(f_limit, max(w_limit, abs(f_limit))), info


# --------------------------------------------------------------------------
# report row shared by the engines


@dataclass
class StateResult:
    state: dict
    value: IWValue
    info: ConvergenceInfo | None = None

    def to_json(self) -> dict:
        data = {"state": dict(sorted(self.state.items())), **self.value.to_json()}
        if self.info is not None:
            data["diverged"] = self.info.diverged
            data["iterations"] = self.info.iterations
            data["heuristic"] = self.info.heuristic
        return data


@dataclass
class IWReport:
    """Per-state results plus convergence metadata.

    Invariant: a set divergence flag implies the reported witness is INF.
    """

    results: list[StateResult] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "results": [r.to_json() for r in self.results],
            "notes": list(self.notes),
        }
