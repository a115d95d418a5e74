"""Closed-form sample-complexity calculators.

Every expression is an O(.)-shape evaluation with constants taken as 1 and
natural logarithms throughout; outputs are for comparing growth shapes, not
literal step counts.  Where a bound involves the truncated-horizon ball
volume, the radius^A reading of the volume is used and flagged on the
report entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError
from .submdp import log_radius, overlap_target, truncation_radius

BASE_FLAGS = ("constants_suppressed", "natural_log")
SATURATION_CAP = 1e18


@dataclass
class BoundInputs:
    epsilon: float
    delta: float
    gamma: float
    num_states: int
    num_actions: int

    def __post_init__(self):
        for name in ("epsilon", "delta", "gamma"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise DomainError(f"{name} must be in (0, 1), got {v}")
        if self.num_states < 1 or self.num_actions < 1:
            raise DomainError("num_states and num_actions must be >= 1")


def _ball_volume(inp: BoundInputs) -> float:
    """radius^A with the raw truncation horizon as radius."""
    r = log_radius(inp.epsilon, inp.gamma)
    try:
        v = r**inp.num_actions
    except OverflowError:
        return SATURATION_CAP
    return min(v, SATURATION_CAP) if math.isfinite(v) else SATURATION_CAP


def q_lower_bound(inp: BoundInputs) -> int:
    """Batch size per attempted update keeping batched Q estimates within
    epsilon of their expectation, with confidence union-bounded over every
    possible update attempt:

        ceil( ln( (2SA/eps) ln(2/delta) (1/radius^A + A/(eps(1-gamma))) )
              / (2 eps^2 (1-gamma)^2) )
    """
    e, d, g = inp.epsilon, inp.delta, inp.gamma
    s, a = inp.num_states, inp.num_actions
    inner = (2.0 * s * a / e) * math.log(2.0 / d) * (
        1.0 / _ball_volume(inp) + a / (e * (1.0 - g))
    )
    if inner <= 1.0:
        return 1  # degenerate smallness; flagged as saturated in reports
    return math.ceil(math.log(inner) / (2.0 * e * e * (1.0 - g) ** 2))


def q_lower_bound_saturated(inp: BoundInputs) -> bool:
    e, d, g = inp.epsilon, inp.delta, inp.gamma
    inner = (2.0 * inp.num_states * inp.num_actions / e) * math.log(2.0 / d) * (
        1.0 / _ball_volume(inp) + inp.num_actions / (e * (1.0 - g))
    )
    return inner <= 1.0


def overlap_bound(inp: BoundInputs) -> int:
    """Per-state estimate count for fusion accuracy: ceil((2/eps) ln(2S/delta))."""
    return overlap_target(inp.epsilon, inp.delta, inp.num_states)


def submdp_count_bound(inp: BoundInputs) -> int:
    """Sub-problems needed to cover the state space with enough overlap:
    max(1, ceil( (2S / (eps radius^A)) ln(2/delta) ))."""
    value = (2.0 * inp.num_states / (inp.epsilon * _ball_volume(inp))) * math.log(
        2.0 / inp.delta
    )
    return max(1, math.ceil(value))


def submdp_sample_complexity(inp: BoundInputs) -> float:
    """Samples to learn one sub-problem to eps accuracy:
    (A B / (eps^2 (1-gamma)^3)) ln(A B / (delta (1-gamma))) ln(1/eps),
    where B = radius^A is the sub-problem size bound."""
    e, d, g = inp.epsilon, inp.delta, inp.gamma
    a = inp.num_actions
    b = _ball_volume(inp)
    lead = a * b / (e * e * (1.0 - g) ** 3)
    return lead * math.log(a * b / (d * (1.0 - g))) * math.log(1.0 / e)


def naive_total_bound(inp: BoundInputs) -> float:
    """One sub-problem per state: S x submdp_sample_complexity."""
    return inp.num_states * submdp_sample_complexity(inp)


def pdql_total_bound(inp: BoundInputs) -> float:
    """Headline total: (SA/(eps^3 (1-gamma)^3)) ln(A/(delta(1-gamma)))
    ln(1/eps) ln(1/delta)."""
    e, d, g = inp.epsilon, inp.delta, inp.gamma
    s, a = inp.num_states, inp.num_actions
    lead = s * a / (e**3 * (1.0 - g) ** 3)
    return lead * math.log(a / (d * (1.0 - g))) * math.log(1.0 / e) * math.log(1.0 / d)


def pdql_total_compositional(inp: BoundInputs) -> float:
    """Cross-check form: sub-problem count x per-sub-problem complexity.

    Differs from pdql_total_bound by simplification steps; both are exposed
    rather than reconciled.
    """
    return submdp_count_bound(inp) * submdp_sample_complexity(inp)


# ---------------------------------------------------------------------------
# Published-bound comparison rows
# ---------------------------------------------------------------------------


def _delayed_q(inp):
    e, d, g = inp.epsilon, inp.delta, inp.gamma
    sa = inp.num_states * inp.num_actions
    return (sa / (e**4 * (1 - g) ** 8)) * math.log(sa / (d * e * (1 - g))) * \
        math.log(1 / d) * math.log(1 / (e * (1 - g)))


def _speedy_q(inp):
    e, d, g = inp.epsilon, inp.delta, inp.gamma
    sa = inp.num_states * inp.num_actions
    return (sa / (e**2 * (1 - g) ** 4)) * math.log(sa / d)


def _vrql(inp):
    e, d, g = inp.epsilon, inp.delta, inp.gamma
    sa = inp.num_states * inp.num_actions
    return (sa / (e**2 * (1 - g) ** 3)) * math.log(sa / (d * (1 - g))) * math.log(1 / e)


def _q_ucb(inp):
    e, d, g = inp.epsilon, inp.delta, inp.gamma
    sa = inp.num_states * inp.num_actions
    return (sa / (e**2 * (1 - g) ** 7)) * math.log(sa) * math.log(1 / d) * \
        math.log(1 / e) * math.log(1 / (1 - g))


def _ucb_multistage(inp):
    e, d, g = inp.epsilon, inp.delta, inp.gamma
    sa = inp.num_states * inp.num_actions
    return (sa / (e**2 * (1 - g) ** 5.5)) * math.log(sa) * math.log(1 / d) * \
        math.log(1 / (e * (1 - g)))


def _phased_q(inp):
    e, d = inp.epsilon, inp.delta
    sa = inp.num_states * inp.num_actions
    return (sa / e**2) * math.log((sa / d) * math.log(1 / e)) * math.log(1 / e)


COMPARISON_ROWS = (
    ("delayed_q", _delayed_q, "SA/(e^4(1-g)^8) ln(SA/(d e (1-g))) ln(1/d) ln(1/(e(1-g)))"),
    ("speedy_q", _speedy_q, "SA/(e^2(1-g)^4) ln(SA/d)"),
    ("vrql", _vrql, "SA/(e^2(1-g)^3) ln(SA/(d(1-g))) ln(1/e)"),
    ("q_ucb", _q_ucb, "SA/(e^2(1-g)^7) ln(SA) ln(1/d) ln(1/e) ln(1/(1-g))"),
    ("ucb_multistage", _ucb_multistage, "SA/(e^2(1-g)^5.5) ln(SA) ln(1/d) ln(1/(e(1-g)))"),
    ("phased_q", _phased_q, "SA/e^2 ln((SA/d) ln(1/e)) ln(1/e)"),
    ("pdql", pdql_total_bound, "SA/(e^3(1-g)^3) ln(A/(d(1-g))) ln(1/e) ln(1/d)"),
)


@dataclass
class BoundEntry:
    bound_id: str
    value: float
    formula: str
    flags: tuple


@dataclass
class BoundReport:
    inputs: BoundInputs
    entries: list = field(default_factory=list)

    def add(self, bound_id, value, formula, extra_flags=()):
        flags = BASE_FLAGS + tuple(extra_flags)
        if value >= SATURATION_CAP:
            flags = flags + ("saturated",)
        self.entries.append(BoundEntry(bound_id, float(value), formula, flags))

    def value(self, bound_id: str) -> float:
        for e in self.entries:
            if e.bound_id == bound_id:
                return e.value
        raise KeyError(bound_id)

    def as_csv(self) -> str:
        lines = ["bound_id,value,formula,flags"]
        for e in self.entries:
            lines.append(f'{e.bound_id},{e.value:.10g},"{e.formula}",{";".join(e.flags)}')
        return "\n".join(lines) + "\n"

    def as_text(self) -> str:
        wid = max(len(e.bound_id) for e in self.entries)
        lines = [f"{'bound':{wid}}  {'value':>14}  formula"]
        for e in self.entries:
            mark = " [saturated]" if "saturated" in e.flags else ""
            lines.append(f"{e.bound_id:{wid}}  {e.value:>14.6g}  {e.formula}{mark}")
        return "\n".join(lines) + "\n"


RADIUS_FLAG = ("radius_power_interpretation",)


def table_bounds(inp: BoundInputs) -> BoundReport:
    """The published-algorithm comparison rows only."""
    report = BoundReport(inp)
    for bound_id, fn, formula in COMPARISON_ROWS:
        report.add(bound_id, fn(inp), formula)
    return report


def full_report(inp: BoundInputs) -> BoundReport:
    """Every calculator in one labeled report."""
    report = BoundReport(inp)
    report.add("truncation_radius", truncation_radius(inp.epsilon, inp.gamma),
               "ceil(log_gamma(eps(1-gamma)))")
    report.add("q_sampling", q_lower_bound(inp),
               "ceil(ln((2SA/e) ln(2/d) (1/r^A + A/(e(1-g)))) / (2e^2(1-g)^2))",
               RADIUS_FLAG + (("saturated",) if q_lower_bound_saturated(inp) else ()))
    report.add("overlap", overlap_bound(inp), "ceil((2/e) ln(2S/d))")
    report.add("submdp_count", submdp_count_bound(inp),
               "max(1, ceil((2S/(e r^A)) ln(2/d)))", RADIUS_FLAG)
    report.add("submdp_samples", submdp_sample_complexity(inp),
               "(A r^A/(e^2(1-g)^3)) ln(A r^A/(d(1-g))) ln(1/e)", RADIUS_FLAG)
    report.add("naive_total", naive_total_bound(inp),
               "S x submdp_samples", RADIUS_FLAG)
    report.add("pdql_total_compositional", pdql_total_compositional(inp),
               "submdp_count x submdp_samples", RADIUS_FLAG)
    for bound_id, fn, formula in COMPARISON_ROWS:
        report.add(bound_id, fn(inp), formula)
    return report
