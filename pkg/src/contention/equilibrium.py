"""Best responses and equilibrium checks for the game under intervention."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .game import GameSpec, as_profile, others_idle, success_probability
from .intervention import InterventionRule, TRDRule, target_of
from .search import SearchBudget, find_improvement, maximize_1d

STRICT_TOL = 1e-9


class NonEvaluableError(ValueError):
    """The requested derivative sits on a kink of the intervention rule."""


@dataclass(frozen=True)
class BestResponse:
    """A user's best reply.

    kind is ``"unique"`` (value is the maximizer) or ``"indifferent"``
    (every p_i earns zero; value is the canonical pick).
    """

    kind: str
    value: float
    payoff_at: float

    @property
    def indifferent(self) -> bool:
        return self.kind == "indifferent"


def best_response_trd(
    spec: GameSpec,
    target,
    offset: float,
    i: int,
    p_minus_i,
    current: float | None = None,
    indifference: str = "keep",
) -> BestResponse:
    """Closed-form best reply of user ``i`` (0-based) to the other users'
    probabilities under ``[sum_j p_j/t_j - offset]_0^1``.

    With ``s = sum_{j != i} p_j/t_j - offset`` the reply is ``t_i (1-s)/2``
    for ``-1 <= s < 1`` and ``min(-s t_i, 1)`` for ``s < -1``. For ``s >= 1``
    (or when some other user always transmits) every p_i earns zero; the
    canonical reply is then ``current`` under ``indifference="keep"`` or the
    clipped interior formula under ``indifference="formula"``.
    """
    t = np.asarray(target, dtype=float)
    others = np.asarray(p_minus_i, dtype=float)
    if len(others) != spec.n - 1 or len(t) != spec.n:
        raise ValueError("p_minus_i must hold the other n-1 probabilities")
    t_i = t[i]
    t_others = np.delete(t, i)
    s = float(np.sum(others / t_others) - offset)
    idle = float(np.prod(1.0 - others))

    if idle == 0.0 or s >= 1.0:
        if indifference == "keep" and current is not None:
            value = float(current)
        elif indifference in ("keep", "formula"):
            value = float(np.clip(t_i * (1.0 - s) / 2.0, 0.0, 1.0))
        else:
            raise ValueError(f"unknown indifference convention {indifference!r}")
        return BestResponse("indifferent", value, 0.0)

    if s >= -1.0:
        value = min(t_i * (1.0 - s) / 2.0, 1.0)
    else:
        value = min(-s * t_i, 1.0)
    level = min(max(value / t_i + s, 0.0), 1.0)
    return BestResponse("unique", value, spec.k[i] * value * (1.0 - level) * idle)


def _trd_user_payoff(spec, t, offset, i, p, x):
    """Payoff of user i when it plays each entry of x and others play p."""
    q = np.repeat(p[None, :], len(x), axis=0)
    q[:, i] = x
    h = np.sum(q / t, axis=1) - offset
    return spec.k[i] * x * (1.0 - np.clip(h, 0.0, 1.0)) * others_idle(q)[:, i]


@dataclass
class EquilibriumVerdict:
    """Classification of a profile under TRD intervention.

    kind: ``target``, ``second_class``, ``boundary_pi_equals_1`` or
    ``not_equilibrium``; the last one carries a witness deviation.
    """

    kind: str
    witness_user: int | None = None
    witness_value: float | None = None
    witness_gain: float | None = None

    @property
    def is_equilibrium(self) -> bool:
        return self.kind != "not_equilibrium"

    def to_dict(self) -> dict:
        out = {"class": self.kind, "equilibrium": self.is_equilibrium}
        if self.witness_user is not None:
            out["witness"] = {
                "user": self.witness_user + 1,
                "deviation": self.witness_value,
                "gain": self.witness_gain,
            }
        return out


def _best_gain(spec, t, offset, p):
    """User with the largest payoff gain from a closed-form best reply."""
    best = (None, None, -np.inf)
    for i in range(spec.n):
        br = best_response_trd(spec, t, offset, i, np.delete(p, i), current=p[i])
        now = float(_trd_user_payoff(spec, t, offset, i, p, np.array([p[i]]))[0])
        gain = br.payoff_at - now
        if gain > best[2]:
            best = (i, br.value, gain)
    return best


def is_nash_intervened(spec: GameSpec, target, p_hat) -> EquilibriumVerdict:
    """Classify ``p_hat`` under the TRD rule with the default offset.

    With every entry below 1 the profile is an equilibrium exactly when it
    is the target, or when for every user the others' relative deviations
    sum to at least 2 (intervention stays saturated whatever that user
    does). Profiles with some entry equal to 1 are checked by the
    closed-form best reply of that user.
    """
    t = np.asarray(TRDRule(target).target)
    p = as_profile(p_hat, spec.n)
    offset = float(spec.n)

    if np.max(p) == 1.0:
        ones = np.flatnonzero(p == 1.0)
        if len(ones) >= 2:
            return EquilibriumVerdict("boundary_pi_equals_1")
        user, value, gain = _best_gain(spec, t, offset, p)
        if gain > STRICT_TOL * spec.k[user]:
            return EquilibriumVerdict("not_equilibrium", user, value, gain)
        return EquilibriumVerdict("boundary_pi_equals_1")

    if np.array_equal(p, t):
        return EquilibriumVerdict("target")
    rel = (p - t) / t
    others_sum = rel.sum() - rel
    if np.all(others_sum >= 2.0):
        return EquilibriumVerdict("second_class")
    user, value, gain = _best_gain(spec, t, offset, p)
    return EquilibriumVerdict("not_equilibrium", user, value, gain)


def deviation_scan(
    spec: GameSpec,
    rule: InterventionRule,
    p,
    step: float = 1e-3,
    tol: float = STRICT_TOL,
) -> tuple[int, float, float] | None:
    """Numeric unilateral-deviation search for an arbitrary rule.

    Returns ``(user, deviation, gain)`` for the first user found with a gain
    above ``tol`` (per unit of valuation), or None.
    """
    p = as_profile(p, spec.n)
    for i in range(spec.n):
        def f(x, i=i):
            q = np.repeat(p[None, :], len(x), axis=0)
            q[:, i] = x
            return success_probability(q)[:, i] * (1.0 - np.asarray(rule.evaluate(q)))

        now = float(f(np.array([p[i]]))[0])
        x, fx = maximize_1d(f, 0.0, 1.0, step)
        if fx - now > tol:
            return i, x, spec.k[i] * (fx - now)
    return None


def is_stackelberg(spec: GameSpec, rule: InterventionRule, p_hat) -> bool:
    """The pair (rule, p_hat) is a Stackelberg equilibrium: users play the
    target, the manager stays silent there, and nobody gains by deviating."""
    p = as_profile(p_hat, spec.n)
    t = target_of(rule)
    if p.shape != t.shape or not np.array_equal(p, t):
        return False
    if float(rule.evaluate(p)) != 0.0:
        return False
    if isinstance(rule, TRDRule) and rule.offset == spec.n:
        return is_nash_intervened(spec, rule.target, p).is_equilibrium
    return deviation_scan(spec, rule, p) is None


def pair_coalition_proof(target, i: int, j: int) -> bool:
    """Two users cannot jointly gain under TRD intervention iff their
    target probabilities sum to at most 1."""
    if i == j:
        raise ValueError("a pair coalition needs two distinct users")
    t = TRDRule(target).target
    return t[i] + t[j] <= 1.0


@dataclass
class CoalitionVerdict:
    coalition: tuple[int, ...]
    proof: bool
    budget: SearchBudget
    deviation: np.ndarray | None = None
    payoffs_before: np.ndarray | None = field(default=None, repr=False)
    payoffs_after: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "coalition": [i + 1 for i in self.coalition],
            "proof": self.proof,
            "budget": self.budget.to_dict(),
        }
        if self.deviation is not None:
            out["deviation"] = self.deviation.tolist()
            out["payoffs_before"] = self.payoffs_before.tolist()
            out["payoffs_after"] = self.payoffs_after.tolist()
        return out


def coalition_payoffs(spec: GameSpec, rule: InterventionRule, target, members: Sequence[int]):
    """Vectorized payoffs of ``members`` when they play x and the rest stay
    at the target."""
    t = np.asarray(target, dtype=float)
    members = list(members)
    k = spec.kvec[members]

    def payoffs(x: np.ndarray) -> np.ndarray:
        q = np.repeat(t[None, :], len(x), axis=0)
        q[:, members] = x
        g = np.asarray(rule.evaluate(q)).reshape(-1, 1)
        return k * success_probability(q)[:, members] * (1.0 - g)

    return payoffs


def find_coalition_deviation(
    spec: GameSpec,
    target,
    coalition: Sequence[int],
    search: SearchBudget | None = None,
) -> CoalitionVerdict:
    """Search for a joint deviation of ``coalition`` from the target under
    TRD intervention that no member dislikes and some member strictly likes.

    ``proof`` means nothing was found within the budget.
    """
    members = tuple(sorted(set(int(i) for i in coalition)))
    if not members:
        raise ValueError("coalition is empty")
    rule = TRDRule(target)
    t = np.asarray(rule.target)
    budget = search or (SearchBudget(grid=201, starts=2) if len(members) <= 2 else SearchBudget(grid=41))
    payoffs = coalition_payoffs(spec, rule, t, members)
    base = payoffs(t[None, list(members)])[0]
    x = find_improvement(
        payoffs, base, len(members), budget, scale=spec.kvec[list(members)], start=t[list(members)]
    )
    if x is None:
        return CoalitionVerdict(members, True, budget)
    return CoalitionVerdict(members, False, budget, x, base, payoffs(x[None, :])[0])


def all_coalitions(n: int):
    for size in range(1, n + 1):
        yield from itertools.combinations(range(n), size)


def ei_dominance_condition(target, i: int) -> bool:
    """``1 + n - 1/t_i < t_i * prod_{j != i}(1 - t_j)``, taken as printed as
    the condition for the corner profile e_i to be dominated by the target."""
    t = np.asarray(TRDRule(target).target)
    n = len(t)
    return bool(1.0 + n - 1.0 / t[i] < t[i] * np.prod(np.delete(1.0 - t, i)))


@dataclass(frozen=True)
class Conjecture:
    """Trimmed-linear belief ``f(p_i) = [a - b p_i]_0^1`` about the
    observed idle share ``(1 - p_0) prod_{j != i}(1 - p_j)``."""

    a: float
    b: float

    def __post_init__(self):
        if self.a < 0 or self.b <= 0:
            raise ValueError("conjectures need a >= 0 and b > 0")

    def __call__(self, x):
        return np.clip(self.a - self.b * np.asarray(x, dtype=float), 0.0, 1.0)

    def slope(self, x: float) -> float:
        v = self.a - self.b * x
        return -self.b if 0.0 < v < 1.0 else 0.0


@dataclass(frozen=True)
class PointConjecture:
    """Belief that matches the observation at one point and is zero elsewhere."""

    at: float
    value: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x == self.at, self.value, 0.0)


def observed_share(rule: InterventionRule, p, i: int) -> float:
    """``(1 - g(p)) prod_{j != i}(1 - p_j)`` as seen by user i."""
    p = np.asarray(p, dtype=float)
    return float((1.0 - float(rule.evaluate(p))) * np.prod(np.delete(1.0 - p, i)))


def is_conjectural_equilibrium(
    spec: GameSpec,
    rule: InterventionRule,
    p_hat,
    conjectures: Sequence[Callable],
    opt_tol: float = 1e-8,
    match_tol: float = 1e-9,
) -> bool:
    """Each user's probability is optimal against its own conjecture and the
    conjecture agrees with what the user observes at the profile."""
    p = as_profile(p_hat, spec.n)
    if len(conjectures) != spec.n:
        raise ValueError(f"need {spec.n} conjectures, got {len(conjectures)}")
    for i, f in enumerate(conjectures):
        at = float(np.asarray(f(np.array([p[i]])))[0])
        if abs(at - observed_share(rule, p, i)) > match_tol:
            return False
        own = spec.k[i] * p[i] * at
        _, best = maximize_1d(lambda x, f=f, i=i: spec.k[i] * x * f(x), 0.0, 1.0, 1e-4)
        if best > own + opt_tol:
            return False
    return True


def conjecture_from_rule(rule: InterventionRule, p_hat, i: int, side: str = "central", h: float = 1e-6) -> Conjecture:
    """Trimmed-linear conjecture tangent to what user i actually faces at p_hat."""
    p = np.asarray(p_hat, dtype=float)
    value = observed_share(rule, p, i)
    slope = _rule_slope(rule, p, i, side, h) * np.prod(np.delete(1.0 - p, i))
    b = slope if slope > 0 else 1e-12
    return Conjecture(a=value + b * p[i], b=b)


def _rule_slope(rule, p, i, side, h):
    def g_at(x):
        q = p.copy()
        q[i] = x
        return float(rule.evaluate(q))

    right = (g_at(p[i] + h) - g_at(p[i])) / h
    left = (g_at(p[i]) - g_at(p[i] - h)) / h
    if side == "right":
        return right
    if side == "left":
        return left
    if abs(right - left) > 1e-3:
        raise NonEvaluableError(
            f"intervention rule is kinked at p_{i + 1}={p[i]} (one-sided slopes {left:.6g}, {right:.6g})"
        )
    return (g_at(p[i] + h) - g_at(p[i] - h)) / (2 * h)


def is_linearly_consistent(
    rule: InterventionRule,
    p_hat,
    i: int,
    conj: Conjecture,
    side: str = "central",
    h: float = 1e-6,
    tol: float = 1e-4,
) -> bool:
    """Conjecture matches the true response in value and first derivative.

    ``side="central"`` refuses kinks; ``"right"``/``"left"`` use one-sided
    differences, e.g. the right derivative at the target where upward
    deviations are the ones being punished.
    """
    p = np.asarray(p_hat, dtype=float)
    idle = float(np.prod(np.delete(1.0 - p, i)))
    true_value = observed_share(rule, p, i)
    true_slope = -_rule_slope(rule, p, i, side, h) * idle
    x = p[i]
    if side == "right":
        conj_slope = (float(conj(x + h)) - float(conj(x))) / h
    elif side == "left":
        conj_slope = (float(conj(x)) - float(conj(x - h))) / h
    else:
        conj_slope = (float(conj(x + h)) - float(conj(x - h))) / (2 * h)
    return abs(float(conj(x)) - true_value) <= 1e-9 and abs(conj_slope - true_slope) <= tol
