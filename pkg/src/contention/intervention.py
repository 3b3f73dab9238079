"""Manager intervention rules and the payoffs they induce.

A rule maps the users' profile to the manager's own transmission
probability. All rules are immutable and evaluate batches of profiles
along the leading axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .game import GameSpec, as_profile, idle_probability, payoff


class RuleError(ValueError):
    """Invalid intervention-rule parameters."""


def _interior_target(target) -> tuple[float, ...]:
    t = tuple(float(v) for v in np.atleast_1d(np.asarray(target, dtype=float)))
    if not t:
        raise RuleError("target profile is empty")
    if not all(0.0 < v < 1.0 for v in t):
        raise RuleError(f"target entries must lie strictly inside (0, 1), got {t}")
    return t


def trd(target, p) -> np.ndarray | float:
    """Total relative deviation ``sum_i (p_i - t_i) / t_i`` of p from the target."""
    t = np.asarray(_interior_target(target))
    p = as_profile(p, len(t))
    h = np.sum(p / t, axis=-1) - len(t)
    return float(h) if np.ndim(h) == 0 else h


def _clamp(x):
    out = np.clip(x, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TRDRule:
    """Trimmed TRD intervention ``[sum_i p_i/t_i - offset]_0^1``.

    With the default offset (the user count) this is the rule that makes the
    target a Stackelberg equilibrium; other offsets give the adaptive rules
    used while steering users out of saturated equilibria.
    """

    target: tuple[float, ...]
    offset: float | None = None

    variant = "trd"

    def __post_init__(self):
        object.__setattr__(self, "target", _interior_target(self.target))
        offset = len(self.target) if self.offset is None else self.offset
        object.__setattr__(self, "offset", float(offset))

    @property
    def n(self) -> int:
        return len(self.target)

    def deviation(self, p):
        p = as_profile(p, self.n)
        h = np.sum(p / np.asarray(self.target), axis=-1) - self.offset
        return float(h) if np.ndim(h) == 0 else h

    def evaluate(self, p):
        return _clamp(self.deviation(p))

    def to_dict(self) -> dict:
        return {"variant": self.variant, "target": list(self.target), "offset": self.offset}


@dataclass(frozen=True)
class NoiseRobustRule:
    """Untrimmed-linear rule that keeps the target an equilibrium when the
    manager sees each p_i through uniform noise of half-width ``epsilon``.

    Its level at the target is ``eps*q/(1+eps*q)`` with ``q = sum 1/t_i``;
    parameters are rejected unless ``2*eps*q/(1+eps*q) <= 1`` so that the
    clamp to [0, 1] never binds inside the noise box around the target.
    """

    target: tuple[float, ...]
    epsilon: float

    variant = "noise_robust"

    def __post_init__(self):
        object.__setattr__(self, "target", _interior_target(self.target))
        eps = float(self.epsilon)
        if not eps > 0:
            raise RuleError("epsilon must be positive")
        object.__setattr__(self, "epsilon", eps)
        if 2.0 * self.eps_q / (1.0 + self.eps_q) > 1.0 + 1e-12:
            raise RuleError(
                f"epsilon={eps} too large for this target: 2*eps*q/(1+eps*q) exceeds 1"
            )

    @property
    def n(self) -> int:
        return len(self.target)

    @property
    def q(self) -> float:
        return float(np.sum(1.0 / np.asarray(self.target)))

    @property
    def eps_q(self) -> float:
        return self.epsilon * self.q

    @property
    def level_at_target(self) -> float:
        return self.eps_q / (1.0 + self.eps_q)

    def raw(self, p):
        p = as_profile(p, self.n)
        t = np.asarray(self.target)
        eq = self.eps_q
        g = np.sum((p / (1.0 + eq) - t) / t, axis=-1) + (self.n + 1) * eq / (1.0 + eq)
        return float(g) if np.ndim(g) == 0 else g

    def evaluate(self, p):
        return _clamp(self.raw(p))

    def to_dict(self) -> dict:
        return {"variant": self.variant, "target": list(self.target), "epsilon": self.epsilon}


@dataclass(frozen=True)
class AggregateRule:
    """Rule driven only by the idle probability ``prod_i (1 - p_i)``; it can
    only implement symmetric targets ``(t, ..., t)``."""

    target: float
    n: int

    variant = "aggregate"

    def __post_init__(self):
        t = float(self.target)
        if not 0.0 < t < 1.0:
            raise RuleError(f"aggregate target must lie in (0, 1), got {t}")
        if int(self.n) < 1:
            raise RuleError("aggregate rule needs n >= 1")
        object.__setattr__(self, "target", t)
        object.__setattr__(self, "n", int(self.n))

    @property
    def target_profile(self) -> tuple[float, ...]:
        return (self.target,) * self.n

    def evaluate(self, p):
        p = as_profile(p, self.n)
        return evaluate_aggregate(self, idle_probability(p))

    def to_dict(self) -> dict:
        return {"variant": self.variant, "target": self.target, "n": self.n}


def quantize(p, m: int) -> np.ndarray:
    """Index r of the interval containing each p_i, with I_0 = {0} and
    I_r = ((r-1)/m, r/m]."""
    if int(m) < 1:
        raise RuleError("need at least one interval")
    p = np.asarray(p, dtype=float)
    r = np.ceil(p * m)
    # a right endpoint that rounded up past r/m belongs to I_r, not I_{r+1}
    below = (r >= 1) & np.isclose(p, (r - 1) / m, rtol=1e-12, atol=1e-15) & (p > 0)
    r = np.where(below, r - 1, r)
    return np.clip(r, 0, m).astype(int)


@dataclass(frozen=True)
class QuantizedTRDRule:
    """TRD rule for a manager who only sees which interval each p_i is in.

    Observations are mapped to the right endpoint r_i/m before the TRD
    rule is applied, so targets must sit on the grid {1/m, ..., (m-1)/m}.
    """

    target: tuple[float, ...]
    m: int

    variant = "quantized_trd"

    def __post_init__(self):
        object.__setattr__(self, "target", _interior_target(self.target))
        m = int(self.m)
        if m < 2:
            raise RuleError("quantization needs m >= 2")
        object.__setattr__(self, "m", m)
        r = quantize(self.target, m)
        if not np.allclose(r / m, self.target, rtol=0, atol=1e-12):
            raise RuleError(f"target {self.target} is not on the 1/{m} grid")

    @property
    def n(self) -> int:
        return len(self.target)

    def evaluate(self, p):
        p = as_profile(p, self.n)
        return TRDRule(self.target).evaluate(quantize(p, self.m) / self.m)

    def to_dict(self) -> dict:
        return {"variant": self.variant, "target": list(self.target), "m": self.m}


InterventionRule = Union[TRDRule, NoiseRobustRule, AggregateRule, QuantizedTRDRule]


def evaluate(rule: InterventionRule, p):
    """Intervention level chosen by ``rule`` when users play ``p``."""
    return rule.evaluate(p)


def evaluate_aggregate(rule: AggregateRule, idle_prob) -> float | np.ndarray:
    """``[((1-t)^n - idle) / (t (1-t)^(n-1))]_0^1`` for the aggregate rule."""
    idle = np.asarray(idle_prob, dtype=float)
    if np.any(idle < 0) or np.any(idle > 1):
        raise RuleError("idle probability must lie in [0, 1]")
    t, n = rule.target, rule.n
    g = ((1.0 - t) ** n - idle) / (t * (1.0 - t) ** (n - 1))
    return _clamp(g)


def target_of(rule: InterventionRule) -> np.ndarray:
    if isinstance(rule, AggregateRule):
        return np.asarray(rule.target_profile)
    return np.asarray(rule.target)


def intervened_payoff(spec: GameSpec, rule: InterventionRule, p) -> np.ndarray:
    """Payoffs once the manager intervenes: ``(1 - g(p)) * u_i(p)``."""
    u = payoff(spec, p)
    g = np.asarray(rule.evaluate(p))
    return u * (1.0 - g)[..., None] if u.ndim > 1 else u * (1.0 - g)


def manager_payoff(rule: InterventionRule, p) -> float:
    """``1 - g(p)`` when users sit exactly on the target, else 0."""
    p = as_profile(p)
    if p.shape == target_of(rule).shape and np.array_equal(p, target_of(rule)):
        return 1.0 - float(rule.evaluate(p))
    return 0.0


_VARIANTS = {
    "trd": lambda d: TRDRule(tuple(d["target"]), d.get("offset")),
    "noise_robust": lambda d: NoiseRobustRule(tuple(d["target"]), d["epsilon"]),
    "aggregate": lambda d: AggregateRule(d["target"], d["n"]),
    "quantized_trd": lambda d: QuantizedTRDRule(tuple(d["target"]), d["m"]),
}


def rule_to_dict(rule: InterventionRule) -> dict:
    return rule.to_dict()


def rule_from_dict(data: dict) -> InterventionRule:
    try:
        build = _VARIANTS[data["variant"]]
    except KeyError as exc:
        raise RuleError(f"unknown rule variant in {data!r}") from exc
    return build(data)
