"""Tables and payoff regions computed from the solver modules."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .game import GameSpec, payoff, utilization
from .intervention import AggregateRule, NoiseRobustRule, QuantizedTRDRule, RuleError, TRDRule, intervened_payoff
from .targets import (
    BargainingProblem,
    SolverConfig,
    egalitarian_target,
    nash_bargaining_target,
    nash_product,
    nonsymmetric_nash_target,
    quantized_target_grid,
    symmetric_targets,
)


@dataclass
class Table1Row:
    n: int
    individual_payoff: float
    utilization: float


def table1(n_list) -> list[Table1Row]:
    rows = []
    for n in n_list:
        if n < 1:
            raise ValueError("n must be at least 1")
        spec = GameSpec.homogeneous(n)
        p = nash_bargaining_target(BargainingProblem(spec))
        rows.append(Table1Row(n, float(payoff(spec, p)[0]), utilization(p)))
    return rows


@dataclass
class Table2Row:
    target: str
    n: int
    average: float
    aggregate: float
    std: float
    utilization: float
    nash_product: float
    generalized_nash_product: float
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def table2_targets(spec: GameSpec, solver: SolverConfig | None = None):
    """The three heterogeneous-user targets: proportional to k, equal, and
    equal-payoff."""
    yield "p1", lambda: nonsymmetric_nash_target(BargainingProblem(spec, weights=spec.k))
    yield "p2", lambda: nash_bargaining_target(BargainingProblem(spec))
    yield "p3", lambda: egalitarian_target(spec, solver)


def table2(n_list, solver: SolverConfig | None = None) -> list[Table2Row]:
    rows = []
    for name in ("p1", "p2", "p3"):
        for n in n_list:
            spec = GameSpec.ranked(n)
            build = dict(table2_targets(spec, solver))[name]
            try:
                p = build()
            except Exception as exc:  # surfaced per row, not fatal
                rows.append(Table2Row(name, n, *([float("nan")] * 6), error=str(exc)))
                continue
            u = intervened_payoff(spec, TRDRule(p), p)
            rows.append(
                Table2Row(
                    name,
                    n,
                    float(u.mean()),
                    float(u.sum()),
                    float(u.std()),
                    utilization(p),
                    nash_product(spec, p),
                    nash_product(spec, p, weights=spec.k),
                )
            )
    return rows


REGION_MODES = ("base", "quantized", "noisy", "aggregate")


def region(mode: str, spec: GameSpec, step: float = 0.01, m: int | None = None, epsilon: float | None = None):
    """Achievable (target, payoff) pairs under one observation regime.

    base: every grid profile (the feasible set); quantized: grid targets
    at spacing 1/m; noisy: interior targets scaled by the expected level at
    the target of the noise-robust rule, skipping targets where that rule is
    out of range; aggregate: symmetric targets only.
    """
    n = spec.n
    if mode == "base":
        count = int(round(1.0 / step)) + 1
        axis = np.round(np.linspace(0.0, 1.0, count), 12)
        mesh = np.meshgrid(*([axis] * n), indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=-1)
        return pts, payoff(spec, pts)
    if mode == "quantized":
        if m is None:
            raise ValueError("quantized region needs m")
        pts = np.array(list(quantized_target_grid(n, m)))
        rules = [QuantizedTRDRule(tuple(t), m) for t in pts]
        return pts, np.array([intervened_payoff(spec, r, t) for r, t in zip(rules, pts)])
    if mode == "noisy":
        if epsilon is None:
            raise ValueError("noisy region needs epsilon")
        count = int(round(1.0 / step)) + 1
        axis = np.round(np.linspace(0.0, 1.0, count), 12)[1:-1]
        axis = axis[(axis >= 2 * epsilon - 1e-12) & (axis <= 1 - 2 * epsilon + 1e-12)]
        mesh = np.meshgrid(*([axis] * n), indexing="ij")
        pts, vals = [], []
        for t in np.stack([g.ravel() for g in mesh], axis=-1):
            try:
                rule = NoiseRobustRule(tuple(t), epsilon)
            except RuleError:
                continue
            pts.append(t)
            vals.append(payoff(spec, t) * (1.0 - rule.level_at_target))
        return np.array(pts).reshape(-1, n), np.array(vals).reshape(-1, n)
    if mode == "aggregate":
        count = int(round(1.0 / step)) - 1
        pts = np.array(list(symmetric_targets(n, count)))
        vals = np.array([intervened_payoff(spec, AggregateRule(t[0], n), t) for t in pts])
        return pts, vals
    raise ValueError(f"unknown region mode {mode!r}; expected one of {REGION_MODES}")
