"""Adaptive-offset intervention that walks users from a saturated
equilibrium back to the target.

Each period the manager lowers the TRD offset to
``c_t = sum_{j != last} p_j^{t-1}/t_j + 1`` and every user best-responds to
the others' previous probabilities. Users are ordered by their initial
ratio ``p_i^0 / t_i``; "last" is the user with the largest ratio.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .equilibrium import best_response_trd, is_nash_intervened
from .game import GameSpec, as_profile
from .intervention import TRDRule


@dataclass
class DynamicsStep:
    t: int
    offset: float | None
    profile: np.ndarray
    level: float


@dataclass
class DynamicsTrace:
    steps: list[DynamicsStep]
    converged: bool
    iterations: int
    guaranteed: bool = True
    issues: list[str] = field(default_factory=list)

    def profiles(self) -> np.ndarray:
        return np.array([s.profile for s in self.steps])

    def offsets(self) -> np.ndarray:
        return np.array([np.nan if s.offset is None else s.offset for s in self.steps])

    def write_csv(self, stream: IO[str]) -> None:
        n = len(self.steps[0].profile)
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["t", "c_t", "g_level"] + [f"p_{i}" for i in range(1, n + 1)])
        for s in self.steps:
            c = "" if s.offset is None else repr(float(s.offset))
            writer.writerow([s.t, c, repr(float(s.level))] + [repr(float(v)) for v in s.profile])

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "guaranteed": self.guaranteed,
            "issues": list(self.issues),
            "steps": [
                {"t": s.t, "c_t": s.offset, "g_level": s.level, "p": s.profile.tolist()}
                for s in self.steps
            ],
        }


def user_order(target, p_hat0) -> np.ndarray:
    """Users sorted by initial ratio p_i/t_i, ties kept in index order."""
    ratio = np.asarray(p_hat0, dtype=float) / np.asarray(target, dtype=float)
    return np.argsort(ratio, kind="stable")


def check_hypotheses(spec: GameSpec, target, p_hat0) -> list[str]:
    """Reasons the convergence guarantee does not apply (empty if it does)."""
    t = np.asarray(target, dtype=float)
    p0 = as_profile(p_hat0, spec.n)
    issues = []
    if not np.array_equal(p0, t) and is_nash_intervened(spec, t, p0).kind != "second_class":
        issues.append("starting profile is not a saturated (second-class) equilibrium")
    r = p0 / t
    top = r.max()
    bad = [i + 1 for i in range(spec.n) if not (top - r[i] < 2.0 or r[i] <= 1.0)]
    if bad:
        issues.append(f"users {bad} are neither within 2 of the largest ratio nor at or below target")
    return issues


def run_dynamics(
    spec: GameSpec,
    target,
    p_hat0,
    max_t: int = 60,
    tol: float = 1e-10,
) -> DynamicsTrace:
    """Iterate simultaneous best replies under the shrinking-offset rule.

    Hypothesis violations do not stop the run; they are recorded and the
    trace is flagged as not guaranteed to converge.
    """
    t_vec = np.asarray(TRDRule(target).target)
    p = as_profile(p_hat0, spec.n).copy()
    issues = check_hypotheses(spec, t_vec, p)
    last = int(user_order(t_vec, p)[-1])

    steps = [DynamicsStep(0, float(spec.n), p.copy(), float(TRDRule(t_vec).evaluate(p)))]
    converged = bool(np.max(np.abs(p - t_vec)) < tol)
    step = 0
    while not converged and step < max_t:
        step += 1
        ratio = p / t_vec
        c_t = float(ratio.sum() - ratio[last] + 1.0)
        new = np.empty_like(p)
        for i in range(spec.n):
            br = best_response_trd(spec, t_vec, c_t, i, np.delete(p, i), current=p[i])
            new[i] = br.value
        p = new
        steps.append(DynamicsStep(step, c_t, p.copy(), float(TRDRule(t_vec, c_t).evaluate(p))))
        converged = bool(np.max(np.abs(p - t_vec)) < tol)
    return DynamicsTrace(steps, converged, step, guaranteed=not issues, issues=issues)


def closed_form_trajectory(target, p_hat0, t: int) -> np.ndarray:
    """Profile after ``t`` periods, from the explicit halving recursion.

    Users within 2 of the largest initial ratio close half of the remaining
    gap each period starting at t=1; users further away sit still for one
    period (they are indifferent) and then halve their gap to the target.
    """
    tv = np.asarray(TRDRule(target).target)
    p0 = np.asarray(p_hat0, dtype=float)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return p0.copy()
    r0 = p0 / tv
    top = r0.max()
    gap = top - r0
    near = gap < 2.0
    far_ok = r0 <= 1.0
    if np.any(~near & ~far_ok):
        raise ValueError("closed form needs every user near the top ratio or at/below target")
    ratio = np.where(near, 1.0 - gap / 2.0**t, 1.0 - (1.0 - r0) / 2.0 ** (t - 1))
    return ratio * tv
