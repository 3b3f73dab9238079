"""The base contention game: independent transmission probabilities on a
slotted collision channel, no manager."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .search import SearchBudget, find_improvement


class ProfileError(ValueError):
    """A strategy profile does not fit the game it is used with."""


@dataclass(frozen=True)
class GameSpec:
    """Number of users and their per-success valuations ``k``."""

    k: tuple[float, ...]

    def __post_init__(self):
        k = tuple(float(v) for v in self.k)
        if len(k) < 1:
            raise ValueError("a game needs at least one user")
        if not all(v > 0 and np.isfinite(v) for v in k):
            raise ValueError(f"valuations must be positive, got {k}")
        object.__setattr__(self, "k", k)

    @property
    def n(self) -> int:
        return len(self.k)

    @property
    def kvec(self) -> np.ndarray:
        return np.asarray(self.k, dtype=float)

    @classmethod
    def homogeneous(cls, n: int, value: float = 1.0) -> "GameSpec":
        return cls((value,) * n)

    @classmethod
    def ranked(cls, n: int) -> "GameSpec":
        """Heterogeneous users with ``k_i = i``."""
        return cls(tuple(float(i) for i in range(1, n + 1)))

    def profile(self, p: Sequence[float] | np.ndarray) -> np.ndarray:
        return as_profile(p, self.n)


def as_profile(p, n: int | None = None) -> np.ndarray:
    """Validate a strategy profile (or a batch of them along axis 0)."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        arr = arr[None]
    if n is not None and arr.shape[-1] != n:
        raise ProfileError(f"profile has {arr.shape[-1]} entries, game has {n} users")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ProfileError("transmission probabilities must lie in [0, 1]")
    return arr


def others_idle(p: np.ndarray) -> np.ndarray:
    """prod_{j != i} (1 - p_j) for every i, along the last axis.

    Built from prefix and suffix products so a p_j equal to 1 is handled
    without dividing by zero.
    """
    q = 1.0 - np.asarray(p, dtype=float)
    ones = np.ones(q.shape[:-1] + (1,))
    left = np.cumprod(np.concatenate([ones, q[..., :-1]], axis=-1), axis=-1)
    right = np.cumprod(np.concatenate([ones, q[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return left * right


def success_probability(p) -> np.ndarray:
    """Probability that each user is the sole transmitter in a slot."""
    p = np.asarray(p, dtype=float)
    return p * others_idle(p)


def payoff(spec: GameSpec, p) -> np.ndarray:
    """Expected payoff ``k_i p_i prod_{j != i}(1 - p_j)`` of every user."""
    p = as_profile(p, spec.n)
    return spec.kvec * success_probability(p)


def utilization(p) -> np.ndarray | float:
    """Probability that some user transmits successfully in a slot."""
    p = as_profile(p)
    tau = success_probability(p).sum(axis=-1)
    return float(tau) if np.ndim(tau) == 0 else tau


def idle_probability(p) -> np.ndarray | float:
    p = as_profile(p)
    out = np.prod(1.0 - p, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def is_nash_base(spec: GameSpec, p) -> bool:
    """A profile is a Nash equilibrium of the unmanaged game iff some user
    transmits with certainty."""
    p = as_profile(p, spec.n)
    return bool(np.max(p) == 1.0)


@dataclass(frozen=True)
class SamplingPlan:
    """Either a regular grid with spacing ``step`` or explicit ``points``."""

    step: float | None = None
    points: tuple[tuple[float, ...], ...] | None = None

    def profiles(self, n: int) -> np.ndarray:
        if self.points is not None:
            pts = as_profile(np.asarray(self.points, dtype=float).reshape(-1, n), n)
            if len(pts) == 0:
                raise ValueError("sampling plan is empty")
        elif self.step is not None:
            if not 0 < self.step <= 1:
                raise ValueError("grid step must be in (0, 1]")
            count = int(np.floor(1.0 / self.step + 1e-9)) + 1
            axis = np.round(np.arange(count) * self.step, 12)
            if axis[-1] < 1.0:
                axis = np.append(axis, 1.0)
            mesh = np.meshgrid(*([axis] * n), indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
        else:
            raise ValueError("sampling plan is empty")
        corners = np.eye(n)
        missing = [c for c in corners if not np.any(np.all(pts == c, axis=1))]
        if missing:
            pts = np.vstack([pts, np.array(missing)])
        return pts


def sample_feasible_region(spec: GameSpec, plan: SamplingPlan) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the payoff map over a sampling plan.

    Returns ``(profiles, payoffs)`` with matching rows; the corner profiles
    ``e_i`` are always present.
    """
    pts = plan.profiles(spec.n)
    return pts, payoff(spec, pts)


def region_header(n: int) -> list[str]:
    return [f"p_{i}" for i in range(1, n + 1)] + [f"u_{i}" for i in range(1, n + 1)]


def write_region_csv(stream: IO[str], profiles: np.ndarray, payoffs: np.ndarray) -> None:
    n = profiles.shape[1]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(region_header(n))
    for p_row, u_row in zip(profiles, payoffs):
        writer.writerow([repr(float(v)) for v in p_row] + [repr(float(v)) for v in u_row])


def read_region_csv(stream: IO[str]) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.reader(stream))
    n = len(rows[0]) // 2
    if rows[0] != region_header(n):
        raise ValueError("not a region CSV")
    data = np.array(rows[1:], dtype=float).reshape(-1, 2 * n)
    return data[:, :n], data[:, n:]


@dataclass
class ParetoVerdict:
    efficient: bool
    budget: SearchBudget
    dominated_by: np.ndarray | None = None
    gain: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "efficient": self.efficient,
            "dominated_by": None if self.dominated_by is None else self.dominated_by.tolist(),
            "gain": None if self.gain is None else self.gain.tolist(),
            "budget": self.budget.to_dict(),
        }


def is_pareto_efficient(
    spec: GameSpec,
    p,
    search: SearchBudget | None = None,
    rule=None,
) -> ParetoVerdict:
    """Search for a profile whose payoffs dominate those of ``p``.

    With ``rule`` given, payoffs are those of the game under that manager
    intervention rule (anything exposing ``evaluate(p)``). Gains are
    measured per unit of valuation, so the verdict does not change when
    ``k`` is rescaled. ``efficient`` is relative to the search budget.
    """
    budget = search or SearchBudget(grid=101 if spec.n <= 2 else 41)
    p = as_profile(p, spec.n)
    k = spec.kvec

    def payoffs(x: np.ndarray) -> np.ndarray:
        u = k * success_probability(x)
        if rule is not None:
            u = u * (1.0 - np.asarray(rule.evaluate(x)))[..., None]
        return u

    base = payoffs(p[None, :])[0]
    q = find_improvement(payoffs, base, spec.n, budget, scale=k, start=p)
    if q is None:
        return ParetoVerdict(True, budget)
    return ParetoVerdict(False, budget, dominated_by=q, gain=payoffs(q[None, :])[0] - base)


def dominates(u: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> bool:
    """u weakly above v everywhere and above by more than ``tol`` somewhere."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return bool(np.all(u >= v) and np.any(u > v + tol))
