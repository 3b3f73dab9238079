"""Target profiles the manager may choose to implement."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.optimize import minimize

from .game import GameSpec, as_profile, payoff

RENDER_FLOOR = 1e-300


class SolverError(RuntimeError):
    """The target solver did not reach its tolerance."""

    def __init__(self, message: str, residuals: dict | None = None):
        super().__init__(message)
        self.residuals = residuals or {}


class DegenerateTargetWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BargainingProblem:
    spec: GameSpec
    disagreement: tuple[float, ...] | None = None
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.weights is not None:
            w = tuple(float(v) for v in self.weights)
            if len(w) != self.spec.n or not all(v > 0 for v in w):
                raise ValueError("bargaining weights must be positive, one per user")
            object.__setattr__(self, "weights", w)
        if self.disagreement is not None and any(v != 0 for v in self.disagreement):
            raise NotImplementedError("only the zero disagreement point is supported")


def nash_bargaining_target(problem: BargainingProblem) -> np.ndarray:
    """Equal access ``(1/n, ..., 1/n)``, whatever the valuations."""
    n = problem.spec.n
    if n == 1:
        warnings.warn("single user: the bargaining target is p = 1", DegenerateTargetWarning)
        return np.ones(1)
    return np.full(n, 1.0 / n)


def nonsymmetric_nash_target(problem: BargainingProblem) -> np.ndarray:
    """Weighted bargaining target ``w_i / sum(w)``."""
    if problem.weights is None:
        raise ValueError("nonsymmetric bargaining needs weights")
    w = np.asarray(problem.weights)
    return w / w.sum()


def proportional_target(spec: GameSpec) -> np.ndarray:
    return nonsymmetric_nash_target(BargainingProblem(spec, weights=spec.k))


def log_nash_product(spec: GameSpec, p, weights=None) -> float:
    """``sum_i w_i log u_i``; -inf when some payoff is zero."""
    u = payoff(spec, p)
    w = np.ones(spec.n) if weights is None else np.asarray(weights, dtype=float)
    if np.any(u <= 0):
        return -math.inf
    return float(np.sum(w * np.log(u)))


def nash_product(spec: GameSpec, p, weights=None) -> float:
    """``prod_i u_i^{w_i}``, evaluated in log space; values below 1e-300
    are reported as 0."""
    lg = log_nash_product(spec, p, weights)
    if lg == -math.inf or lg < math.log(RENDER_FLOOR):
        return 0.0
    return math.exp(lg)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    spread_tol: float = 1e-8
    random_starts: int = 4
    seed: int = 0
    maxiter: int = 500


def _log_payoff_jac(p: np.ndarray) -> np.ndarray:
    n = len(p)
    jac = np.tile(-1.0 / (1.0 - p), (n, 1))
    jac[np.diag_indices(n)] = 1.0 / p
    return jac


def egalitarian_target(spec: GameSpec, solver: SolverConfig | None = None) -> np.ndarray:
    """Profile maximizing the smallest payoff.

    Solved as ``max z`` subject to ``log u_i(p) >= z`` by SLSQP from several
    starts (equal shares, shares proportional to 1/k, and seeded random
    points on the simplex). At the optimum every payoff is equal.
    """
    cfg = solver or SolverConfig()
    n = spec.n
    if n == 1:
        return np.ones(1)
    logk = np.log(spec.kvec)
    eps = 1e-12
    bounds = [(eps, 1.0 - eps)] * n + [(None, None)]

    def log_u(p):
        q = np.log1p(-p)
        return logk + np.log(p) + q.sum() - q

    cons = {
        "type": "ineq",
        "fun": lambda z: log_u(z[:n]) - z[n],
        "jac": lambda z: np.hstack([_log_payoff_jac(z[:n]), -np.ones((n, 1))]),
    }
    inv = 1.0 / spec.kvec
    starts = [np.full(n, 1.0 / n), inv / inv.sum()]
    rng = np.random.default_rng(cfg.seed)
    starts += list(rng.dirichlet(np.ones(n), size=cfg.random_starts))

    best, best_val, best_res = None, -math.inf, None
    for p0 in starts:
        p0 = np.clip(p0, 1e-6, 1 - 1e-6)
        z0 = np.append(p0, log_u(p0).min())
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(
                lambda z: -z[n],
                z0,
                jac=lambda z: np.append(np.zeros(n), -1.0),
                method="SLSQP",
                bounds=bounds,
                constraints=[cons],
                options={"ftol": cfg.tol, "maxiter": cfg.maxiter},
            )
        p = np.clip(res.x[:n], eps, 1 - eps)
        val = log_u(p).min()
        if val > best_val:
            best, best_val, best_res = p, val, res
    u = payoff(spec, best)
    spread = float(u.max() - u.min())
    if spread > cfg.spread_tol * max(1.0, float(u.max())):
        raise SolverError(
            "egalitarian solver did not equalize payoffs",
            {"spread": spread, "message": str(best_res.message), "payoffs": u.tolist()},
        )
    return best


def quantized_target_grid(n: int, m: int) -> Iterator[np.ndarray]:
    """Lazily enumerate every profile with entries in {1/m, ..., (m-1)/m}."""
    if m < 2:
        raise ValueError("quantized targets need m >= 2")
    levels = [r / m for r in range(1, m)]
    for combo in itertools.product(levels, repeat=n):
        yield np.array(combo)


def symmetric_targets(n: int, count: int = 199) -> Iterator[np.ndarray]:
    """Equal-probability targets on an interior grid."""
    for x in np.linspace(0.0, 1.0, count + 2)[1:-1]:
        yield np.full(n, x)


def kalai_smorodinsky_ratios(spec: GameSpec, p) -> np.ndarray:
    """Payoff of each user as a share of its best possible payoff ``k_i``."""
    return payoff(spec, as_profile(p, spec.n)) / spec.kvec


def numeric_bargaining_target(
    spec: GameSpec, weights=None, starts: int = 8, seed: int = 0
) -> np.ndarray:
    """Maximize the (generalized) Nash product directly over profiles.

    Multi-start L-BFGS-B on ``-sum_i w_i log u_i(p)``, with no use of the
    closed-form answer; the starts are seeded uniform draws in (0, 1)^n.
    """
    n = spec.n
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    logk = np.log(spec.kvec)
    eps = 1e-9

    def objective(p):
        q = np.log1p(-p)
        log_u = logk + np.log(p) + q.sum() - q
        grad = w / p - (w.sum() - w) / (1.0 - p)
        return -float(w @ log_u), -grad

    rng = np.random.default_rng(seed)
    best, best_val = None, math.inf
    for p0 in rng.uniform(0.05, 0.95, size=(starts, n)):
        res = minimize(objective, p0, jac=True, method="L-BFGS-B", bounds=[(eps, 1 - eps)] * n,
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000})
        if res.fun < best_val:
            best, best_val = res.x, res.fun
    return best
