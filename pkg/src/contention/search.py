"""Budgeted numeric searches shared by the Pareto and coalition checks.

Every verdict produced from these searches is only as strong as the budget
used, so the budget object travels with the result.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchBudget:
    """Grid resolution and local-refinement effort for a numeric search.

    grid: points per dimension of the coarse scan (including both ends).
    starts: number of local refinements launched from the best scan points.
    tol: strict-improvement threshold (normalized payoff units).
    max_points: cap on the coarse scan; above it a Halton set is used.
    """

    grid: int = 41
    starts: int = 6
    tol: float = 1e-9
    max_points: int = 250_000

    def to_dict(self) -> dict:
        return asdict(self)


def scan_points(dim: int, budget: SearchBudget) -> np.ndarray:
    """Deterministic coarse sample of [0,1]^dim, row-major when it is a grid."""
    if budget.grid ** dim <= budget.max_points:
        axis = np.linspace(0.0, 1.0, budget.grid)
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)
    # unscrambled Halton keeps the scan seed-free
    sampler = qmc.Halton(d=dim, scramble=False)
    pts = sampler.random(budget.max_points)
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=dim))) if dim <= 12 else np.empty((0, dim))
    return np.vstack([corners, pts])


def maximize_1d(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float = 0.0,
    hi: float = 1.0,
    step: float = 1e-3,
    xtol: float = 1e-12,
) -> tuple[float, float]:
    """Maximize a vectorized scalar function on [lo, hi].

    Grid scan at ``step`` followed by golden-section refinement inside the
    bracket around the best grid point. The better of the two is returned,
    so a refinement never loses against the scan.
    """
    count = max(2, int(round((hi - lo) / step)) + 1)
    xs = np.linspace(lo, hi, count)
    ys = np.asarray(f(xs), dtype=float)
    best = int(np.argmax(ys))
    a = xs[max(best - 1, 0)]
    b = xs[min(best + 1, count - 1)]
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = (float(v) for v in f(np.array([c, d])))
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = float(f(np.array([c]))[0])
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = float(f(np.array([d]))[0])
    x_ref = 0.5 * (a + b)
    y_ref = float(f(np.array([x_ref]))[0])
    if y_ref > ys[best]:
        return x_ref, y_ref
    return float(xs[best]), float(ys[best])


def _is_improvement(gain: np.ndarray, tol: float) -> np.ndarray:
    return np.all(gain >= 0.0, axis=-1) & np.any(gain > tol, axis=-1)


def find_improvement(
    payoffs: Callable[[np.ndarray], np.ndarray],
    base: np.ndarray,
    dim: int,
    budget: SearchBudget,
    scale: np.ndarray | None = None,
    start: np.ndarray | None = None,
) -> np.ndarray | None:
    """Search x in [0,1]^dim whose payoffs weakly beat ``base`` everywhere
    and strictly (by more than ``budget.tol``) somewhere.

    ``payoffs`` maps an (m, dim) array to an (m, s) array. Gains are divided
    by ``scale`` before any comparison. Returns the improving point or None.
    """
    base = np.asarray(base, dtype=float)
    scale = np.ones_like(base) if scale is None else np.asarray(scale, dtype=float)

    def gains(x: np.ndarray) -> np.ndarray:
        return (payoffs(np.atleast_2d(x)) - base) / scale

    pts = scan_points(dim, budget)
    if start is not None:
        pts = np.vstack([np.asarray(start, dtype=float)[None, :], pts])
    g = gains(pts)
    ok = _is_improvement(g, budget.tol)
    if ok.any():
        idx = np.flatnonzero(ok)
        return pts[idx[np.argmax(g[idx].sum(axis=1))]].copy()

    # local refinement from the start point and the most promising scan points
    worst = g.min(axis=1)
    order = np.argsort(-worst, kind="stable")
    seeds = []
    if start is not None:
        seeds.append(np.asarray(start, dtype=float))
    seeds.extend(pts[j] for j in order[: budget.starts])
    bounds = [(0.0, 1.0)] * dim
    for x0 in seeds:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            found = [_refine_maxmin(gains, x0, bounds), _refine_sum(gains, x0, bounds)]
        for candidate in found:
            if candidate is None:
                continue
            candidate = np.clip(candidate, 0.0, 1.0)
            if _is_improvement(gains(candidate)[0], budget.tol):
                return candidate
    return None


def _refine_maxmin(gains, x0, bounds) -> np.ndarray | None:
    dim = len(x0)
    z0 = np.append(x0, gains(x0)[0].min())
    cons = {"type": "ineq", "fun": lambda z: gains(z[:dim])[0] - z[dim]}
    try:
        res = minimize(
            lambda z: -z[dim],
            z0,
            method="SLSQP",
            bounds=bounds + [(None, None)],
            constraints=[cons],
            options={"ftol": 1e-14, "maxiter": 100},
        )
    except (ValueError, FloatingPointError):
        return None
    return res.x[:dim]


def _refine_sum(gains, x0, bounds) -> np.ndarray | None:
    cons = {"type": "ineq", "fun": lambda x: gains(x)[0]}
    try:
        res = minimize(
            lambda x: -gains(x)[0].sum(),
            np.asarray(x0, dtype=float),
            method="SLSQP",
            bounds=bounds,
            constraints=[cons],
            options={"ftol": 1e-14, "maxiter": 100},
        )
    except (ValueError, FloatingPointError):
        return None
    return res.x
