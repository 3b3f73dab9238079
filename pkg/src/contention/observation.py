"""Slot-level channel simulation, the manager's probability estimator and
degraded observation models.

Randomness comes from numpy's PCG64 generator. Every (user, block) pair
gets its own stream derived from the run seed through ``SeedSequence``
spawn keys, so the trace is identical however blocks are scheduled. The
manager is stream 0, users are streams 1..n.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO

import numpy as np

from .game import GameSpec, as_profile
from .intervention import InterventionRule, quantize

IDLE = -1
COLLISION = -2
MANAGER = 0  # outcome code when only the manager transmits; users are 1..n
BLOCK = 1 << 16
Z95 = 1.959963984540054


class EstimationUndefinedError(ValueError):
    """The idle/success counts cannot identify some users' probabilities."""

    def __init__(self, users: list[int]):
        super().__init__(f"probability not identifiable for users {users}")
        self.users = users


def _stream(seed: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream, block))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class SlotTrace:
    """Per-slot outcomes: IDLE, COLLISION, MANAGER or a 1-based user id."""

    outcomes: np.ndarray
    manager_tx: np.ndarray
    n: int
    seed: int

    @property
    def slot_count(self) -> int:
        return len(self.outcomes)

    def counts(self) -> dict[str, int]:
        out = {
            "idle": int(np.sum(self.outcomes == IDLE)),
            "collision": int(np.sum(self.outcomes == COLLISION)),
            "manager": int(np.sum(self.outcomes == MANAGER)),
        }
        succ = np.bincount(self.outcomes[self.outcomes > 0], minlength=self.n + 1)
        out.update({f"success_{i}": int(succ[i]) for i in range(1, self.n + 1)})
        return out

    def success_frequencies(self) -> np.ndarray:
        succ = np.bincount(self.outcomes[self.outcomes > 0], minlength=self.n + 1)
        return succ[1:] / self.slot_count

    def write_csv(self, stream: IO[str]) -> None:
        labels = {IDLE: "I", COLLISION: "C"}
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["slot", "outcome"])
        for s, o in enumerate(self.outcomes.tolist()):
            writer.writerow([s, labels.get(o, f"S{o}")])

    @classmethod
    def read_csv(cls, stream: IO[str], n: int, seed: int = 0) -> "SlotTrace":
        rows = list(csv.reader(stream))[1:]
        codes = {"I": IDLE, "C": COLLISION}
        out = np.array([codes[o] if o in codes else int(o[1:]) for _, o in rows], dtype=np.int64)
        # the manager's own transmissions are only recoverable when it was alone
        return cls(out, out == MANAGER, n, seed)


def _simulate_block(p: np.ndarray, p0: float, seed: int, block: int, size: int):
    n = len(p)
    tx = np.empty((n, size), dtype=bool)
    for i in range(n):
        tx[i] = _stream(seed, i + 1, block).random(size) < p[i]
    mgr = _stream(seed, 0, block).random(size) < p0
    busy = tx.sum(axis=0) + mgr
    out = np.full(size, COLLISION, dtype=np.int64)
    out[busy == 0] = IDLE
    alone = busy == 1
    who = np.where(mgr, MANAGER, np.argmax(tx, axis=0) + 1)
    out[alone] = who[alone]
    return out, mgr


def simulate(
    spec: GameSpec,
    p,
    manager_p0: float = 0.0,
    slots: int = 100_000,
    seed: int = 0,
    threads: int = 1,
) -> SlotTrace:
    """Draw ``slots`` independent slots: user i transmits with probability
    p_i, the manager with ``manager_p0``; a slot succeeds for i only when i
    is the sole transmitter."""
    p = as_profile(p, spec.n)
    if not 0.0 <= manager_p0 <= 1.0:
        raise ValueError("manager probability must lie in [0, 1]")
    if slots < 1:
        raise ValueError("need at least one slot")
    sizes = [min(BLOCK, slots - b * BLOCK) for b in range(math.ceil(slots / BLOCK))]
    jobs = [(p, manager_p0, seed, b, size) for b, size in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _simulate_block(*a), jobs))
    else:
        parts = [_simulate_block(*a) for a in jobs]
    outcomes = np.concatenate([o for o, _ in parts])
    mgr = np.concatenate([m for _, m in parts])
    return SlotTrace(outcomes, mgr, spec.n, int(seed))


@dataclass
class EstimateReport:
    q_idle: float
    q: np.ndarray
    p_hat: np.ndarray
    confidence: np.ndarray
    slots_used: int

    def to_dict(self) -> dict:
        return {
            "q_idle": self.q_idle,
            "q": self.q.tolist(),
            "p_hat": self.p_hat.tolist(),
            "confidence_95": self.confidence.tolist(),
            "slots_used": self.slots_used,
        }


def estimate_probabilities(trace: SlotTrace, n: int | None = None) -> EstimateReport:
    """Recover each p_i from idle and success frequencies.

    Only slots in which the manager stayed silent are used. Since
    ``q_i / q_idle = p_i / (1 - p_i)``, the estimate is
    ``q_i / (q_i + q_idle)``. Given the ``M = X_i + X_idle`` slots that were
    idle or won by i, the count X_i is binomial(M, p_i), which gives the
    normal-approximation 95% half-width.
    """
    n = trace.n if n is None else n
    keep = ~trace.manager_tx
    out = trace.outcomes[keep]
    used = len(out)
    if used == 0:
        raise EstimationUndefinedError(list(range(1, n + 1)))
    x_idle = int(np.sum(out == IDLE))
    x = np.bincount(out[out > 0], minlength=n + 1)[1:].astype(float)
    if x_idle == 0:
        raise EstimationUndefinedError(list(range(1, n + 1)))
    total = x + x_idle
    p_hat = x / total
    half = Z95 * np.sqrt(p_hat * (1.0 - p_hat) / total)
    return EstimateReport(x_idle / used, x / used, p_hat, half, used)


@dataclass(frozen=True)
class ObservationModel:
    """What the manager gets to see: ``exact``, ``quantized`` (needs m),
    ``noisy`` (needs epsilon, uniform noise) or ``aggregate``."""

    kind: str = "exact"
    m: int | None = None
    epsilon: float | None = None
    noise: str = "uniform"

    def __post_init__(self):
        if self.kind not in ("exact", "quantized", "noisy", "aggregate"):
            raise ValueError(f"unknown observation model {self.kind!r}")
        if self.kind == "quantized" and (self.m is None or self.m < 2):
            raise ValueError("quantized observation needs m >= 2")
        if self.kind == "noisy":
            if self.epsilon is None or not self.epsilon > 0:
                raise ValueError("noisy observation needs epsilon > 0")
            if self.noise != "uniform":
                raise ValueError("only uniform noise is implemented")


def check_noisy_domain(p, epsilon: float) -> np.ndarray:
    p = as_profile(p)
    if np.any(p < epsilon - 1e-15) or np.any(p > 1.0 - epsilon + 1e-15):
        raise ValueError(f"noisy observation requires p in [{epsilon}, {1 - epsilon}]")
    return p


def observe(model: ObservationModel, p, seed: int | None = None, size: int | None = None):
    """Manager's view of the profile under ``model``."""
    p = as_profile(p)
    if model.kind == "exact":
        return p.copy()
    if model.kind == "quantized":
        return quantize(p, model.m)
    if model.kind == "aggregate":
        return float(np.prod(1.0 - p))
    p = check_noisy_domain(p, model.epsilon)
    rng = np.random.default_rng(seed)
    shape = p.shape if size is None else (size,) + p.shape
    return p + rng.uniform(-model.epsilon, model.epsilon, size=shape)


def expected_intervention(
    rule: InterventionRule,
    p,
    epsilon: float,
    samples: int = 100_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the intervention level when
    the rule is applied to noisy observations of p."""
    draws = observe(ObservationModel("noisy", epsilon=epsilon), p, seed=seed, size=samples)
    levels = np.asarray(rule.evaluate(np.clip(draws, 0.0, 1.0)), dtype=float)
    return float(levels.mean()), float(levels.std(ddof=1) / math.sqrt(samples))
