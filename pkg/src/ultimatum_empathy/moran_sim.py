"""Frequency-dependent Moran process on ``M`` groups arranged in a ring.

One call to :func:`step_generation` is one birth-death event. Players interact
only with the other members of their own group; a newborn keeps its parent's
group with probability ``1 - v`` and otherwise migrates (to a ring neighbour
for ``pattern="local"``, to any other group for ``pattern="global"``).

Randomness comes from :class:`numpy.random.Generator` on the PCG64 bit
generator (numpy >= 1.17 stream layout). A run with a given ``seed`` is
bit-reproducible on any platform numpy supports.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernel
from .game_core import Kind, Strategy, fitness, group_payoffs

log = logging.getLogger(__name__)

PATTERNS = ("local", "global")
CHUNK_EVENTS = 1 << 16
DEFAULT_BATCHES = 32
DEFAULT_REFRESH = 4096


@dataclass
class SimParams:
    N: int = 50
    M: int = 9
    u: float = 0.1
    v: float = 0.1
    alpha: float = 1.0
    omega: float = 0.001
    pattern: str = "global"
    generations: int = 1_000_000
    burn_in: Optional[int] = None  # None -> 10% of generations
    sample_every: int = 1
    seed: int = 0
    exclude_reproducer_from_death: bool = False

    def __post_init__(self):
        if self.burn_in is None:
            self.burn_in = self.generations // 10
        self.validate()

    def validate(self):
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        for name in ("u", "v", "alpha", "omega"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {val}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}, got {self.pattern!r}")
        if self.generations < 1:
            raise ValueError(f"generations must be >= 1, got {self.generations}")
        if not 0 <= self.burn_in < self.generations:
            raise ValueError(f"burn_in must satisfy 0 <= burn_in < generations, got {self.burn_in}")
        if self.sample_every < 1:
            raise ValueError(f"sample_every must be >= 1, got {self.sample_every}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.N < 2 * self.M:
            warnings.warn(f"N={self.N} < 2M={2 * self.M}: many groups will hold a single player",
                          stacklevel=3)

    @property
    def samples(self) -> int:
        return (self.generations - self.burn_in) // self.sample_every


@dataclass
class PopulationState:
    """Column-wise population: player ``i`` is ``(p[i], q[i], empathetic[i])`` in ``group[i]``."""

    p: np.ndarray
    q: np.ndarray
    empathetic: np.ndarray
    group: np.ndarray
    generation: int = 0

    @property
    def N(self) -> int:
        return len(self.p)

    def strategy(self, i: int) -> Strategy:
        kind = Kind.EMPATHETIC if self.empathetic[i] else Kind.INDEPENDENT
        return Strategy(float(self.p[i]), float(self.q[i]), kind)

    @property
    def players(self) -> list[tuple[Strategy, int]]:
        return [(self.strategy(i), int(self.group[i])) for i in range(self.N)]

    def copy(self) -> "PopulationState":
        return PopulationState(self.p.copy(), self.q.copy(), self.empathetic.copy(),
                               self.group.copy(), self.generation)

    def occupancy(self, M: int) -> np.ndarray:
        return np.bincount(self.group, minlength=M)


@dataclass
class Measurement:
    mean_offer: float
    mean_demand: float
    samples: int
    std_err_offer: float = float("nan")
    std_err_demand: float = float("nan")
    empathetic_fraction: float = float("nan")
    batch_offer: np.ndarray = field(default_factory=lambda: np.empty(0))
    batch_demand: np.ndarray = field(default_factory=lambda: np.empty(0))
    series: Optional[np.ndarray] = None  # rows of (generation, mean p, mean q)
    partial: bool = False
    generations_run: int = 0


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def init_population(params: SimParams, rng: np.random.Generator) -> PopulationState:
    """Each player is empathetic with probability ``alpha``; offers uniform on [0, 1]."""
    d = rng.random((params.N, 4))
    emp = d[:, 0] < params.alpha
    p = d[:, 1].copy()
    q = np.where(emp, d[:, 1], d[:, 2])
    group = np.minimum((d[:, 3] * params.M).astype(np.int64), params.M - 1)
    return PopulationState(p, q, emp, group, 0)


def _target_from_uniform(g: int, pattern: str, M: int, x: float) -> int:
    if pattern == "local":
        return (g - 1) % M if x < 0.5 else (g + 1) % M
    k = min(int(x * (M - 1)), M - 2)
    return k + 1 if k >= g else k


def migrate_target(parent_group: int, pattern: str, M: int, rng: np.random.Generator) -> int:
    """Destination of a migrating newborn born in ``parent_group``."""
    if M < 2:
        raise ValueError("migration needs at least two groups")
    if pattern not in PATTERNS:
        raise ValueError(f"pattern must be one of {PATTERNS}, got {pattern!r}")
    return _target_from_uniform(parent_group, pattern, M, rng.random())


def population_payoffs(state: PopulationState) -> list[float]:
    """Naive within-group payoffs, members taken in index order."""
    pay = [0.0] * state.N
    for g in np.unique(state.group):
        members = np.flatnonzero(state.group == g)
        for i, P in zip(members, group_payoffs([state.strategy(i) for i in members])):
            pay[i] = P
    return pay


def _select(fit: list[float], x: float) -> int:
    total = 0.0
    for f in fit:
        total += f
    if total <= 0.0:
        return min(int(x * len(fit)), len(fit) - 1)
    threshold = x * total
    cum = 0.0
    last = -1
    for i, f in enumerate(fit):
        if f > 0.0:
            last = i
        cum += f
        if cum > threshold and f > 0.0:
            return i
    return last


def _apply_event(state: PopulationState, params: SimParams, d_: np.ndarray) -> None:
    N, M = state.N, params.M
    fit = [fitness(P, params.omega) for P in population_payoffs(state)]
    r = _select(fit, d_[0])
    if params.exclude_reproducer_from_death:
        d = min(int(d_[1] * (N - 1)), N - 2)
        if d >= r:
            d += 1
    else:
        d = min(int(d_[1] * N), N - 1)

    if d_[2] < params.u:
        emp = bool(d_[3] < params.alpha)
        p, q = d_[4], (d_[4] if emp else d_[5])
    else:
        p, q, emp = state.p[r], state.q[r], bool(state.empathetic[r])
    g = int(state.group[r])
    if M > 1 and d_[6] < params.v:
        g = _target_from_uniform(g, params.pattern, M, d_[7])

    state.p[d], state.q[d], state.empathetic[d], state.group[d] = p, q, emp, g
    state.generation += 1


def step_generation(state: PopulationState, params: SimParams,
                    rng: np.random.Generator) -> PopulationState:
    """One birth-death event, recomputing every payoff from scratch.

    This is the slow reference path; :func:`run_simulation` uses a compiled
    incremental version that consumes the random stream identically.
    """
    new = state.copy()
    _apply_event(new, params, rng.random(_kernel.DRAWS_PER_EVENT))
    return new


def _sequential_sum(values) -> float:
    s = 0.0
    for x in values:
        s += x
    return s


def _batch_layout(samples: int, n_batches: int) -> tuple[int, int]:
    nb = max(1, min(n_batches, samples))
    return nb, max(1, samples // nb)


def _finish(acc_p, acc_q, acc_e, acc_n, series, partial, gens) -> Measurement:
    n = int(acc_n.sum())
    if n == 0:
        return Measurement(float("nan"), float("nan"), 0, partial=partial, generations_run=gens)
    keep = acc_n > 0
    bp = acc_p[keep] / acc_n[keep]
    bq = acc_q[keep] / acc_n[keep]
    nb = len(bp)
    se_p = float(np.std(bp, ddof=1) / np.sqrt(nb)) if nb > 1 else float("nan")
    se_q = float(np.std(bq, ddof=1) / np.sqrt(nb)) if nb > 1 else float("nan")
    return Measurement(
        mean_offer=_sequential_sum(acc_p) / n,
        mean_demand=_sequential_sum(acc_q) / n,
        samples=n,
        std_err_offer=se_p,
        std_err_demand=se_q,
        empathetic_fraction=_sequential_sum(acc_e) / n,
        batch_offer=bp,
        batch_demand=bq,
        series=series[:n] if series is not None else None,
        partial=partial,
        generations_run=gens,
    )


def run_reference(params: SimParams, n_batches: int = DEFAULT_BATCHES,
                  record_series: bool = False) -> Measurement:
    """Pure-Python counterpart of :func:`run_simulation`, for small regression runs."""
    rng = make_rng(params.seed)
    state = init_population(params, rng)
    nb, blen = _batch_layout(params.samples, n_batches)
    acc_p, acc_q, acc_e = np.zeros(nb), np.zeros(nb), np.zeros(nb)
    acc_n = np.zeros(nb, dtype=np.int64)
    series = np.zeros((params.samples, 3)) if record_series else None
    k = 0
    for _ in range(params.generations):
        _apply_event(state, params, rng.random(_kernel.DRAWS_PER_EVENT))
        gen = state.generation
        if gen > params.burn_in and (gen - params.burn_in) % params.sample_every == 0:
            b = min(k // blen, nb - 1)
            mp = _sequential_sum(state.p) / state.N
            mq = _sequential_sum(state.q) / state.N
            acc_p[b] += mp
            acc_q[b] += mq
            acc_e[b] += _sequential_sum(1.0 if e else 0.0 for e in state.empathetic) / state.N
            acc_n[b] += 1
            if series is not None:
                series[k] = gen, mp, mq
            k += 1
    return _finish(acc_p, acc_q, acc_e, acc_n, series, False, params.generations)


def run_simulation(params: SimParams, n_batches: int = DEFAULT_BATCHES,
                   record_series: bool = False,
                   refresh_every: int = DEFAULT_REFRESH) -> Measurement:
    """Run ``params.generations`` events and time-average the population means.

    Samples are taken after every ``sample_every``-th event past ``burn_in``.
    The standard errors come from ``n_batches`` consecutive batch means. A
    ``KeyboardInterrupt`` between chunks returns the averages so far with
    ``partial=True``.

    ``refresh_every`` sets how often the incrementally maintained payoffs are
    rebuilt from scratch; with ``refresh_every=1`` the result is bit-identical
    to :func:`run_reference`.
    """
    rng = make_rng(params.seed)
    state = init_population(params, rng)
    p, q = state.p, state.q
    emp, grp = state.empathetic.copy(), state.group
    pay = np.zeros(params.N)
    tot = np.zeros(3)
    _kernel.recompute(p, q, emp, grp, pay, tot)

    nb, blen = _batch_layout(params.samples, n_batches)
    acc_p, acc_q, acc_e = np.zeros(nb), np.zeros(nb), np.zeros(nb)
    acc_n = np.zeros(nb, dtype=np.int64)
    series = np.zeros((params.samples if record_series else 0, 3))
    pattern = _kernel.LOCAL if params.pattern == "local" else _kernel.GLOBAL

    done, k, partial = 0, 0, False
    try:
        while done < params.generations:
            n = min(CHUNK_EVENTS, params.generations - done)
            draws = rng.random((n, _kernel.DRAWS_PER_EVENT))
            k = _kernel.run_chunk(
                p, q, emp, grp, pay, tot, draws, done, params.M, params.u, params.v,
                params.alpha, params.omega, pattern, params.exclude_reproducer_from_death,
                params.burn_in, params.sample_every, refresh_every, blen,
                acc_p, acc_q, acc_e, acc_n, series, k)
            done += n
    except KeyboardInterrupt:
        log.warning("interrupted after %d of %d generations", done, params.generations)
        partial = True
    return _finish(acc_p, acc_q, acc_e, acc_n, series if record_series else None, partial, done)
