"""Payoff kernels for the two-role ultimatum game.

Every pair of players plays the game twice, once in each role. An offer ``p``
is accepted by a responder with minimum demand ``q`` iff ``p >= q``; the stake
is fixed at 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np


class Kind(str, Enum):
    EMPATHETIC = "empathetic"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class Strategy:
    """An (offer, demand) pair. Empathetic strategies have ``p == q``."""

    p: float
    q: float
    kind: Kind = Kind.INDEPENDENT

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ValueError(f"offer and demand must lie in [0, 1], got ({self.p}, {self.q})")
        if self.kind is Kind.EMPATHETIC and self.p != self.q:
            raise ValueError(f"empathetic strategy requires p == q, got ({self.p}, {self.q})")

    @classmethod
    def empathetic(cls, x: float) -> "Strategy":
        return cls(x, x, Kind.EMPATHETIC)


def payoff_pair(s1: Strategy, s2: Strategy) -> float:
    """Total payoff to ``s1`` from one game as proposer and one as responder."""
    total = 0.0
    if s1.p >= s2.q:
        total += 1.0 - s1.p
    if s2.p >= s1.q:
        total += s2.p
    return total


def payoff_array(p1, q1, p2, q2) -> np.ndarray:
    """Broadcasting version of :func:`payoff_pair` over arrays of offers/demands."""
    p1, q1, p2, q2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (p1, q1, p2, q2)))
    return np.where(p1 >= q2, 1.0 - p1, 0.0) + np.where(p2 >= q1, p2, 0.0)


def group_payoffs(strategies: Sequence[Strategy]) -> list[float]:
    """Payoff of every member of one group against all *other* members.

    Partners are summed in list order, which the simulation engine relies on
    for bit-exact agreement between its reference and fast paths.
    """
    n = len(strategies)
    out = []
    for i in range(n):
        total = 0.0
        for j in range(n):
            if j != i:
                total += payoff_pair(strategies[i], strategies[j])
        out.append(total)
    return out


def fitness(P: float, omega: float) -> float:
    return (1.0 - omega) + omega * P


def offer_grid(S: int) -> np.ndarray:
    """The ``S`` equally spaced offers ``0, 1/(S-1), ..., 1``."""
    if S < 2:
        raise ValueError(f"grid resolution S must be >= 2, got {S}")
    return np.linspace(0.0, 1.0, S)


def payoff_matrix_empathetic(S: int) -> np.ndarray:
    """``S x S`` matrix of payoffs between empathetic grid strategies."""
    o = offer_grid(S)
    return payoff_array(o[:, None], o[:, None], o[None, :], o[None, :])


def independent_index(i: int, j: int, S: int) -> int:
    """Row-major position of (offer index ``i``, demand index ``j``)."""
    return i * S + j


def independent_grid(S: int) -> tuple[np.ndarray, np.ndarray]:
    """Offers and demands of the ``S**2`` independent strategies in row-major order."""
    o = offer_grid(S)
    return np.repeat(o, S), np.tile(o, S)


def payoff_matrix_independent(S: int) -> np.ndarray:
    """``S**2 x S**2`` payoff matrix, indexed by ``offer_index * S + demand_index``."""
    p, q = independent_grid(S)
    return payoff_array(p[:, None], q[:, None], p[None, :], q[None, :])
