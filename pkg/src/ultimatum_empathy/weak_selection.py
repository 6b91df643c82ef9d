"""First-order (weak selection) predictions for all-empathetic populations.

The mean offer is ``1/2`` minus a correction linear in ``omega``. The correction
depends on the population structure through the migration kernel ``f(x)``,
evaluated at the ``M`` Fourier modes of the ring of groups, and through the
structure coefficients ``Psi``, ``Phi`` and ``Gamma`` built on it.

The structure coefficient conventionally written as a Greek alpha is called
``alpha1`` here so it cannot be confused with the empathy fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game_core import payoff_matrix_empathetic

PATTERNS = ("local", "global")


@dataclass(frozen=True)
class TheoryParams:
    N: int = 50
    M: int = 9
    u: float = 0.1
    v: float = 0.1
    omega: float = 0.001
    pattern: str = "global"

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if not 0.0 < self.u <= 1.0:
            raise ValueError(f"u must lie in (0, 1]; u = 0 is a pole of the weak-selection formulas (got {self.u})")
        if not 0.0 <= self.v <= 1.0:
            raise ValueError(f"v must lie in [0, 1], got {self.v}")
        if self.omega < 0.0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}, got {self.pattern!r}")


def f_kernel(x: int, M: int, pattern: str) -> float:
    """Migration kernel at mode ``x`` in ``1..M``."""
    if not 1 <= x <= M:
        raise ValueError(f"mode x must lie in 1..{M}, got {x}")
    if M == 1:
        return 1.0
    if pattern == "local":
        return math.cos(2 * math.pi * x / M)
    if pattern == "global":
        return math.fsum(math.cos(2 * math.pi * j * x / M) for j in range(1, M)) / (M - 1)
    raise ValueError(f"pattern must be one of {PATTERNS}, got {pattern!r}")


def kernel_values(M: int, pattern: str) -> list[float]:
    return [f_kernel(x, M, pattern) for x in range(1, M + 1)]


def psi(f: float, params: TheoryParams) -> tuple[float, float]:
    N, u, v = params.N, params.u, params.v
    w = v * (1 - f)
    psi1 = (1 - w) / (1 + (N - 1) * w)
    psi2 = (1 - u) * (1 - w) / (1 + (N - 1) * u + (N - 1) * (1 - u) * w)
    return psi1, psi2


def alpha1(params: TheoryParams) -> float:
    u, N = params.u, params.N
    return (1 - u) / (1 + (N - 1) * u)


def phis(f: float, params: TheoryParams) -> tuple[float, float, float, float, float]:
    N, u, v = params.N, params.u, params.v
    g = 1 - f
    d1 = 2 + (N - 2) * u + 2 * (N - 2) * (1 - u) * v / 3 * g
    # Phi_2, Phi_3 and Phi_5 share one denominator
    d235 = 2 + 2 * (N - 2) * u / 3 + (N - 2) * (2 - u) * v / 3 * g
    d4 = 1 + (N - 2) * u / 2 + (N - 2) * (1 - u) * v / 3 * g
    phi1 = (1 - u) * (2 - v * g) / d1
    phi2 = (2 - u - v * g) / d235
    phi3 = (1 - u) * (2 - v * g) / d235
    phi4 = (1 - u) * (1 - v * g) / d4
    phi5 = (2 - u) * (1 - v * g) / d235
    return phi1, phi2, phi3, phi4, phi5


def gammas(params: TheoryParams) -> tuple[float, float, float]:
    N, M = params.N, params.M
    a1 = alpha1(params)
    t1, t2, t3 = [], [], []
    for f in kernel_values(M, params.pattern):
        s1, s2 = psi(f, params)
        p1, p2, p3, p4, p5 = phis(f, params)
        t1.append(-2 * p1 * s2 - p4 * a1 + 3 * s2)
        t2.append(3 * s1 - 3 * s2 + (N - 2) * (-2 * p1 * s2 - p4 * a1 + p2 * s2 + p3 * s1 + p5 * a1))
        t3.append(3 * s1 - 3 * s2 + 2 * (2 * p1 * s2 + p4 * a1 - p2 * s2 - p3 * s1 - p5 * a1))
    g1 = (N - 1) * (N - 2) / (3 * M) * math.fsum(t1)
    g2 = (N - 1) / (3 * M) * math.fsum(t2)
    g3 = (N - 1) * (N - 2) / (3 * M) * math.fsum(t3)
    return g1, g2, g3


@dataclass(frozen=True)
class PayoffStats:
    """Averages of the empathetic grid payoff matrix ``a[i, j]`` (row player ``i``)."""

    a_diag: np.ndarray
    row_mean: np.ndarray  # mean_j a[k, j]
    col_mean: np.ndarray  # mean_j a[j, k]
    diag_mean: float
    grand_mean: float

    @property
    def S(self) -> int:
        return len(self.a_diag)

    def weighted_sums(self) -> dict[str, float]:
        """``sum_k (k-1)/(S-1) * (1/S) * stat_k`` for every statistic.

        As ``S`` grows these tend to 1/2, 1/2, 1/2, 7/24, 5/24 and 1/4.
        """
        S = self.S
        w = np.arange(S) / (S - 1) / S
        return {
            "uniform": math.fsum(w),
            "a_diag": math.fsum(w * self.a_diag),
            "diag_mean": math.fsum(w * self.diag_mean),
            "col_mean": math.fsum(w * self.col_mean),
            "row_mean": math.fsum(w * self.row_mean),
            "grand_mean": math.fsum(w * self.grand_mean),
        }


def payoff_stats_empathetic(S: int) -> PayoffStats:
    A = payoff_matrix_empathetic(S)
    return PayoffStats(
        a_diag=np.diag(A).copy(),
        row_mean=A.mean(axis=1),
        col_mean=A.mean(axis=0),
        diag_mean=float(np.diag(A).mean()),
        grand_mean=float(A.mean()),
    )


def stationary_freqs_weak(S: int, params: TheoryParams,
                          stats: PayoffStats | None = None) -> np.ndarray:
    """Average stationary frequency of each of the ``S`` empathetic grid strategies.

    The selection term carries a ``1/S`` factor so that the frequency-weighted
    mean offer has a finite limit as ``S`` grows (it is the limit taken with
    the ``1/S`` weight that reproduces :func:`mean_offer_weak`).
    """
    if stats is None:
        stats = payoff_stats_empathetic(S)
    g1, g2, g3 = gammas(params)
    u, N = params.u, params.N
    corr = (g1 * (stats.a_diag - stats.diag_mean)
            + g2 * (stats.row_mean - stats.col_mean)
            + g3 * (stats.row_mean - stats.grand_mean))
    return 1.0 / S + params.omega * (1 - u) / (N * u) * corr / S


def stationary_freq_weak(k: int, S: int, params: TheoryParams) -> float:
    """Frequency of the ``k``-th strategy (``k`` in ``1..S``, offer ``(k-1)/(S-1)``)."""
    if not 1 <= k <= S:
        raise ValueError(f"k must lie in 1..{S}, got {k}")
    return float(stationary_freqs_weak(S, params)[k - 1])


def weighted_mean_offer(freqs: np.ndarray) -> float:
    S = len(freqs)
    return math.fsum(np.arange(S) / (S - 1) * freqs)


def mean_offer_weak(params: TheoryParams) -> float:
    """Mean offer to first order in ``omega``, for either migration pattern."""
    N, M, u = params.N, params.M, params.u
    diffs = []
    for f in kernel_values(M, params.pattern):
        s1, s2 = psi(f, params)
        diffs.append(s1 - s2)
    return 0.5 - params.omega * (1 - u) * (N - 1) / (24 * M * u) * math.fsum(diffs)


def mean_offer_global_closed(params: TheoryParams) -> float:
    """Closed form of :func:`mean_offer_weak` for global migration."""
    N, M, u, v = params.N, params.M, params.u, params.v
    if M < 2:
        raise ValueError("closed form needs M >= 2; use mean_offer_weak for a single group")
    if params.pattern != "global":
        raise ValueError("closed form holds for global migration only")
    V = v * M / (M - 1)
    first = 1 / (1 + (N - 1) * u)
    second = (M - 1) * (1 - V) / ((1 + (N - 1) * V) * (1 + (N - 1) * u + (N - 1) * V - (N - 1) * u * V))
    return 0.5 - params.omega * (1 - u) * (N - 1) * N / (24 * M) * (first + second)
