"""Replicator dynamics with uniform mutation on discretised strategy sets.

For a payoff matrix ``A`` over ``n`` strategies the flow is::

    dx_i/dt = (1 - u) * x_i * pi_i / phi + u / n - x_i,   pi = A x,  phi = x . pi

With ``n = S`` this is the all-empathetic system and with ``n = S**2`` the
independent one (strategies in row-major ``offer_index * S + demand_index``
order). ``pi`` includes the strategy's payoff against its own type, the usual
infinite-population convention.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .game_core import (independent_grid, offer_grid, payoff_matrix_empathetic,
                        payoff_matrix_independent)

log = logging.getLogger(__name__)

LAYOUTS = ("empathetic", "independent")
OSCILLATION_STEPS = 20  # consecutive reversed steps that count as oscillation


@dataclass
class StrategyDistribution:
    freqs: np.ndarray
    layout: str
    S: int

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        expected = self.S if self.layout == "empathetic" else self.S ** 2
        if self.freqs.shape != (expected,):
            raise ValueError(f"{self.layout} layout with S={self.S} needs {expected} frequencies, "
                             f"got shape {self.freqs.shape}")

    @classmethod
    def uniform(cls, S: int, layout: str) -> "StrategyDistribution":
        n = S if layout == "empathetic" else S ** 2
        return cls(np.full(n, 1.0 / n), layout, S)


class ReplicatorSystem:
    """Right-hand side and Jacobian of the mutation-augmented replicator flow."""

    def __init__(self, A: np.ndarray, u: float):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"payoff matrix must be square, got shape {A.shape}")
        if not 0.0 <= u <= 1.0:
            raise ValueError(f"u must lie in [0, 1], got {u}")
        self.A = A
        self.u = u
        self.n = A.shape[0]
        self.degenerate = False  # set when phi == 0 was met

    def generation_map(self, x: np.ndarray) -> np.ndarray:
        pi = self.A @ x
        phi = x @ pi
        if phi > 0.0:
            sel = x * pi / phi
        else:
            # zero mean payoff: fall back to pure mutation-drift flow
            self.degenerate = True
            sel = x
        return (1.0 - self.u) * sel + self.u / self.n

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.generation_map(x) - x

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        pi = self.A @ x
        phi = x @ pi
        dphi = pi + self.A.T @ x
        J = (np.diag(pi / phi) + x[:, None] * self.A / phi
             - np.outer(x * pi, dphi) / phi ** 2)
        J *= 1.0 - self.u
        J[np.diag_indices(self.n)] -= 1.0
        return J


def rhs_empathetic(x: np.ndarray, u: float, A: np.ndarray) -> np.ndarray:
    if A.shape != (len(x), len(x)):
        raise ValueError(f"payoff matrix shape {A.shape} does not match {len(x)} strategies")
    return ReplicatorSystem(A, u)(x)


def rhs_independent(x: np.ndarray, u: float, A: np.ndarray) -> np.ndarray:
    S = math.isqrt(len(x))
    if S * S != len(x):
        raise ValueError(f"independent layout needs a square number of strategies, got {len(x)}")
    if A.shape != (len(x), len(x)):
        raise ValueError(f"payoff matrix shape {A.shape} does not match {len(x)} strategies")
    return ReplicatorSystem(A, u)(x)


@dataclass
class SolverConfig:
    method: str = "damped_fixed_point"  # or "ode_integration"
    tol: float = 1e-10
    max_steps: int = 5_000_000
    damping: float = 0.5
    newton_start: float = 1e-6  # residual at which a Newton polish is first tried
    check_stability: bool = True

    def __post_init__(self):
        if self.method not in ("damped_fixed_point", "ode_integration"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class SolveResult:
    x: np.ndarray
    steps: int
    residual: float
    method: str
    newton: bool = False
    max_eigenvalue: float = float("nan")


class NonConvergenceError(RuntimeError):
    def __init__(self, msg: str, best: np.ndarray, residual: float, steps: int):
        super().__init__(msg)
        self.best = best
        self.residual = residual
        self.steps = steps


def _residual(rhs, x) -> float:
    return float(np.max(np.abs(rhs(x))))


def _fd_jacobian(rhs, x, h=1e-7):
    f0 = rhs(x)
    J = np.empty((len(x), len(x)))
    for j in range(len(x)):
        xp = x.copy()
        xp[j] += h
        J[:, j] = (rhs(xp) - f0) / h
    return J


def _newton(rhs, jac, x, tol, max_iter=30):
    """Newton polish; returns the root or ``None`` if it leaves the simplex or stalls."""
    y = x.copy()
    for _ in range(max_iter):
        F = rhs(y)
        r = float(np.max(np.abs(F)))
        if r <= tol * 1e-2:
            break
        try:
            y = y - np.linalg.solve(jac(y), F)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(y)) or y.min() < -1e-12:
            return None
    y = np.clip(y, 0.0, None)
    y /= y.sum()
    return y if _residual(rhs, y) <= tol else None


def _max_eigenvalue(jac, x) -> float:
    return float(np.max(np.linalg.eigvals(jac(x)).real))


def solve_stationary(rhs: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
                     config: Optional[SolverConfig] = None,
                     jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> SolveResult:
    """Follow the flow from ``x0`` until ``max|rhs(x)| <= tol``.

    The damped fixed-point iteration ``x <- x + d * rhs(x)`` is the generation
    map for ``d = 1``. Near convergence the iteration slows down badly for
    small mutation rates, so once the residual is below ``newton_start`` a
    Newton polish is tried. The polished point is kept only if it stays on the
    simplex and is linearly stable, i.e. it is the attractor the iteration
    was heading to; otherwise iterating resumes. When successive steps keep
    pointing in opposite directions (the map overshoots and oscillates) the
    solver switches to adaptive explicit integration of the flow.
    """
    config = config or SolverConfig()
    if jacobian is None:
        jacobian = getattr(rhs, "jacobian", None) or (lambda y: _fd_jacobian(rhs, y))
    x = np.asarray(x0, dtype=float).copy()
    x /= x.sum()
    method = config.method
    best_x, best_r = x.copy(), math.inf
    newton_at = config.newton_start
    flips = 0
    prev_F = None
    steps = 0

    while steps < config.max_steps:
        F = rhs(x)
        r = float(np.max(np.abs(F)))
        if r < best_r:
            best_x, best_r = x.copy(), r
        if r <= config.tol:
            break
        if r <= newton_at:
            y = _newton(rhs, jacobian, x, config.tol)
            if y is not None:
                lam = _max_eigenvalue(jacobian, y) if config.check_stability else float("nan")
                if not config.check_stability or lam < 0.0:
                    return SolveResult(y, steps, _residual(rhs, y), method, True, lam)
                log.debug("rejected unstable Newton point (max eigenvalue %.3g)", lam)
            newton_at /= 10.0
        if method == "damped_fixed_point":
            flips = flips + 1 if prev_F is not None and F @ prev_F < 0.0 else 0
            prev_F = F
            if flips >= OSCILLATION_STEPS:
                log.info("fixed-point map oscillating at step %d; switching to ODE integration", steps)
                method = "ode_integration"
        if method == "damped_fixed_point":
            step = x + config.damping * F
            if step.min() < -1e-12:
                raise NonConvergenceError("iterate left the simplex", best_x, best_r, steps)
            x = np.clip(step, 0.0, None)
            steps += 1
        else:
            sol = solve_ivp(lambda t, y: rhs(y), (0.0, 50.0), x, method="DOP853",
                            rtol=1e-12, atol=1e-15)
            x = np.clip(sol.y[:, -1], 0.0, None)
            steps += sol.t.size
        x /= x.sum()
    else:
        raise NonConvergenceError(f"no convergence within {config.max_steps} steps "
                                  f"(best residual {best_r:.3g})", best_x, best_r, steps)

    lam = _max_eigenvalue(jacobian, x) if config.check_stability else float("nan")
    return SolveResult(x, steps, r, method, False, lam)


def stationary_distribution(S: int, u: float, layout: str,
                            config: Optional[SolverConfig] = None,
                            A: Optional[np.ndarray] = None) -> tuple[StrategyDistribution, SolveResult]:
    """Stationary state reached from the uniform start for one ``(S, u, layout)``."""
    if A is None:
        A = payoff_matrix_empathetic(S) if layout == "empathetic" else payoff_matrix_independent(S)
    system = ReplicatorSystem(A, u)
    x0 = StrategyDistribution.uniform(S, layout).freqs
    res = solve_stationary(system, x0, config)
    return StrategyDistribution(res.x, layout, S), res


def mean_offer_demand(dist: StrategyDistribution) -> tuple[float, float]:
    x = dist.freqs
    if dist.layout == "empathetic":
        m = math.fsum(offer_grid(dist.S) * x)
        return m, m
    p, q = independent_grid(dist.S)
    return math.fsum(p * x), math.fsum(q * x)
