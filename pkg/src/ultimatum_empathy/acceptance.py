"""Acceptance checks with pinned tolerances.

Each check returns a :class:`CriterionResult` carrying the measured value next
to its tolerance. ``run_all`` drives the ``validate`` subcommand and the
acceptance test module.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Optional

import numpy as np

from .game_core import Strategy, payoff_array, payoff_matrix_empathetic, payoff_matrix_independent, payoff_pair
from .harness.config import RunConfig
from .harness.sweep import run_sweep
from .moran_sim import SimParams, run_simulation
from .replicator import ReplicatorSystem, mean_offer_demand, stationary_distribution
from .weak_selection import (TheoryParams, mean_offer_global_closed, mean_offer_weak,
                             payoff_stats_empathetic, stationary_freqs_weak, weighted_mean_offer)


@dataclass
class CriterionResult:
    number: str
    name: str
    passed: bool
    measured: str
    tolerance: str
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag} criterion {self.number:>3} {self.name}: measured {self.measured}; "
                f"tolerance {self.tolerance} ({self.seconds:.1f}s)")


def _branch_payoff(p1, q1, p2, q2):
    """Written out branch by branch, independent of the library's sum form."""
    if p1 >= q2:
        return (1 - p1 + p2) if p2 >= q1 else 1 - p1
    return p2 if p2 >= q1 else 0.0


def payoff_oracle(n: int = 1_000_000, seed: int = 101, **_) -> CriterionResult:
    rng = np.random.default_rng(seed)
    x = rng.random((n, 4))
    # a quarter of the pairs on a coarse grid so the tie branches are exercised
    x[: n // 4] = np.round(x[: n // 4] * 4) / 4
    mismatches = 0
    for p1, q1, p2, q2 in x.tolist():
        if payoff_pair(Strategy(p1, q1), Strategy(p2, q2)) != _branch_payoff(p1, q1, p2, q2):
            mismatches += 1
    vec = payoff_array(x[:, 0], x[:, 1], x[:, 2], x[:, 3])
    oracle = np.array([_branch_payoff(*row) for row in x[:100_000].tolist()])
    mismatches += int(np.count_nonzero(vec[:100_000] != oracle))
    return CriterionResult("1", "payoff oracle equivalence", mismatches == 0,
                           f"{mismatches} mismatches over {n} pairs", "0 mismatches")


def neutral_drift(generations: int = 2_000_000, burn_in: int = 200_000, **_) -> CriterionResult:
    worst = 0.0
    parts = []
    for i, alpha in enumerate((0.0, 0.5, 1.0)):
        m = run_simulation(SimParams(N=50, M=9, u=0.1, v=0.1, alpha=alpha, omega=0.0,
                                     generations=generations, burn_in=burn_in, seed=1000 + i))
        dev = max(abs(m.mean_offer - 0.5), abs(m.mean_demand - 0.5))
        worst = max(worst, dev)
        parts.append(f"alpha={alpha:g}: ({m.mean_offer:.4f}, {m.mean_demand:.4f})")
    return CriterionResult("2", "neutral drift", worst <= 0.01,
                           f"max |mean - 0.5| = {worst:.4f} [{'; '.join(parts)}]", "<= 0.01")


def weak_selection_grid() -> list[dict]:
    """12 points: both population sizes and patterns, three mutation rates, v alternating."""
    points = []
    k = 0
    for N in (50, 100):
        for u in (0.05, 0.1, 0.2):
            v = (0.1, 0.05)[k % 2]
            k += 1
            for pattern in ("local", "global"):
                points.append(dict(N=N, M=9, u=u, v=v, pattern=pattern))
    return points


def weak_selection_agreement(generations: int = 10_000_000, replicates: int = 4,
                             workers: int = 1, **_) -> CriterionResult:
    worst_abs, worst_se = 0.0, 0.0
    ok = True
    for i, pt in enumerate(weak_selection_grid()):
        text = "\n".join(f"{k} = {v}" for k, v in pt.items())
        cfg = RunConfig.build(text=text + f"\nalpha = 1\nomega = 0.001\ngenerations = {generations}"
                              f"\nreplicates = {replicates}\nseed = {300 + i}")
        rows, _ = run_sweep(cfg, "sim", workers)
        pooled = rows[-1]
        theory = mean_offer_weak(TheoryParams(omega=0.001, **pt))
        diff = abs(pooled["mean_offer"] - theory)
        se = pooled["std_err_offer"]
        ok &= diff <= 3 * se and diff <= 0.005
        worst_abs = max(worst_abs, diff)
        worst_se = max(worst_se, diff / se)
    return CriterionResult("3", "weak-selection agreement", ok,
                           f"max |sim - theory| = {worst_abs:.5f}, max in SE units = {worst_se:.2f}",
                           "<= 3 SE and <= 0.005 at every point")


def cross_form_identity(n: int = 100, seed: int = 4, **_) -> CriterionResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        M = int(rng.integers(2, 21))
        tp = TheoryParams(N=int(rng.integers(2 * M, 501)), M=M, u=float(rng.uniform(0.01, 1.0)),
                          v=float(rng.uniform(0.0, 1.0)), omega=float(rng.uniform(0.0, 1.0)),
                          pattern="global")
        a, b = mean_offer_weak(tp), mean_offer_global_closed(tp)
        worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return CriterionResult("4", "closed form equals sum form", worst <= 1e-12,
                           f"max relative difference {worst:.2e}", "<= 1e-12")


def _closed(N, u, v, M=9, omega=0.001):
    return mean_offer_global_closed(TheoryParams(N=N, M=M, u=u, v=v, omega=omega))


def monotonicity(**_) -> CriterionResult:
    us = np.round(np.arange(0.01, 0.905, 0.01), 10)
    vs = us
    Ns = np.arange(18, 501)
    bad = 0
    checks = 0
    # full one-dimensional sweeps through the usual base point
    for N, v in ((100, 0.1),):
        p = [_closed(N, u, v) for u in us]
        bad += int(np.sum(np.diff(p) <= 0)); checks += len(p) - 1
    for N, u in ((100, 0.1),):
        p = [_closed(N, u, v) for v in vs]
        bad += int(np.sum(np.diff(p) <= 0)); checks += len(p) - 1
    p = [_closed(int(N), 0.1, 0.1) for N in Ns]
    bad += int(np.sum(np.diff(p) >= 0)); checks += len(p) - 1
    # and a coarser product grid over all three
    cu = us[::9]
    cN = Ns[::20]
    for N in cN:
        for v in cu:
            p = [_closed(int(N), u, v) for u in cu]
            bad += int(np.sum(np.diff(p) <= 0)); checks += len(p) - 1
        for u in cu:
            p = [_closed(int(N), u, v) for v in cu]
            bad += int(np.sum(np.diff(p) <= 0)); checks += len(p) - 1
    for u in cu:
        for v in cu:
            p = [_closed(int(N), u, v) for N in cN]
            bad += int(np.sum(np.diff(p) >= 0)); checks += len(p) - 1
    return CriterionResult("5", "monotone in u, v and N", bad == 0,
                           f"{bad} sign violations in {checks} differences", "0 violations")


def pattern_ratio_grids() -> Iterator[TheoryParams]:
    for u in np.round(np.arange(0.01, 0.905, 0.01), 10):
        yield from (TheoryParams(N=100, M=9, u=float(u), v=0.1, pattern=p) for p in ("local", "global"))
    for v in np.round(np.arange(0.01, 0.905, 0.01), 10):
        yield from (TheoryParams(N=100, M=9, u=0.1, v=float(v), pattern=p) for p in ("local", "global"))
    for N in range(18, 501):
        yield from (TheoryParams(N=N, M=9, u=0.1, v=0.1, pattern=p) for p in ("local", "global"))


def pattern_proximity_ratios() -> np.ndarray:
    vals = iter(mean_offer_weak(tp) for tp in pattern_ratio_grids())
    ratios = []
    for local, glob in zip(vals, vals):
        ratios.append(abs(local - glob) / abs(0.5 - glob))
    return np.array(ratios)


def pattern_proximity(**_) -> CriterionResult:
    r = pattern_proximity_ratios()
    return CriterionResult("6", "local and global migration nearly coincide", r.max() <= 0.2,
                           f"max |p_local - p_global| / |0.5 - p_global| = {r.max():.3f} "
                           f"(min {r.min():.3f})", "<= 0.2")


def integral_limits(S: int = 2000, **_) -> CriterionResult:
    sums = payoff_stats_empathetic(S).weighted_sums()
    limits = {"a_diag": 0.5, "diag_mean": 0.5, "col_mean": 7 / 24, "row_mean": 5 / 24,
              "grand_mean": 0.25}
    dev = max(abs(sums[k] - v) for k, v in limits.items())
    return CriterionResult("7", "payoff-average limits", dev <= 2e-3,
                           f"max deviation {dev:.2e} at S={S}", "<= 2e-3")


def frequency_consistency(n: int = 20, S: int = 200, seed: int = 8, **_) -> CriterionResult:
    rng = np.random.default_rng(seed)
    stats = payoff_stats_empathetic(S)
    worst_norm, worst_mean = 0.0, 0.0
    for _ in range(n):
        M = int(rng.integers(1, 13))
        tp = TheoryParams(N=int(rng.integers(max(2, 2 * M), 201)), M=M,
                          u=float(rng.uniform(0.05, 0.9)), v=float(rng.uniform(0.0, 0.5)),
                          omega=float(rng.uniform(0.0, 0.01)),
                          pattern=("local", "global")[int(rng.integers(2))])
        f = stationary_freqs_weak(S, tp, stats)
        worst_norm = max(worst_norm, abs(math.fsum(f) - 1.0))
        worst_mean = max(worst_mean, abs(weighted_mean_offer(f) - mean_offer_weak(tp)))
    ok = worst_norm <= 1e-12 and worst_mean <= 1e-3
    return CriterionResult("8", "stationary frequencies consistent with mean offer", ok,
                           f"max |sum - 1| = {worst_norm:.1e}, max |weighted mean - p| = {worst_mean:.2e}",
                           "<= 1e-12 and <= 1e-3")


def replicator_conservation(n: int = 1000, seed: int = 9, **_) -> CriterionResult:
    rng = np.random.default_rng(seed)
    mats = [payoff_matrix_empathetic(30), payoff_matrix_independent(7)]
    worst = 0.0
    for i in range(n):
        A = mats[i % 2]
        x = rng.exponential(size=A.shape[0])
        x /= x.sum()
        worst = max(worst, abs(float(np.sum(ReplicatorSystem(A, float(rng.random()))(x)))))
    worst_fixed = 0.0
    for S, layout in ((100, "empathetic"), (30, "independent")):
        dist, res = stationary_distribution(S, 1.0, layout)
        worst_fixed = max(worst_fixed, res.residual, float(np.max(np.abs(dist.freqs - 1 / len(dist.freqs)))))
    ok = worst <= 1e-12 and worst_fixed <= 1e-12
    return CriterionResult("9", "replicator conservation and u=1 fixed point", ok,
                           f"max |sum rhs| = {worst:.1e}, u=1 deviation = {worst_fixed:.1e}",
                           "<= 1e-12 each")


def _replicator_curve(layout: str, S: int, workers: int) -> list[dict]:
    cfg = RunConfig.build(text=f"layout = {layout}\nS = {S}\nu = 0.01:0.5:0.01")
    rows, _ = run_sweep(cfg, "replicator", workers)
    return rows


SHAPE_THRESHOLD = 0.35


def replicator_shapes(workers: int = 1, **_) -> CriterionResult:
    ind = _replicator_curve("independent", 30, workers)
    emp = _replicator_curve("empathetic", 100, workers)
    converged = all(r["status"] == "ok" for r in ind + emp)
    po = np.array([r["mean_offer"] for r in ind])
    qo = np.array([r["mean_demand"] for r in ind])
    mono = bool(np.all(np.diff(po) >= 0) and np.all(np.diff(qo) >= 0))
    high = po[-1] > SHAPE_THRESHOLD and qo[-1] > SHAPE_THRESHOLD
    pe = np.array([r["mean_offer"] for r in emp])
    k = int(np.argmin(pe))
    interior = 0 < k < len(pe) - 1 and pe[k] < pe[0] and pe[k] < pe[-1]
    ok = converged and mono and high and interior
    return CriterionResult(
        "10", "replicator curve shapes", ok,
        f"independent nondecreasing={mono}, (p, q) at u=0.5 = ({po[-1]:.4f}, {qo[-1]:.4f}); "
        f"empathetic minimum {pe[k]:.4f} at u={emp[k]['u']:g} vs endpoints "
        f"{pe[0]:.4f}, {pe[-1]:.4f}",
        f"monotone, both > {SHAPE_THRESHOLD} at u=0.5, interior minimum")


def sim_vs_replicator(generations: int = 10_000_000, replicates: int = 2, workers: int = 1,
                      **_) -> CriterionResult:
    worst = 0.0
    parts = []
    for i, u in enumerate((0.1, 0.3)):
        cfg = RunConfig.build(text=f"N = 100\nM = 1\nv = 0\nalpha = 0\nomega = 1\nu = {u}\n"
                                   f"generations = {generations}\nreplicates = {replicates}\n"
                                   f"seed = {700 + i}")
        pooled = run_sweep(cfg, "sim", workers)[0][-1]
        dist, _ = stationary_distribution(30, u, "independent")
        rp, rq = mean_offer_demand(dist)
        dev = max(abs(pooled["mean_offer"] - rp), abs(pooled["mean_demand"] - rq))
        worst = max(worst, dev)
        parts.append(f"u={u:g}: sim ({pooled['mean_offer']:.4f}, {pooled['mean_demand']:.4f}) "
                     f"vs replicator ({rp:.4f}, {rq:.4f})")
    return CriterionResult("11", "simulation matches replicator at strong selection", worst <= 0.05,
                           f"max deviation {worst:.4f} [{'; '.join(parts)}]", "<= 0.05")


def determinism(**_) -> CriterionResult:
    from .harness.cli import main

    runs = [
        ["theory", "--set", "u=0.05,0.2", "--set", "pattern=local,global"],
        ["simulate", "--set", "generations=20000", "--set", "replicates=3", "--set", "u=0.1,0.4",
         "--seed", "17"],
        ["replicator", "--set", "S=8", "--set", "layout=independent", "--set", "u=0.1,0.3"],
        ["sweep", "theory_vs_migration"],
    ]
    identical = 0
    with tempfile.TemporaryDirectory() as tmp:
        for k, args in enumerate(runs):
            outputs = []
            for w in (1, 2, 1):
                out = Path(tmp, f"{k}_{w}_{len(outputs)}.csv")
                code = main(args + ["--workers", str(w), "--no-timestamp", "--out", str(out)])
                outputs.append(out.read_bytes() if code == 0 else None)
            identical += outputs[0] is not None and outputs.count(outputs[0]) == 3
    return CriterionResult("12", "reruns are byte-identical across worker counts",
                           identical == len(runs), f"{identical}/{len(runs)} commands identical",
                           "all identical")


def _sim(u, alpha, omega, seed, generations=4_000_000):
    return run_simulation(SimParams(N=50, M=9, u=u, v=0.1, alpha=alpha, omega=omega,
                                    generations=generations, seed=seed))


def trend_selection(**_) -> CriterionResult:
    omegas = (0.0, 0.1, 0.5, 1.0)
    ms = [_sim(0.1, 0.5, om, 900 + i) for i, om in enumerate(omegas)]
    p = [m.mean_offer for m in ms]
    drop = p[0] - p[1]
    plateau = abs(p[3] - p[2])
    ok = drop > 0 and p[1] > p[2] - 3 * ms[2].std_err_offer and plateau < 0.5 * drop
    return CriterionResult("T1", "offer falls with selection then levels off", ok,
                           "p at omega " + ", ".join(f"{o:g}: {x:.4f}" for o, x in zip(omegas, p)),
                           "drop from 0 to 0.1 positive, |p(1) - p(0.5)| < half that drop")


def trend_low_mutation(**_) -> CriterionResult:
    a0, a1 = _sim(0.1, 0.0, 1.0, 911), _sim(0.1, 1.0, 1.0, 912)
    ok = a1.mean_offer > a0.mean_offer and a1.mean_demand > a0.mean_demand
    return CriterionResult("T2", "empathy raises offer and demand at low mutation", ok,
                           f"u=0.1: alpha=0 ({a0.mean_offer:.4f}, {a0.mean_demand:.4f}), "
                           f"alpha=1 ({a1.mean_offer:.4f}, {a1.mean_demand:.4f})",
                           "both larger with alpha=1")


def trend_high_mutation(**_) -> CriterionResult:
    a0, a1 = _sim(0.4, 0.0, 1.0, 921), _sim(0.4, 1.0, 1.0, 922)
    ok = a1.mean_offer < a0.mean_offer and a1.mean_demand > a0.mean_demand
    return CriterionResult("T3", "empathy lowers offers and raises demands at high mutation", ok,
                           f"u=0.4: alpha=0 ({a0.mean_offer:.4f}, {a0.mean_demand:.4f}), "
                           f"alpha=1 ({a1.mean_offer:.4f}, {a1.mean_demand:.4f})",
                           "offer smaller and demand larger with alpha=1")


CRITERIA: dict[str, Callable[..., CriterionResult]] = {
    "1": payoff_oracle,
    "2": neutral_drift,
    "3": weak_selection_agreement,
    "4": cross_form_identity,
    "5": monotonicity,
    "6": pattern_proximity,
    "7": integral_limits,
    "8": frequency_consistency,
    "9": replicator_conservation,
    "10": replicator_shapes,
    "11": sim_vs_replicator,
    "12": determinism,
    "T1": trend_selection,
    "T2": trend_low_mutation,
    "T3": trend_high_mutation,
}


def run_one(key: str, workers: int = 1) -> CriterionResult:
    t = time.perf_counter()
    res = CRITERIA[key](workers=workers)
    res.seconds = time.perf_counter() - t
    return res


def run_all(only: Optional[list] = None, workers: int = 1) -> Iterator[CriterionResult]:
    keys = list(CRITERIA) if not only else [str(k) for k in only]
    for key in keys:
        if key not in CRITERIA:
            raise KeyError(f"no criterion {key!r}")
        yield run_one(key, workers)
