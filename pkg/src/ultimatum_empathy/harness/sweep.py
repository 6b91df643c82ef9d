"""Parameter sweeps: task planning, seeding, parallel execution, pooling and CSV rows.

Every ``(point, replicate)`` pair is an independent task. Its seed is the first
64-bit word of ``numpy.random.SeedSequence(entropy=master_seed,
spawn_key=(point, replicate))``, so a task's stream depends only on the master
seed and its own indices. Results are merged by task index, never by
completion order, which makes the output independent of the worker count.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Optional

import numpy as np

from ..moran_sim import SimParams, run_simulation
from ..replicator import (NonConvergenceError, SolverConfig, StrategyDistribution,
                          mean_offer_demand, stationary_distribution)
from ..weak_selection import TheoryParams, mean_offer_global_closed, mean_offer_weak
from .config import RunConfig, UsageError

log = logging.getLogger(__name__)

COLUMNS = [
    "source", "point", "replicate", "pattern", "N", "M", "u", "v", "alpha", "omega",
    "S", "layout", "generations", "burn_in", "sample_every", "seed",
    "mean_offer", "mean_demand", "std_err_offer", "std_err_demand", "samples",
    "mean_offer_closed", "residual", "steps", "status",
]

SIM_KEYS = ("N", "M", "u", "v", "alpha", "omega", "pattern", "generations", "burn_in",
            "sample_every", "exclude_reproducer_from_death")
THEORY_KEYS = ("N", "M", "u", "v", "omega", "pattern")
SOLVER_KEYS = ("method", "tol", "max_steps", "damping")


def task_seed(master_seed: int, point: int, replicate: int) -> int:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(point, replicate))
    return int(ss.generate_state(1, np.uint64)[0])


def sweep_points(cfg: RunConfig) -> list[dict[str, Any]]:
    """Cartesian product of the axes, first axis varying slowest."""
    base = cfg.base()
    axes = cfg.axes
    names = [name for name, _ in axes]
    points = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        point = dict(base)
        point.update(zip(names, combo))
        points.append(point)
    return points


@dataclass
class Task:
    index: int
    point: int
    replicate: int
    source: str
    settings: dict


@dataclass
class TaskResult:
    index: int
    row: dict
    batch_offer: Optional[np.ndarray] = None
    batch_demand: Optional[np.ndarray] = None


def _sim_params(settings: dict, seed: int) -> SimParams:
    kw = {k: settings[k] for k in SIM_KEYS}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SimParams(seed=seed, **kw)


def plan(cfg: RunConfig, source: str) -> list[Task]:
    """Expand the configuration into tasks, validating every point up front."""
    points = sweep_points(cfg)
    reps = cfg.get("replicates") if source == "sim" else 1
    if reps < 1:
        raise UsageError("replicates must be >= 1")
    budget = cfg.get("max_tasks")
    if len(points) * reps > budget:
        raise UsageError(f"sweep has {len(points)} points x {reps} replicates = "
                         f"{len(points) * reps} tasks, over max_tasks={budget}")
    master = cfg.get("seed")
    if not 0 <= master < 2**64:
        raise UsageError(f"seed must be an unsigned 64-bit integer, got {master}")
    tasks = []
    for i, settings in enumerate(points):
        try:
            if source == "sim":
                _sim_params(settings, 0)
            elif source == "weak_theory":
                TheoryParams(**{k: settings[k] for k in THEORY_KEYS})
            else:
                if settings["layout"] not in ("empathetic", "independent"):
                    raise ValueError(f"layout must be empathetic or independent, got {settings['layout']!r}")
                if settings["S"] < 2:
                    raise ValueError(f"S must be >= 2, got {settings['S']}")
                if not 0.0 <= settings["u"] <= 1.0:
                    raise ValueError(f"u must lie in [0, 1], got {settings['u']}")
                SolverConfig(**{k: settings[k] for k in SOLVER_KEYS})
        except ValueError as exc:
            raise UsageError(f"point {i}: {exc}") from None
        for r in range(reps):
            tasks.append(Task(len(tasks), i, r, source, settings))
    return tasks


def _blank_row(task: Task) -> dict:
    return {c: None for c in COLUMNS} | {"source": task.source, "point": task.point}


def run_task(task: Task) -> TaskResult:
    s = task.settings
    row = _blank_row(task)
    if task.source == "sim":
        seed = task_seed(s["seed"], task.point, task.replicate)
        params = _sim_params(s, seed)
        m = run_simulation(params, n_batches=s["batches"])
        row.update({k: getattr(params, k) for k in SIM_KEYS if k in COLUMNS})
        row.update(replicate=task.replicate, seed=seed, mean_offer=m.mean_offer,
                   mean_demand=m.mean_demand, std_err_offer=m.std_err_offer,
                   std_err_demand=m.std_err_demand, samples=m.samples,
                   status="partial" if m.partial else "ok")
        return TaskResult(task.index, row, m.batch_offer, m.batch_demand)

    if task.source == "weak_theory":
        tp = TheoryParams(**{k: s[k] for k in THEORY_KEYS})
        p = mean_offer_weak(tp)
        closed = mean_offer_global_closed(tp) if tp.pattern == "global" and tp.M >= 2 else None
        row.update({k: s[k] for k in THEORY_KEYS})
        row.update(mean_offer=p, mean_demand=p, mean_offer_closed=closed, status="ok")
        return TaskResult(task.index, row)

    config = SolverConfig(**{k: s[k] for k in SOLVER_KEYS})
    row.update(u=s["u"], S=s["S"], layout=s["layout"])
    try:
        dist, res = stationary_distribution(s["S"], s["u"], s["layout"], config)
        offer, demand = mean_offer_demand(dist)
        row.update(mean_offer=offer, mean_demand=demand, residual=res.residual,
                   steps=res.steps, status="ok")
    except NonConvergenceError as exc:
        offer, demand = mean_offer_demand(StrategyDistribution(exc.best, s["layout"], s["S"]))
        row.update(mean_offer=offer, mean_demand=demand, residual=exc.residual,
                   steps=exc.steps, status="nonconverged")
    return TaskResult(task.index, row)


def execute(tasks: list[Task], workers: int = 1) -> tuple[list[TaskResult], bool]:
    """Run tasks and return results in task order plus an ``interrupted`` flag.

    On interruption the results finished so far are returned; the remaining
    tasks are dropped.
    """
    results: list[TaskResult] = []
    interrupted = False
    if workers <= 1 or len(tasks) <= 1:
        try:
            for t in tasks:
                res = run_task(t)
                results.append(res)
                if res.row["status"] == "partial":
                    interrupted = True
                    break
        except KeyboardInterrupt:
            interrupted = True
        return results, interrupted

    pool = ProcessPoolExecutor(max_workers=workers)
    futures = [pool.submit(run_task, t) for t in tasks]
    try:
        for fut in futures:
            res = fut.result()
            results.append(res)
            if res.row["status"] == "partial":
                interrupted = True
                break
    except KeyboardInterrupt:
        interrupted = True
    finally:
        pool.shutdown(wait=not interrupted, cancel_futures=True)
    return results, interrupted


def pooled_rows(results: list[TaskResult]) -> list[dict]:
    """Replicate rows followed, per point, by one pooled row.

    The pooled mean is the mean of the replicate means (all replicates have the
    same sample count); its standard error comes from all batch means together.
    """
    out = []
    for point, group in itertools.groupby(results, key=lambda r: r.row["point"]):
        group = list(group)
        out.extend(r.row for r in group)
        if group[0].row["source"] != "sim":
            continue
        row = dict(group[0].row)
        bo = np.concatenate([r.batch_offer for r in group])
        bd = np.concatenate([r.batch_demand for r in group])
        n = len(bo)
        row.update(
            replicate="pooled", seed=None,
            mean_offer=float(np.mean([r.row["mean_offer"] for r in group])),
            mean_demand=float(np.mean([r.row["mean_demand"] for r in group])),
            std_err_offer=float(np.std(bo, ddof=1) / np.sqrt(n)) if n > 1 else float("nan"),
            std_err_demand=float(np.std(bd, ddof=1) / np.sqrt(n)) if n > 1 else float("nan"),
            samples=sum(r.row["samples"] for r in group),
            status="partial" if any(r.row["status"] == "partial" for r in group) else "ok",
        )
        out.append(row)
    return out


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def to_csv(rows: list[dict], timestamp: bool = True) -> str:
    buf = io.StringIO()
    if timestamp:
        buf.write(f"# generated_at {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in COLUMNS])
    return buf.getvalue()


def run_sweep(cfg: RunConfig, source: str, workers: int = 1) -> tuple[list[dict], bool]:
    tasks = plan(cfg, source)
    log.info("%d tasks on %d worker(s)", len(tasks), workers)
    results, interrupted = execute(tasks, workers)
    return pooled_rows(results), interrupted
