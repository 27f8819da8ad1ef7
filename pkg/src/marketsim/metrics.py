"""Post-processing of run records: utility rate, efficiency, windowed fairness."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import RunRecord, Task


def mean_utility_per_host(record: RunRecord, n_users: Optional[int] = None,
                          horizon: Optional[float] = None) -> float:
    """Aggregate utility divided by (users * seconds)."""
    n = record.n_users if n_users is None else n_users
    h = record.horizon if horizon is None else horizon
    if n < 1 or h <= 0:
        return 0.0
    return record.total_utility / (n * h)


def utility_bound(tasks: Sequence[Task]) -> float:
    """Sum of value * size over every arrived task: a cheap upper bound on utility."""
    return math.fsum(t.value * t.size for t in tasks)


def efficiency(record: RunRecord, bound: Optional[float] = None) -> float:
    """Achieved utility over ``bound`` (default: :func:`utility_bound` of the arrivals).

    Returns 0.0 when the bound is zero, i.e. when no utility was on offer.
    """
    if bound is None:
        bound = utility_bound(record.tasks)
    if bound <= 0:
        return 0.0
    return min(1.0, record.total_utility / bound)


def _release(arrival: float, dt: float) -> float:
    # the step at whose start the engine enqueues the task
    k = math.floor(arrival / dt)
    while arrival >= (k + 1) * dt:
        k += 1
    while k > 0 and arrival < k * dt:
        k -= 1
    return k * dt


def edf_feasible(jobs: Sequence[tuple[float, float, float]], capacity: float = 1.0,
                 tol: float = 1e-9) -> bool:
    """Can every (release, work, deadline) job finish on one preemptive server?

    Preemptive earliest-deadline-first is optimal for this question, so an
    exact event-driven EDF run decides it.
    """
    pending = sorted(jobs)
    ready: list[list[float]] = []  # [deadline, remaining work]
    t = 0.0
    k = 0
    while k < len(pending) or ready:
        if not ready:
            t = max(t, pending[k][0])
        while k < len(pending) and pending[k][0] <= t:
            r, w, d = pending[k]
            ready.append([d, w])
            k += 1
        ready.sort()
        job = ready[0]
        next_release = pending[k][0] if k < len(pending) else math.inf
        finish = t + job[1] / capacity
        if finish <= next_release:
            if finish > job[0] + tol:
                return False
            t = finish
            ready.pop(0)
        else:
            job[1] -= (next_release - t) * capacity
            t = next_release
    return True


def optimal_utility(tasks: Sequence[Task], dt: Optional[float] = None,
                    capacity: float = 1.0, horizon: float = math.inf) -> float:
    """Best achievable utility for one user's tasks on a dedicated server.

    Enumerates every subset of tasks and keeps the most valuable one that an
    EDF schedule can finish on time. With ``dt`` the releases are moved to
    the start of the step in which they arrive, matching what a fixed-step
    simulation can exploit, so the result bounds any such run from above.
    Exponential in ``len(tasks)``; meant for a handful of tasks.
    """
    if len(tasks) > 16:
        raise ValueError("brute-force optimum is limited to 16 tasks")
    jobs = []
    for t in tasks:
        r = t.arrival_time if dt is None else _release(t.arrival_time, dt)
        jobs.append((r, t.size, min(t.deadline, horizon), t.value * t.size))
    best = 0.0
    for n in range(len(jobs), 0, -1):
        for subset in itertools.combinations(jobs, n):
            gain = math.fsum(j[3] for j in subset)
            if gain <= best:
                continue
            if edf_feasible([j[:3] for j in subset], capacity):
                best = gain
    return best


@dataclass(frozen=True)
class FairnessWindow:
    start: float
    length: float
    usage: tuple[float, ...]
    demand: tuple[int, ...]


def fairness_windows(record: RunRecord) -> list[FairnessWindow]:
    L = record.window_length
    return [FairnessWindow(w * L, L, tuple(u), tuple(d))
            for w, (u, d) in enumerate(zip(record.window_usage, record.window_demand))]


def fairness_ratio(windows: Sequence[FairnessWindow], i: int, j: int,
                   ) -> tuple[list[float], Optional[float]]:
    """Per-window usage ratio of user ``i`` to user ``j``, plus the overall ratio.

    Windows where either user had nothing to run (or ``j`` received nothing)
    are skipped. The overall ratio is total usage of ``i`` over total usage
    of ``j`` across the kept windows, or None if none were kept.
    """
    ratios = []
    tot_i = tot_j = 0.0
    for w in windows:
        if not w.demand[i] or not w.demand[j] or w.usage[j] <= 0:
            continue
        ratios.append(w.usage[i] / w.usage[j])
        tot_i += w.usage[i]
        tot_j += w.usage[j]
    return ratios, (tot_i / tot_j if tot_j > 0 else None)
