"""Fixed-timestep simulation of one CPU server shared by several users.

Each step of length ``dt`` starting at ``clock`` runs, in this order:

1. enqueue tasks arriving in [clock, clock + dt)
2. drop tasks whose deadline is <= clock (counted as expired)
3. every user picks a task and declares a weight / bid
4. the mechanism turns declarations into shares
5. running tasks accrue share * capacity * dt, capped at what they still need
6. tasks reaching their size complete (completion time interpolated inside the step)
7. charges and income (market and fixed-price modes)
8. credit redistribution when an interval boundary is crossed
9. per-window bookkeeping
"""

from __future__ import annotations

from typing import Optional, Sequence

from .agents import market_rate, select_oldest, select_task
from .core import (FIXED_PRICE, MARKET_PS, MARKET_STRATEGIC, OBEDIENT, PS, STRATEGIC,
                   RunRecord, SimConfig, Task, UserState, empty_record, task_utility)
from .mechanisms import (charge_and_income, fixed_price_allocate, market_allocate,
                         proportional_share_allocate, redistribute)
from .workload import generate_tasks


class Simulation:
    """Mutable state of one run: the clock, the users and the record being built.

    ``arrivals`` overrides the generated workload with explicit per-user task
    lists (sorted by arrival time); tests use it to pin scenarios.
    """

    def __init__(self, cfg: SimConfig, arrivals: Optional[Sequence[Sequence[Task]]] = None):
        self.cfg = cfg
        n = cfg.n_users
        behaviors = cfg.behaviors()
        incomes = cfg.income_rates()
        self.users = [UserState(i, behaviors[i], incomes[i], cfg.initial_balance)
                      for i in range(n)]
        if arrivals is None:
            arrivals = [generate_tasks(cfg, i) for i in range(n)]
        elif len(arrivals) != n:
            raise ValueError(f"expected {n} arrival lists, got {len(arrivals)}")
        self.arrivals = [sorted(a, key=lambda t: t.arrival_time) for a in arrivals]
        self.step_index = 0
        self.n_steps = cfg.n_steps
        self.record = empty_record(n, cfg.horizon, cfg.fairness_window,
                                   [u.balance for u in self.users])
        self.last_shares: list[float] = [0.0] * n
        self.last_used: list[float] = [0.0] * n
        self.last_forfeit = False

        self._next = [0] * n
        self._next_arrival = [a[0].arrival_time if a else float("inf") for a in self.arrivals]
        self._selected: list[Optional[Task]] = [None] * n
        self._min_deadline = [float("inf")] * n
        self._fifo = [cfg.strategic_selection == "fifo" and b == STRATEGIC for b in behaviors]
        self._codes = [(OBEDIENT, STRATEGIC, MARKET_STRATEGIC).index(b) for b in behaviors]
        self._dynamic = cfg.mechanism != PS or MARKET_STRATEGIC in behaviors
        self._stale = True
        self._cache: tuple = ()
        self.last_declared: list[float] = [0.0] * n
        self._redistribute_every = max(1, round(cfg.redistribution_interval / cfg.dt))

    @property
    def clock(self) -> float:
        return self.step_index * self.cfg.dt

    @property
    def finished(self) -> bool:
        return self.step_index >= self.n_steps

    def _refresh(self, i: int) -> None:
        q = self.users[i].queue
        self._selected[i] = select_oldest(q) if self._fifo[i] else select_task(q)
        self._min_deadline[i] = min((t.deadline for t in q), default=float("inf"))

    def step(self) -> None:
        """Advance the clock by one ``dt``."""
        if self.finished:
            raise RuntimeError("simulation already reached its horizon")
        cfg = self.cfg
        dt = cfg.dt
        k = self.step_index
        clock = k * dt
        end = (k + 1) * dt
        rec = self.record
        users = self.users
        n = len(users)

        # (1) arrivals, (2) expiry
        stale = self._stale
        for i, user in enumerate(users):
            dirty = False
            if self._next_arrival[i] < end:
                arr = self.arrivals[i]
                j = self._next[i]
                while j < len(arr) and arr[j].arrival_time < end:
                    user.queue.append(arr[j])
                    rec.tasks.append(arr[j])
                    rec.arrived += 1
                    j += 1
                self._next[i] = j
                self._next_arrival[i] = arr[j].arrival_time if j < len(arr) else float("inf")
                dirty = True
            if self._min_deadline[i] <= clock:
                keep = []
                for t in user.queue:
                    if t.deadline <= clock:
                        rec.expired += 1
                    else:
                        keep.append(t)
                user.queue = keep
                dirty = True
            if dirty:
                self._refresh(i)
                stale = True

        # (3) declarations, (4) allocation; static policies under plain PS
        # only change their declarations when some queue changes
        mech = cfg.mechanism
        if stale or self._dynamic:
            running = list(self._selected)
            declared = [0.0] * n
            codes = self._codes
            for i, task in enumerate(running):
                if task is None:
                    continue
                code = codes[i]
                if code == 0:
                    declared[i] = task.value
                elif code == 1:
                    declared[i] = cfg.max_weight
                else:
                    declared[i] = market_rate(users[i].balance, task.value, task.deadline,
                                              clock, dt)
            charge_rates = declared
            if mech == PS:
                shares = proportional_share_allocate(declared)
            elif mech == MARKET_PS:
                shares = market_allocate(declared)
            elif mech == FIXED_PRICE:
                budgets = [u.balance / dt for u in users]
                winner, rate = fixed_price_allocate(cfg.price, declared, cfg.capacity, budgets)
                shares = [0.0] * n
                charge_rates = [0.0] * n
                if winner is not None:
                    shares[winner] = 1.0
                    charge_rates[winner] = rate
            else:  # pragma: no cover - SimConfig validates
                raise ValueError(mech)
            active = [t is not None for t in running]
            self._cache = (running, active, declared, shares, charge_rates)
            self._stale = False
        else:
            running, active, declared, shares, charge_rates = self._cache
        self.last_declared = declared

        # (5) accrual, (6) completion, per-window usage
        w = int(((k + 0.5) * dt) // cfg.fairness_window)
        while len(rec.window_usage) <= w:
            rec.window_usage.append([0.0] * n)
            rec.window_demand.append([0] * n)
        usage = rec.window_usage[w]
        demand = rec.window_demand[w]
        cap_dt = cfg.capacity * dt
        used = [0.0] * n
        forfeit = False
        for i, task in enumerate(running):
            if task is None:
                continue
            demand[i] += 1
            share = shares[i]
            if share <= 0:
                continue
            got = share * cap_dt
            need = task.size - task.accumulated
            user = users[i]
            if got >= need:
                got = need
                forfeit = forfeit or share * cap_dt > need
                task.accumulated = task.size
                task.completed_at = clock + dt * (need / (share * cap_dt))
                u = task_utility(task)
                if u > 0:
                    rec.completed += 1
                    user.cumulative_utility += u
                else:
                    rec.expired += 1
                user.queue.remove(task)
                self._refresh(i)
                self._stale = True
            else:
                task.accumulated += got
            used[i] = got
            usage[i] += got
            user.cumulative_resources += got

        # (7) economy
        if mech != PS:
            charge_and_income(users, charge_rates, dt, active)

        # (8) redistribution
        self.step_index = k + 1
        if cfg.redistribution_tax > 0 and self.step_index % self._redistribute_every == 0:
            before = [u.balance for u in users]
            after = redistribute(before, cfg.redistribution_tax)
            for u, b0, b1 in zip(users, before, after):
                u.balance = b1
                rec.redistributed += abs(b1 - b0)

        # (9) bookkeeping
        rec.delivered += sum(used)
        self.last_shares = shares
        self.last_used = used
        self.last_forfeit = forfeit

    def finalize(self) -> RunRecord:
        rec = self.record
        rec.utility = [u.cumulative_utility for u in self.users]
        rec.resources = [u.cumulative_resources for u in self.users]
        rec.spent = [u.spent for u in self.users]
        rec.earned = [u.earned for u in self.users]
        rec.final_balances = [u.balance for u in self.users]
        rec.pending = sum(len(u.queue) for u in self.users)
        return rec

    def run(self) -> RunRecord:
        while not self.finished:
            self.step()
        return self.finalize()


def run(cfg: SimConfig, arrivals: Optional[Sequence[Sequence[Task]]] = None) -> RunRecord:
    """Execute ``cfg.n_steps`` steps and return the finished record."""
    cfg.validate()
    return Simulation(cfg, arrivals).run()
