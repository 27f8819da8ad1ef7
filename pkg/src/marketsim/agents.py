"""User behavior policies.

Every timestep each user picks one task to run and declares a number: a
scheduler weight under proportional share, a spending rate (credits/second)
under the market, or a per-unit willingness to pay under a fixed price.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .core import MARKET_STRATEGIC, OBEDIENT, STRATEGIC, Task, UserState


@dataclass(frozen=True, slots=True)
class Action:
    task_id: Optional[int] = None
    declared: float = 0.0


IDLE = Action()


def select_task(queue: Iterable[Task], now: float = 0.0) -> Optional[Task]:
    """Most valuable task; ties go to the earlier deadline, then the lower id."""
    best = None
    for t in queue:
        if best is None or (-t.value, t.deadline, t.id) < (-best.value, best.deadline, best.id):
            best = t
    return best


def select_oldest(queue: Iterable[Task], now: float = 0.0) -> Optional[Task]:
    """FIFO variant: earliest arrival, then lower id."""
    return min(queue, key=lambda t: (t.arrival_time, t.id), default=None)


def obedient_action(user: UserState, now: float) -> Action:
    task = select_task(user.queue, now)
    if task is None:
        return IDLE
    return Action(task.id, task.value)


def strategic_max_action(user: UserState, now: float, max_weight: float = 1.0,
                         fifo: bool = False) -> Action:
    task = (select_oldest if fifo else select_task)(user.queue, now)
    if task is None:
        return IDLE
    return Action(task.id, max_weight)


def market_rate(balance: float, value: float, deadline: float, now: float, dt: float) -> float:
    """Credits/second a market-strategic user spends on a task.

    (balance * value) / (deadline - now), clamped to [0, balance / dt].
    """
    left = deadline - now
    if left <= 0 or balance <= 0:
        return 0.0
    rate = balance * value / left
    cap = balance / dt
    return rate if rate < cap else cap


def market_bid_action(user: UserState, now: float, dt: float) -> Action:
    task = select_task(user.queue, now)
    if task is None:
        return IDLE
    return Action(task.id, market_rate(user.balance, task.value, task.deadline, now, dt))


def act(user: UserState, now: float, dt: float, max_weight: float = 1.0) -> Action:
    """Dispatch on ``user.behavior``."""
    if user.behavior == OBEDIENT:
        return obedient_action(user, now)
    if user.behavior == STRATEGIC:
        return strategic_max_action(user, now, max_weight)
    if user.behavior == MARKET_STRATEGIC:
        return market_bid_action(user, now, dt)
    raise ValueError(f"unknown behavior {user.behavior!r}")
