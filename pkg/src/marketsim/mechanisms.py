"""Allocation rules and the credit economy.

All functions here are pure: they take per-user weights, bids or balances
and return new lists. Shares are fractions of server capacity for one step.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

from .core import UserState


def proportional_share_allocate(weights: Sequence[float]) -> list[float]:
    """Give user i the fraction w_i / sum(w); idle the server when sum(w) == 0."""
    total = math.fsum(weights)
    if total <= 0:
        return [0.0] * len(weights)
    return [w / total if w > 0 else 0.0 for w in weights]


def market_allocate(bids: Sequence[float]) -> list[float]:
    """Market proportional share: the share of user i is b_i / sum(b).

    Bids are spending rates in credits/second and must already be clamped to
    what each user can afford for one step (see :func:`clamp_bid`).
    """
    return proportional_share_allocate(bids)


def clamp_bid(rate: float, balance: float, dt: float) -> float:
    """Limit a spending rate so one step of spending never exceeds ``balance``."""
    if rate <= 0 or balance <= 0:
        return 0.0
    return min(rate, balance / dt)


def charge_and_income(users: Sequence[UserState], bids: Sequence[float], dt: float,
                      running: Optional[Sequence[bool]] = None) -> list[float]:
    """Deduct one step of spending and credit one step of income, in place.

    A user is charged ``bid * dt`` only while running a task (``running``
    defaults to "every positive bid is running"). The charge is capped at the
    current balance, so balances never go negative. Returns the charges.
    """
    if running is None:
        running = [True] * len(users)
    charges = []
    for user, bid, busy in zip(users, bids, running):
        charge = 0.0
        if bid > 0 and busy:
            charge = bid * dt
            if charge > user.balance:
                charge = user.balance
            user.spent += charge
        income = user.income_rate * dt
        user.balance = user.balance - charge + income
        user.earned += income
        charges.append(charge)
    return charges


def fixed_price_allocate(price: float, willingness: Sequence[float],
                         capacity: float = 1.0,
                         budgets: Optional[Sequence[float]] = None,
                         ) -> tuple[Optional[int], float]:
    """Sell the whole server at a posted price to the keenest eligible buyer.

    Eligible buyers are willing to pay at least ``price`` per resource-unit
    and, when ``budgets`` is given, can afford ``price * capacity`` credits
    for the coming step (``budgets`` holds what each user may spend in it).
    The winner is the eligible user with the highest willingness, lowest index
    on ties. Returns ``(winner, charge_rate)`` with the charge in credits per
    second, or ``(None, 0.0)`` when nobody buys and the server idles.
    """
    rate = price * capacity
    winner = None
    best = -math.inf
    for i, w in enumerate(willingness):
        if w <= 0 or w < price:
            continue
        if budgets is not None and budgets[i] < rate:
            continue
        if w > best:
            best = w
            winner = i
    if winner is None:
        return None, 0.0
    return winner, rate


def redistribute(balances: Sequence[float], tax: float) -> list[float]:
    """Move each balance a fraction ``tax`` of the way toward the mean.

    b'_i = b_i + tax * (mean(b) - b_i). The transfers sum to zero; the last
    user absorbs the rounding residue so the total is preserved to the ulp.
    """
    if not 0 <= tax <= 1:
        raise ValueError("tax must lie in [0, 1]")
    n = len(balances)
    if n == 0 or tax == 0:
        return list(balances)
    total = math.fsum(balances)
    mean = total / n
    # convex-combination form keeps every entry non-negative
    out = [(1 - tax) * b + tax * mean for b in balances]
    residue = total - math.fsum(out)
    if residue:
        # put the correction on the richest entry so it cannot go negative
        k = max(range(n), key=out.__getitem__)
        out[k] += residue
    return out
