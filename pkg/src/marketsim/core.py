"""Domain types shared by every part of the simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence, Union

OBEDIENT = "obedient"
STRATEGIC = "strategic"
MARKET_STRATEGIC = "market_strategic"
BEHAVIORS = (OBEDIENT, STRATEGIC, MARKET_STRATEGIC)

PS = "ps"
MARKET_PS = "market_ps"
FIXED_PRICE = "fixed_price"
MECHANISMS = (PS, MARKET_PS, FIXED_PRICE)


class ConfigError(ValueError):
    """Raised for an invalid configuration; ``field`` names the culprit."""

    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(slots=True)
class Task:
    """A unit of CPU-bound work.

    ``deadline`` is absolute. ``accumulated`` counts resource-units received
    so far and reaches ``size`` exactly when the task completes.
    """

    id: int
    owner: int
    arrival_time: float
    size: float
    deadline: float
    value: float
    accumulated: float = 0.0
    completed_at: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.size > 0:
            raise ValueError(f"task {self.id}: size must be positive")
        if not 0 < self.value <= 1:
            raise ValueError(f"task {self.id}: value must lie in (0, 1]")
        if not self.deadline > self.arrival_time:
            raise ValueError(f"task {self.id}: deadline must follow arrival")

    @property
    def remaining(self) -> float:
        return self.size - self.accumulated

    @property
    def done(self) -> bool:
        return self.completed_at is not None

    def on_time(self) -> bool:
        return self.completed_at is not None and self.completed_at <= self.deadline


def task_utility(task: Task, completion_time: Optional[float] = None) -> float:
    """Utility earned by ``task``: value * size if finished by its deadline, else 0.

    ``completion_time`` defaults to the task's own ``completed_at``. The
    deadline is inclusive.
    """
    t = task.completed_at if completion_time is None else completion_time
    if t is None or t > task.deadline:
        return 0.0
    return task.value * task.size


@dataclass(slots=True)
class UserState:
    id: int
    behavior: str
    income_rate: float = 1.0
    balance: float = 0.0
    queue: list[Task] = field(default_factory=list)
    cumulative_utility: float = 0.0
    cumulative_resources: float = 0.0
    spent: float = 0.0
    earned: float = 0.0


@dataclass(frozen=True)
class SimConfig:
    """Full parameterization of one simulation run.

    Defaults follow the reference experiment: 10 users, 1000 s, Gaussian
    interarrival with sigma = mu / 2, sizes N(10, 5), relative deadlines
    N(75, 37.5), values uniform on (0, 1], one credit per second of income.

    ``strategic_selection="fifo"`` makes max-weight strategic users run their
    oldest task instead of their most valuable one (a sensitivity knob).

    ``behavior`` and ``income_rate`` accept either one value for every user
    or a per-user sequence.
    """

    n_users: int = 10
    horizon: float = 1000.0
    dt: float = 0.1
    capacity: float = 1.0
    mechanism: str = PS
    price: float = 1.0
    behavior: Union[str, tuple[str, ...]] = OBEDIENT
    interarrival_mu: float = 120.0
    size_mu: float = 10.0
    size_sigma: float = 5.0
    deadline_mu: float = 75.0
    deadline_sigma: float = 37.5
    value_range: tuple[float, float] = (0.0, 1.0)
    income_rate: Union[float, tuple[float, ...]] = 1.0
    initial_balance: float = 0.0
    max_weight: float = 1.0
    strategic_selection: str = "value"
    redistribution_tax: float = 0.0
    redistribution_interval: float = 10.0
    fairness_window: float = 60.0
    seed: int = 1

    def __post_init__(self) -> None:
        # normalize list inputs (e.g. from JSON) so the config stays hashable
        for name in ("behavior", "income_rate", "value_range"):
            v = getattr(self, name)
            if isinstance(v, list):
                object.__setattr__(self, name, tuple(v))
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.n_users, int) or self.n_users < 0:
            raise ConfigError("n_users", "must be a non-negative integer")
        if not self.dt > 0:
            raise ConfigError("dt", "must be positive")
        if not self.horizon >= 0 or not math.isfinite(self.horizon):
            raise ConfigError("horizon", "must be finite and non-negative")
        if not self.capacity > 0:
            raise ConfigError("capacity", "must be positive")
        if self.mechanism not in MECHANISMS:
            raise ConfigError("mechanism", f"unknown mechanism {self.mechanism!r}")
        if not self.price >= 0:
            raise ConfigError("price", "must be non-negative")
        for b in self.behaviors():
            if b not in BEHAVIORS:
                raise ConfigError("behavior", f"unknown behavior {b!r}")
        if not self.interarrival_mu > 0:
            raise ConfigError("interarrival_mu", "must be positive")
        if not self.size_mu > 0 or self.size_sigma < 0:
            raise ConfigError("size_mu", "size distribution needs mu > 0, sigma >= 0")
        if not self.deadline_mu > 0 or self.deadline_sigma < 0:
            raise ConfigError("deadline_mu", "deadline distribution needs mu > 0, sigma >= 0")
        lo, hi = self.value_range
        if not 0 <= lo < hi <= 1:
            raise ConfigError("value_range", "need 0 <= lo < hi <= 1")
        if any(r < 0 for r in self.income_rates()):
            raise ConfigError("income_rate", "must be non-negative")
        if self.initial_balance < 0:
            raise ConfigError("initial_balance", "must be non-negative")
        if not self.max_weight > 0:
            raise ConfigError("max_weight", "must be positive")
        if self.strategic_selection not in ("value", "fifo"):
            raise ConfigError("strategic_selection", "must be 'value' or 'fifo'")
        if not 0 <= self.redistribution_tax <= 1:
            raise ConfigError("redistribution_tax", "must lie in [0, 1]")
        if not self.redistribution_interval > 0:
            raise ConfigError("redistribution_interval", "must be positive")
        if not self.fairness_window > 0:
            raise ConfigError("fairness_window", "must be positive")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an integer in [0, 2**64)")

    def behaviors(self) -> tuple[str, ...]:
        return _per_user(self.behavior, self.n_users, "behavior")

    def income_rates(self) -> tuple[float, ...]:
        return tuple(float(r) for r in _per_user(self.income_rate, self.n_users, "income_rate"))

    @property
    def n_steps(self) -> int:
        return max(0, math.ceil(self.horizon / self.dt - 1e-9))

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        return cls(**data)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


def _per_user(value, n: int, name: str) -> tuple:
    if isinstance(value, (str, int, float)):
        return (value,) * n
    value = tuple(value)
    if len(value) != n:
        raise ConfigError(name, f"expected {n} per-user entries, got {len(value)}")
    return value


@dataclass
class RunRecord:
    """Outcome of one run.

    ``window_usage[w][i]`` is the resource-units user ``i`` consumed in
    fairness window ``w``; ``window_demand[w][i]`` counts the steps in that
    window during which user ``i`` had a runnable task.
    """

    n_users: int
    horizon: float
    utility: list[float]
    resources: list[float]
    spent: list[float]
    earned: list[float]
    initial_balances: list[float]
    final_balances: list[float]
    arrived: int = 0
    completed: int = 0
    expired: int = 0
    pending: int = 0
    redistributed: float = 0.0
    window_length: float = 60.0
    window_usage: list[list[float]] = field(default_factory=list)
    window_demand: list[list[int]] = field(default_factory=list)
    delivered: float = 0.0
    tasks: list[Task] = field(default_factory=list)

    @property
    def total_utility(self) -> float:
        return math.fsum(self.utility)

    @property
    def total_spend(self) -> float:
        return math.fsum(self.spent)

    @property
    def final_balance_sum(self) -> float:
        return math.fsum(self.final_balances)


def empty_record(n_users: int, horizon: float, window: float,
                 balances: Sequence[float] = ()) -> RunRecord:
    balances = list(balances) or [0.0] * n_users
    return RunRecord(
        n_users=n_users,
        horizon=horizon,
        utility=[0.0] * n_users,
        resources=[0.0] * n_users,
        spent=[0.0] * n_users,
        earned=[0.0] * n_users,
        initial_balances=list(balances),
        final_balances=list(balances),
        window_length=window,
    )
