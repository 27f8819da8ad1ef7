"""Seeded task streams.

Randomness comes from numpy's Philox4x64 counter-based bit generator, used
only through its raw 64-bit output. The transforms to uniform and Gaussian
variates are written out here, so a stream depends on nothing but the key
and this module:

* each user gets its own Philox key ``(splitmix64(seed), user_index)``, so
  adding or removing users never perturbs another user's stream;
* uniform [0, 1): top 53 bits of a raw word times 2**-53;
* uniform (0, 1]: (top 53 bits + 1) times 2**-53;
* Gaussian: Box-Muller, cosine branch only, two raw words per variate;
* truncation resamples until the draw exceeds the floor (never clamps).

Per task the draw order is: interarrival gap, size, relative deadline, value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .core import SimConfig, Task

MASK64 = (1 << 64) - 1
TWO_PI = 2.0 * math.pi
INV_2_53 = 1.0 / (1 << 53)

INTERARRIVAL_FLOOR = 0.001
SIZE_FLOOR = 0.01
DEADLINE_FLOOR = 0.01

_BLOCK = 256


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer, used to spread user-supplied seeds over 64 bits."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


class StreamRNG:
    """Deterministic variate source for one (seed, stream) pair."""

    def __init__(self, seed: int, stream: int = 0) -> None:
        self.seed = seed
        self.stream = stream
        key = (stream << 64) | splitmix64(seed & MASK64)
        self._bits = np.random.Philox(key=key)
        self._buf: list[int] = []
        self._pos = 0

    def raw(self) -> int:
        if self._pos == len(self._buf):
            self._buf = self._bits.random_raw(_BLOCK).tolist()
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return x

    def uniform(self) -> float:
        """Uniform on [0, 1)."""
        return (self.raw() >> 11) * INV_2_53

    def uniform_open_closed(self) -> float:
        """Uniform on (0, 1]."""
        return ((self.raw() >> 11) + 1) * INV_2_53

    def gauss(self, mu: float, sigma: float) -> float:
        r = math.sqrt(-2.0 * math.log(self.uniform_open_closed()))
        return mu + sigma * r * math.cos(TWO_PI * self.uniform())


@dataclass(frozen=True, slots=True)
class DistributionSpec:
    """Either a Gaussian truncated by resampling at ``floor`` or a uniform on (lo, hi]."""

    kind: str
    mu: float = 0.0
    sigma: float = 0.0
    lo: float = 0.0
    hi: float = 1.0
    floor: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.sigma < 0:
                raise ValueError("sigma must be non-negative")
            if self.sigma == 0 and self.mu <= self.floor:
                raise ValueError("degenerate Gaussian never exceeds its floor")
        elif not self.hi > self.lo:
            raise ValueError("uniform needs hi > lo")

    def sample(self, rng: StreamRNG) -> float:
        if self.kind == "uniform":
            return self.lo + (self.hi - self.lo) * rng.uniform_open_closed()
        while True:
            x = rng.gauss(self.mu, self.sigma)
            if x > self.floor:
                return x


def truncated_gaussian(mu: float, sigma: float, floor: float) -> DistributionSpec:
    return DistributionSpec("gaussian", mu=mu, sigma=sigma, floor=floor)


def sample_interarrival(mu: float, rng: StreamRNG) -> float:
    """Gap to the next arrival: N(mu, mu/2) resampled until above 1 ms."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    return truncated_gaussian(mu, mu / 2, INTERARRIVAL_FLOOR).sample(rng)


@dataclass(frozen=True)
class WorkloadModel:
    interarrival: DistributionSpec
    size: DistributionSpec
    deadline: DistributionSpec
    value: DistributionSpec

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "WorkloadModel":
        lo, hi = cfg.value_range
        return cls(
            interarrival=truncated_gaussian(cfg.interarrival_mu, cfg.interarrival_mu / 2,
                                            INTERARRIVAL_FLOOR),
            size=truncated_gaussian(cfg.size_mu, cfg.size_sigma, SIZE_FLOOR),
            deadline=truncated_gaussian(cfg.deadline_mu, cfg.deadline_sigma, DEADLINE_FLOOR),
            value=DistributionSpec("uniform", lo=lo, hi=hi),
        )


DEFAULT_MODEL = WorkloadModel.from_config(SimConfig())


def gen_task(owner: int, now: float, rng: StreamRNG, task_id: int = 0,
             model: WorkloadModel = DEFAULT_MODEL) -> Task:
    """Draw one task arriving at ``now`` (size, then relative deadline, then value)."""
    size = model.size.sample(rng)
    deadline = now + model.deadline.sample(rng)
    value = model.value.sample(rng)
    return Task(id=task_id, owner=owner, arrival_time=now, size=size,
                deadline=deadline, value=value)


def user_stream(cfg: SimConfig, user: int, model: Optional[WorkloadModel] = None,
                ) -> Iterator[Task]:
    """Infinite arrival stream for one user; ids are ``user << 32 | k``."""
    model = model or WorkloadModel.from_config(cfg)
    rng = StreamRNG(cfg.seed, user)
    t = 0.0
    k = 0
    while True:
        t += model.interarrival.sample(rng)
        yield gen_task(user, t, rng, (user << 32) | k, model)
        k += 1


def generate_tasks(cfg: SimConfig, user: int) -> list[Task]:
    """All tasks of ``user`` arriving before the horizon, in arrival order."""
    out = []
    for task in user_stream(cfg, user):
        if task.arrival_time >= cfg.horizon:
            break
        out.append(task)
    return out
