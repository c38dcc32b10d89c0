"""Per-image timing control for emulating slow or heterogeneous workers.

Two modes:

* measured: a chunk takes ``slowdown`` times its real compute time. The
  extra time is burned in one busy-wait after the chunk's compute loop, so
  the loop itself runs with warm caches exactly as on an unslowed worker.
* modelled: each image takes ``slowdown * cost[i]`` seconds of wall time,
  where ``cost`` comes from a :class:`CostModel`. Real compute runs inside
  that budget. This keeps timing experiments meaningful on machines with
  fewer cores than workers.

In modelled mode deadlines accumulate across a chunk, so timer overshoot on
one image is absorbed by the next instead of compounding.
"""

import time
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class CostModel:
    """Nominal per-image cost ``image_cost_s * (1 + variance * X_i)``.

    ``X_i`` are i.i.d. Exponential(1) draws from ``seed``, fixed per image
    index, so every worker sees the same cost for the same image.
    """

    image_cost_s: float
    variance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.image_cost_s < 0:
            raise ValidationError("image_cost_s must be non-negative")
        if self.variance < 0:
            raise ValidationError("variance must be non-negative")

    def costs(self, count):
        extra = np.zeros(count)
        if self.variance > 0:
            rng = np.random.default_rng(self.seed & 0xFFFFFFFFFFFFFFFF)
            extra = self.variance * rng.exponential(1.0, count)
        return self.image_cost_s * (1.0 + extra)


def hold_until(deadline):
    """Sleep until ``time.perf_counter()`` reaches ``deadline``."""
    while True:
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            return
        time.sleep(remaining)


def spin_until(deadline):
    """Busy-wait until ``deadline``, keeping the core (and its caches) hot.

    ``sleep(0)`` hands the GIL to other threads on every pass.
    """
    while time.perf_counter() < deadline:
        time.sleep(0)


class Pacer:
    def __init__(self, slowdown=1.0, costs=None):
        if slowdown < 1.0:
            raise ValidationError(f"slowdown must be >= 1.0, got {slowdown}")
        self.slowdown = float(slowdown)
        self.costs = costs
        self._start = self._deadline = None

    def begin(self):
        self._start = self._deadline = time.perf_counter()

    def image_done(self, index):
        if self.costs is not None:
            self._deadline += self.slowdown * float(self.costs[index])
            hold_until(self._deadline)

    def end(self):
        if self.costs is None and self.slowdown != 1.0:
            elapsed = time.perf_counter() - self._start
            spin_until(self._start + self.slowdown * elapsed)
