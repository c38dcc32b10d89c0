"""Chunk calculation for STATIC, SS, GSS and FAC loop scheduling."""

import enum
from dataclasses import dataclass, field

from .errors import ValidationError


class SchedulerKind(enum.Enum):
    STATIC = "static"
    SS = "ss"
    GSS = "gss"
    FAC = "fac"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValidationError(f"unknown scheduler {value!r}; expected one of {names}") from None


def _ceil_div(a, b):
    return -(-a // b)


@dataclass
class SchedulerState:
    """Master-side scheduling state for ``N`` iterations over ``P`` workers.

    ``next_chunk`` is the only mutator. It is not thread-safe; callers
    serialize access.
    """

    kind: SchedulerKind
    N: int
    P: int
    scheduled: int = 0
    step: int = 0
    fac_batch_left: int = 0
    fac_chunk: int = 0
    _static_sizes: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.kind = SchedulerKind.parse(self.kind)
        if self.P < 1:
            raise ValidationError(f"worker count must be at least 1, got {self.P}")
        if self.N < 0:
            raise ValidationError(f"iteration count must be non-negative, got {self.N}")
        if self.kind is SchedulerKind.STATIC:
            base, extra = divmod(self.N, self.P)
            sizes = [base + 1] * extra + [base] * (self.P - extra)
            self._static_sizes = [s for s in sizes if s > 0]

    @property
    def remaining(self):
        return self.N - self.scheduled

    def _chunk_size(self):
        R = self.remaining
        if self.kind is SchedulerKind.SS:
            return 1
        if self.kind is SchedulerKind.GSS:
            return _ceil_div(R, self.P)
        if self.kind is SchedulerKind.FAC:
            if self.fac_batch_left == 0:
                self.fac_chunk = _ceil_div(R, 2 * self.P)
                self.fac_batch_left = self.P
            self.fac_batch_left -= 1
            return self.fac_chunk
        return self._static_sizes[self.step]

    def next_chunk(self):
        """Issue the next half-open range, or ``None`` once all work is out."""
        if self.scheduled >= self.N:
            return None
        size = min(self._chunk_size(), self.remaining)
        start = self.scheduled
        self.scheduled += size
        self.step += 1
        return start, self.scheduled


def chunk_sequence(kind, N, P):
    """Exhaust a fresh scheduler and return every ``(start, end)`` it issues."""
    state = SchedulerState(kind, N, P)
    chunks = []
    while (chunk := state.next_chunk()) is not None:
        chunks.append(chunk)
    return chunks
