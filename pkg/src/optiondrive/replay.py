"""Experience replay and exploration schedules."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Uniform-sampling FIFO ring over named float64 fields.

    Storage grows geometrically up to ``capacity`` so that short runs never
    pay for the full allocation; once full, the oldest rows are overwritten.
    """

    def __init__(self, fields: dict[str, int], capacity: int = 1_000_000,
                 initial: int = 1024):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.fields = dict(fields)
        self.capacity = int(capacity)
        self._alloc = min(int(initial), self.capacity)
        self._data = {k: np.empty((self._alloc, dim))
                      for k, dim in self.fields.items()}
        self._size = 0
        self._head = 0

    def __len__(self) -> int:
        return self._size

    def _grow(self) -> None:
        new_alloc = min(self._alloc * 2, self.capacity)
        for k in self._data:
            grown = np.empty((new_alloc, self.fields[k]))
            grown[:self._size] = self._data[k][:self._size]
            self._data[k] = grown
        self._alloc = new_alloc

    def add(self, **values) -> None:
        if set(values) != set(self.fields):
            raise KeyError(f"expected fields {sorted(self.fields)}, "
                           f"got {sorted(values)}")
        if self._size == self._alloc and self._alloc < self.capacity:
            self._grow()
        row = self._head
        for k, v in values.items():
            self._data[k][row] = v
        if self._size < self.capacity:
            self._size += 1
        self._head = (self._head + 1) % self.capacity

    def sample(self, batch: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch)
        return {k: arr[idx].copy() for k, arr in self._data.items()}


class LinearSchedule:
    """Linear ramp from ``start`` to ``end`` over a fraction of total steps."""

    def __init__(self, start: float, end: float, total_steps: int,
                 fraction: float = 0.5):
        self.start = float(start)
        self.end = float(end)
        self.ramp_steps = max(1, int(round(total_steps * fraction)))

    def value(self, step: int) -> float:
        frac = min(max(step, 0), self.ramp_steps) / self.ramp_steps
        return self.start + (self.end - self.start) * frac
