"""Uniform-sampling ring replay buffer for the off-policy learner."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Stores (S, A, R, S', done) plus per-agent recurrent state snapshots.

    S/A/R are dicts keyed by agent id; arrays are copied on push. Sampling is
    refused below the batch size (the caller gates on `ready`).
    """

    def __init__(self, capacity: int = 100_000, batch_size: int = 64, seed: int = 0):
        self.capacity = capacity
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)
        self._data: list[dict] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._data)

    @property
    def ready(self) -> bool:
        return len(self._data) >= self.batch_size

    def push(self, item: dict) -> None:
        if len(self._data) < self.capacity:
            self._data.append(item)
        else:
            self._data[self._next] = item
        self._next = (self._next + 1) % self.capacity

    def sample(self) -> list[dict]:
        if not self.ready:
            raise RuntimeError(
                f"replay has {len(self._data)} < batch {self.batch_size} transitions")
        idx = self.rng.integers(0, len(self._data), size=self.batch_size)
        return [self._data[i] for i in idx]
