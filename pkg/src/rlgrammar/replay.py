"""Training memories and the FIFO replay buffer."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import ActionKind


@dataclass
class Memory:
    """One applied action plus, optionally, a higher-valued alternative.

    Windows are copies of the concatenated embeddings at selection time, so
    later changes to the sentence cannot touch them.
    """

    chosen_window: np.ndarray
    chosen_kind: ActionKind
    better_window: np.ndarray | None = None
    better_kind: ActionKind | None = None
    realized_value: float = float("nan")
    node_id: int = -1
    tag: int = field(default=-1, compare=False)

    @property
    def has_better(self) -> bool:
        return self.better_window is not None


class ReplayBuffer:
    def __init__(self, capacity: int = 10000) -> None:
        self.capacity = capacity
        self._items: deque[Memory] = deque(maxlen=capacity)
        self._next_tag = 0

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def push(self, memory: Memory) -> None:
        if not np.isfinite(memory.realized_value):
            raise ValueError("memory has no finite realized value")
        memory.tag = self._next_tag
        self._next_tag += 1
        self._items.append(memory)

    def extend(self, memories) -> None:
        for m in memories:
            self.push(m)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Memory]:
        n = len(self._items)
        if n == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.choice(n, size=min(batch_size, n), replace=False)
        return [self._items[i] for i in idx]
