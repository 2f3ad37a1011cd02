"""FIFO packet queues, Poisson arrivals, deadline drops, and relay accounting.

Packets are identical apart from target and birth slot, so every queue stores
(birth_slot, count) runs instead of per-packet objects; all operations stay
exact while costing O(runs) instead of O(packets).

Queue layout: the donor (UAV 0) holds one queue per ground user, for all
users; its per-node backhaul "queue" is a read-only view aggregating that
node's users. Each node UAV holds one queue per associated user, fed by the
backhaul hop with birth slots preserved (the drop deadline is end to end).

Per-slot order (enforced by the environment): arrivals, deadline sweep,
observation snapshot, donor transmission, relay hand-off, node transmission.
Packets relayed in slot n join the node's pre-transmission backlog of the
same slot n. The sweep runs before transmission so that nothing older than
the deadline is ever delivered; "exceeding" the deadline is strict
(age > drop_latency drops, age == drop_latency is still deliverable).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

Target = tuple[str, int]  # ("gue", m) or ("uuav", k) with k in 1..K


class ScheduledEmptyQueueError(AssertionError):
    """A schedule reached transmission with an empty buffer; the env must prevent this."""


class RunQueue:
    """FIFO of (birth_slot, count) runs with O(1) size/age statistics."""

    __slots__ = ("runs", "n", "birth_sum")

    def __init__(self):
        self.runs: deque[list[int]] = deque()
        self.n = 0
        self.birth_sum = 0

    def push(self, birth: int, count: int) -> None:
        if count <= 0:
            return
        if self.runs and birth < self.runs[-1][0]:
            raise AssertionError("FIFO violation: pushed birth precedes tail birth")
        if self.runs and self.runs[-1][0] == birth:
            self.runs[-1][1] += count
        else:
            self.runs.append([birth, count])
        self.n += count
        self.birth_sum += birth * count

    def pop(self, count: int) -> list[tuple[int, int]]:
        """Pop up to ``count`` packets from the front; returns the popped runs."""
        popped: list[tuple[int, int]] = []
        remaining = min(count, self.n)
        while remaining > 0:
            birth, avail = self.runs[0]
            take = min(avail, remaining)
            popped.append((birth, take))
            self.n -= take
            self.birth_sum -= birth * take
            remaining -= take
            if take == avail:
                self.runs.popleft()
            else:
                self.runs[0][1] -= take
        return popped

    def pop_expired(self, slot: int, max_age: int) -> int:
        """Remove packets with age strictly greater than ``max_age``."""
        cutoff = slot - max_age  # births < cutoff are overdue
        dropped = 0
        while self.runs and self.runs[0][0] < cutoff:
            birth, cnt = self.runs.popleft()
            dropped += cnt
            self.n -= cnt
            self.birth_sum -= birth * cnt
        return dropped

    def head_birth(self) -> int | None:
        return self.runs[0][0] if self.runs else None

    def features(self, slot: int) -> tuple[int, float, int]:
        """(backlog, mean age, head-of-line age); zeros when empty."""
        if self.n == 0:
            return (0, 0.0, 0)
        mean_age = slot - self.birth_sum / self.n
        return (self.n, mean_age, slot - self.runs[0][0])


@dataclass
class QueueNetwork:
    """All transmit buffers of one episode plus the conservation counters."""

    n_uuav: int
    users_of: list[list[int]]  # users_of[0] = donor's own users; [k] = node k's

    arrivals_total: int = 0
    delivered_total: int = 0
    dropped_total: int = 0
    max_delivered_age: int = 0
    queues: dict[tuple[int, int], RunQueue] = field(default_factory=dict)

    def __post_init__(self):
        all_users = [m for users in self.users_of for m in users]
        for m in all_users:
            self.queues[(0, m)] = RunQueue()
        for k in range(1, self.n_uuav + 1):
            for m in self.users_of[k]:
                self.queues[(k, m)] = RunQueue()

    # -- arrivals ---------------------------------------------------------
    def poisson_arrivals(self, slot: int, rate: float,
                         streams: dict[int, np.random.Generator]) -> dict[int, int]:
        """Draw per-user Poisson arrivals into the donor's queues."""
        new: dict[int, int] = {}
        for users in self.users_of:
            for m in users:
                n = int(streams[m].poisson(rate))
                new[m] = n
                if n:
                    self.queues[(0, m)].push(slot, n)
                    self.arrivals_total += n
        return new

    # -- state queries ----------------------------------------------------
    def backlog(self, tx: int, target: Target) -> int:
        kind, idx = target
        if kind == "gue":
            return self.queues[(tx, idx)].n
        return sum(self.queues[(0, m)].n for m in self.users_of[idx])

    def gamma(self, tx: int, target: Target) -> bool:
        return self.backlog(tx, target) > 0

    def features(self, tx: int, target: Target, slot: int) -> tuple[int, float, int]:
        kind, idx = target
        if kind == "gue":
            return self.queues[(tx, idx)].features(slot)
        total, birth_sum, head = 0, 0, None
        for m in self.users_of[idx]:
            q = self.queues[(0, m)]
            total += q.n
            birth_sum += q.birth_sum
            hb = q.head_birth()
            if hb is not None:
                head = hb if head is None else min(head, hb)
        if total == 0:
            return (0, 0.0, 0)
        return (total, slot - birth_sum / total, slot - head)

    def residual(self) -> int:
        return sum(q.n for q in self.queues.values())

    # -- transmission -----------------------------------------------------
    def deliver(self, tx: int, gue: int, count: int, slot: int) -> int:
        """Pop packets for over-the-air delivery to a ground user."""
        q = self.queues[(tx, gue)]
        if count > 0 and q.n == 0:
            raise ScheduledEmptyQueueError(f"link ({tx}, gue {gue}) scheduled with empty buffer")
        popped = q.pop(count)
        n_tx = sum(c for _, c in popped)
        if popped:
            self.max_delivered_age = max(self.max_delivered_age, slot - popped[0][0])
        self.delivered_total += n_tx
        return n_tx

    def relay(self, node: int, budget: int, slot: int) -> tuple[dict[int, int], int]:
        """Move up to ``budget`` packets from the donor to node ``node``.

        Allocation follows the latency-ordered round-robin: each round sorts
        the node's users by descending head-of-line age (ties to the lower
        user id) and grants one packet each until the budget or all queues
        are exhausted.
        """
        allocation = distribute_a2a(
            {m: self.queues[(0, m)] for m in self.users_of[node]}, budget)
        moved = 0
        for m, take in allocation.items():
            if take == 0:
                continue
            for birth, cnt in self.queues[(0, m)].pop(take):
                self.queues[(node, m)].push(birth, cnt)
                moved += cnt
        return allocation, moved

    def drop_expired(self, slot: int, max_age: int) -> dict[tuple[int, int], int]:
        """Deadline sweep over every queue; returns per-(holder, user) drop counts."""
        dropped: dict[tuple[int, int], int] = {}
        for key, q in self.queues.items():
            n = q.pop_expired(slot, max_age)
            if n:
                dropped[key] = n
                self.dropped_total += n
        return dropped


def distribute_a2a(queues: dict[int, RunQueue], budget: int) -> dict[int, int]:
    """Split a backhaul budget across per-user queues, oldest heads first.

    Pure planning: the caller performs the actual pops. Simulates the pops on
    a scratch copy so each round re-ranks by the then-current head age.
    """
    state = {m: [list(r) for r in q.runs] for m, q in queues.items()}
    allocation = {m: 0 for m in queues}
    remaining = budget
    while remaining > 0:
        order = sorted(
            (m for m in state if state[m]),
            key=lambda m: (state[m][0][0], m),  # oldest birth first, then user id
        )
        if not order:
            break
        for m in order:
            if remaining == 0:
                break
            allocation[m] += 1
            remaining -= 1
            runs = state[m]
            runs[0][1] -= 1
            if runs[0][1] == 0:
                runs.pop(0)
    return allocation
