"""Pseudo-random pileup selection over a chain of event files.

Entries are emitted in bursts of ``burst`` consecutive global positions;
between bursts the cursor jumps ahead by ``1 + U`` with ``U`` uniform on the
integers ``[0, jump]``.  Positions wrap around the chain end.  The stream is
fully determined by ``(seed, cursor, params, chain)``; the jump draws come
from ``random.Random(seed).random()``, the one generator method the standard
library guarantees stable across releases, so emitted sequences are a
frozen external contract (see the golden test data).
"""

from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class SelectorParams:
    burst: int = 3
    jump: int = 10
    seed: int = 1

    def __post_init__(self):
        if self.burst < 1:
            raise ValueError("burst must be a positive integer")
        if self.jump < 0:
            raise ValueError("jump must be non-negative")


@dataclass(frozen=True)
class FileChain:
    """Ordered (path, entry count) pairs with a global entry numbering."""

    files: tuple[tuple[Path, int], ...]
    starts: tuple[int, ...] = field(init=False)
    total_entries: int = field(init=False)

    def __post_init__(self):
        starts = []
        total = 0
        for _, count in self.files:
            if count < 0:
                raise ValueError("entry counts must be non-negative")
            starts.append(total)
            total += count
        object.__setattr__(self, "starts", tuple(starts))
        object.__setattr__(self, "total_entries", total)

    @classmethod
    def of(cls, pairs) -> "FileChain":
        return cls(tuple((Path(p), int(n)) for p, n in pairs))

    def locate(self, g: int) -> tuple[int, int]:
        """Map a global entry to (file index, local entry)."""
        if not 0 <= g < self.total_entries:
            raise IndexError(f"global entry {g} out of range ({self.total_entries})")
        fi = bisect_right(self.starts, g) - 1
        return fi, g - self.starts[fi]

    def path(self, file_index: int) -> Path:
        return self.files[file_index][0]


def _rand_below(rng: random.Random, n: int) -> int:
    # Derived from rng.random() only, to stay on the stable-stream method.
    return min(int(rng.random() * n), n - 1)


class PileupSelector:
    """Stateful burst/jump index stream over a file chain."""

    def __init__(self, chain: FileChain, params: SelectorParams, cursor: int = 0):
        if chain.total_entries == 0:
            raise ValueError("cannot select from an empty chain")
        self.chain = chain
        self.params = params
        self.cursor = cursor % chain.total_entries
        self._rng = random.Random(params.seed)
        self._burst_pos = 0

    def next_indices(self, count: int) -> tuple[list[int], int]:
        """Emit ``count`` entries; returns (entries, file_switch_count)."""
        if count < 1:
            raise ValueError("count must be positive")
        total = self.chain.total_entries
        out = []
        for _ in range(count):
            out.append(self.cursor)
            self._burst_pos += 1
            if self._burst_pos == self.params.burst:
                step = 1 + _rand_below(self._rng, self.params.jump + 1)
                self._burst_pos = 0
            else:
                step = 1
            self.cursor = (self.cursor + step) % total
        switches = 0
        prev_file = None
        for g in out:
            fi, _ = self.chain.locate(g)
            if prev_file is not None and fi != prev_file:
                switches += 1
            prev_file = fi
        return out, switches


def assign_ranks(seed: int, count: int) -> list[int]:
    """Uniform random permutation of [0, count), deterministic per seed."""
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = random.Random(seed)
    perm = list(range(count))
    for i in range(count - 1, 0, -1):  # Fisher-Yates
        j = _rand_below(rng, i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm
