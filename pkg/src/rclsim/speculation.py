"""Speculative hash-key machinery for remapped L1 caches.

A remapped L1 needs the physical address before it can pick a set, which
serializes translation in front of the array access and costs one cycle on
every access. The speculative variant instead guesses the hash key from a
small LRU prediction table keyed by virtual page number, checks the guess
against the real key once translation completes, and replays the access on
a mismatch at a fixed two-cycle penalty.

Instruction fetches get a second shortcut: a fetch that continues the
current straight-line stream ("predicted") reuses the key resolved for the
previous fetch, which is correct unless the stream crosses into a page with
a different key. On a mismatch the fetch is queued for replay through the
prediction-table path; the mismatch also updates the table, so the replay
itself is always correctly speculated. Fetches arriving from redirects
("requested") use the prediction-table path directly.

Speculation only affects cycle accounting and counters; the set finally
accessed is always derived from the true key, so cache contents are
bit-identical with and without speculation.
"""

from __future__ import annotations

REPLAY_PENALTY = 2


class PredictionTable:
    """LRU map from virtual page number to that page's current hash key."""

    def __init__(self, capacity: int = 8):
        if capacity < 1:
            raise ValueError("prediction table capacity must be >= 1")
        self.capacity = capacity
        self._entries: dict[int, int] = {}  # vpn -> hkey, insertion order = LRU
        self.lookups = 0
        self.hits = 0
        self.mispredictions = 0
        self.updates = 0

    def __len__(self) -> int:
        return len(self._entries)

    def flush(self) -> None:
        """Drop all entries (context switch, or table reinitialization)."""
        self._entries.clear()

    def lookup(self, page: int) -> int | None:
        self.lookups += 1
        if page in self._entries:
            hkey = self._entries.pop(page)
            self._entries[page] = hkey  # LRU touch
            return hkey
        return None

    def update(self, page: int, hkey: int) -> None:
        self.updates += 1
        if page in self._entries:
            self._entries.pop(page)
        elif len(self._entries) >= self.capacity:
            del self._entries[next(iter(self._entries))]
        self._entries[page] = hkey


def speculate_l1d(
    pt: PredictionTable, page: int, true_hkey: int, penalty: int = REPLAY_PENALTY
) -> tuple[int, bool]:
    """Data-side speculation: returns (extra cycles, speculation correct).

    A hit with the current key costs nothing; a miss or stale key replays
    the access and installs the true key.
    """
    predicted = pt.lookup(page)
    if predicted == true_hkey:
        pt.hits += 1
        return 0, True
    pt.mispredictions += 1
    pt.update(page, true_hkey)
    return penalty, False


def speculate_l1i(
    pt: PredictionTable,
    prev_hkey: int | None,
    kind: str,
    page: int,
    true_hkey: int,
    penalty: int = REPLAY_PENALTY,
) -> tuple[int, bool, bool]:
    """Instruction-side speculation: (extra cycles, correct, replay queued).

    kind is "predicted" for fetches continuing the current stream (compare
    against the previous fetch's key; the comparison is on keys, so crossing
    into a page whose key happens to collide stays correct) or "requested"
    for redirected fetches, which take the prediction-table path.
    """
    if kind == "requested":
        cycles, correct = speculate_l1d(pt, page, true_hkey, penalty)
        return cycles, correct, False
    if kind != "predicted":
        raise ValueError(f"unknown fetch kind {kind!r}")
    if prev_hkey == true_hkey:
        return 0, True, False
    # Page-boundary cross with a different key: queue a replay through the
    # requested path. Updating the table first guarantees the replay's own
    # speculation is correct, so the total penalty stays at `penalty`.
    pt.mispredictions += 1
    pt.update(page, true_hkey)
    pt.lookups += 1  # the replay's table lookup, a guaranteed hit
    pt.hits += 1
    return penalty, False, True
