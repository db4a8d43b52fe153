"""Conflict-based attack procedures driven against the simulated hierarchy.

The attacker only sees load latencies (`CacheOracle`); physical addresses
and table contents stay hidden, which is exactly the boundary the remapped
layout defends. Three procedures are modeled:

  * deterministic congruent-set construction from an address stride,
  * the blind trim-based search that builds eviction sets from a candidate
    pool using nothing but the latency oracle, and
  * prime+probe against a synthetic victim that touches one secret line.

`scatter_metric` is the white-box companion: it reports how many distinct
sets an eviction set really covers, which quantifies how much noise the
remapping injects into a successful search.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .cache import AccessKind, CacheHierarchy
from .mem import LINE_BYTES
from .rtable import index_baseline


class SearchFailure(Exception):
    """The candidate pool never evicted the probe; no eviction set exists."""


@dataclass
class EvictionSet:
    """Attacker-held virtual line addresses targeting one cache set.

    target_probe is the line whose eviction the set was built to cause; it
    is None for victim-directed sets where no attacker-owned probe exists.
    """

    lines: list[int]
    target_probe: int | None = None

    def __post_init__(self):
        if len(set(self.lines)) != len(self.lines):
            raise ValueError("eviction set contains duplicate lines")
        if self.target_probe is not None and self.target_probe in self.lines:
            raise ValueError("probe line must not be part of the eviction set")

    def __len__(self) -> int:
        return len(self.lines)


class CacheOracle:
    """The attacker's black-box view: load an address, observe the latency.

    With the deterministic cycle model the thresholds separate the three
    service levels cleanly; optional seeded +/-1 jitter exercises how robust
    the search is to measurement noise.
    """

    def __init__(
        self,
        hierarchy: CacheHierarchy,
        core: int = 0,
        l1_threshold: int = 3,
        llc_threshold: int = 24,
        jitter_seed: int | None = None,
    ):
        self.hierarchy = hierarchy
        self.core = core
        self.l1_threshold = l1_threshold
        self.llc_threshold = llc_threshold
        self._jitter = random.Random(jitter_seed) if jitter_seed is not None else None
        self.loads = 0

    def load(self, va: int) -> int:
        self.loads += 1
        cycles = self.hierarchy.access(self.core, AccessKind.READ, va).cycles
        if self._jitter is not None:
            cycles += self._jitter.choice((-1, 0, 1))
        return cycles

    def classify(self, cycles: int) -> str:
        if cycles <= self.l1_threshold:
            return "l1"
        if cycles <= self.llc_threshold:
            return "llc"
        return "memory"


@dataclass
class VictimModel:
    """Synthetic victim: one call touches the line selected by its secret.

    The line lives in a dedicated page (no sharing with the attacker) and
    its plain L1 index equals the secret, so a perfect attacker recovers the
    secret exactly on an unprotected hierarchy. The victim runs on its own
    core and meets the attacker only in the shared LLC.
    """

    hierarchy: CacheHierarchy
    page_base: int
    secret: int
    core: int = 1
    invocations: int = field(default=0)

    def invoke(self) -> None:
        self.invocations += 1
        self.hierarchy.access(
            self.core, AccessKind.READ, self.page_base + self.secret * LINE_BYTES
        )


def build_congruent_set(
    probe: int, count: int, stride_bits: int, pagemap=None
) -> EvictionSet:
    """Lines at probe + i*2^stride_bits, i = 1..count.

    With stride 2^(s+6) the lines share the probe's plain set index; with
    stride 2^(k+s+6) inside physically contiguous memory they also share its
    table slot, so they stay congruent even under remapped indexing.
    """
    lines = [probe + (i << stride_bits) for i in range(1, count + 1)]
    if pagemap is not None:
        for line in lines:
            if not pagemap.is_mapped(line):
                raise ValueError(
                    f"mapped region too small: 0x{line:x} is not mapped"
                )
    return EvictionSet(lines=lines, target_probe=probe)


def _evicts(oracle: CacheOracle, lines: list[int], probe: int) -> bool:
    # Load the probe, stream the candidates, re-time the probe. LRU plus
    # inclusion guarantee the reload only reaches memory if the candidates
    # pushed the probe out of the LLC.
    oracle.load(probe)
    for line in lines:
        oracle.load(line)
    return oracle.classify(oracle.load(probe)) == "memory"


def auto_search_evset(
    oracle: CacheOracle,
    pool: list[int],
    probe: int,
    assoc_guess: int,
    on_step=None,
) -> EvictionSet:
    """Blind single-line trimming: shrink the pool while it still evicts.

    Each round tentatively drops one candidate; if the rest still evicts the
    probe the drop becomes permanent, otherwise the candidate is reinstated.
    Stops at assoc_guess lines or when nothing more can be removed. The
    working set only ever shrinks, and the returned set is re-verified
    against the oracle before being handed back.
    """
    working = list(pool)
    if not _evicts(oracle, working, probe):
        raise SearchFailure(
            f"pool of {len(pool)} lines does not evict probe 0x{probe:x}"
        )
    if on_step:
        on_step(len(working))
    moved = True
    while moved and len(working) > assoc_guess:
        moved = False
        i = 0
        while i < len(working) and len(working) > assoc_guess:
            candidate = working[:i] + working[i + 1 :]
            if _evicts(oracle, candidate, probe):
                working = candidate
                moved = True
            else:
                i += 1
            if on_step:
                on_step(len(working))
    if not _evicts(oracle, working, probe):
        raise SearchFailure("trimmed set lost the eviction property")
    return EvictionSet(lines=working, target_probe=probe)


def auto_search_evset_grouped(
    oracle: CacheOracle, pool: list[int], probe: int, assoc_guess: int
) -> EvictionSet:
    """Group-testing speedup: drop whole chunks while eviction persists.

    Optional optimization over `auto_search_evset`; both produce the same
    set whenever the pool holds exactly one minimal eviction set. Falls back
    to single-line trimming for the tail.
    """
    working = list(pool)
    if not _evicts(oracle, working, probe):
        raise SearchFailure(
            f"pool of {len(pool)} lines does not evict probe 0x{probe:x}"
        )
    while len(working) > assoc_guess:
        n_groups = min(assoc_guess + 1, len(working))
        size = (len(working) + n_groups - 1) // n_groups
        for start in range(0, len(working), size):
            rest = working[:start] + working[start + size :]
            if rest and _evicts(oracle, rest, probe):
                working = rest
                break
        else:
            break
    return auto_search_evset(oracle, working, probe, assoc_guess)


def prime_probe(
    oracle: CacheOracle,
    evset: EvictionSet,
    victim: VictimModel | None,
    latencies_out: list[int] | None = None,
) -> int | None:
    """Prime the eviction set, run the victim once, probe and infer.

    Returns the plain L1 set index implied by the first probe line that came
    back from memory, or None when every probe line was still cached. The
    implied index is the probe line's own VA[s+5:6]; in the unprotected
    white-box setting that equals the victim's secret.
    """
    for line in evset.lines:
        oracle.load(line)
    if victim is not None:
        victim.invoke()
    missed = None
    s = oracle.hierarchy.l1d[oracle.core].cfg.set_bits
    for line in evset.lines:
        cycles = oracle.load(line)
        if latencies_out is not None:
            latencies_out.append(cycles)
        if missed is None and oracle.classify(cycles) == "memory":
            missed = line
            if latencies_out is None:
                break
    if missed is None:
        return None
    return index_baseline(missed, s)


def scatter_metric(
    evset: EvictionSet, hierarchy: CacheHierarchy, core: int = 0
) -> tuple[int, int]:
    """White-box spread of an eviction set: (distinct LLC sets, distinct L1 sets).

    A pure congruent set covers exactly one LLC set; under remapped L1
    indexing the same lines land all over the attacker's L1, which is the
    noise that spoils set-level inference.
    """
    pagemap = hierarchy.pagemap
    llc = hierarchy.llc
    l1d = hierarchy.l1d[core]
    llc_sets = set()
    l1_sets = set()
    for va in evset.lines:
        pa = pagemap.translate(va)
        llc_sets.add(llc.set_index(pa, pa))
        l1_sets.add(l1d.set_index(va, pa))
    return len(llc_sets), len(l1_sets)
