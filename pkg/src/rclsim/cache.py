"""Two-level inclusive cache hierarchy with pluggable set indexing.

Each core owns private instruction and data L1 caches; all cores share one
last-level cache (LLC). The hierarchy is strictly inclusive: every line in
any L1 is also resident in the LLC, and evicting a line from the LLC purges
it from every L1 in the same step (back-invalidation). Replacement is exact
LRU, writes are write-back/write-allocate, and every cache keeps access,
miss and write-back counters.

Lines are tracked by their physical line address. The mapping is injective
at page granularity, so a physical line has exactly one virtual alias and
virtually indexed L1s need no synonym handling.

Cycle accounting (only deltas between indexing modes are meaningful):

    plain L1 access                2 cycles
    remapped, non-speculative      +1 on every L1 access (serialized TLB)
    remapped, speculative          +2 only when the hash-key guess replays
    LLC hit                        +20, +1 more when the LLC is remapped
    LLC miss                       +100 (end-to-end memory constant; the
                                   table lookup hides under the fetch)

The set-index function is the ONLY behavioural difference between plain and
remapped modes: with an all-zero table the full event stream is identical.
Two cheap structural checks run on every access (installs require the line
in the LLC; LLC evictions purge L1 copies), and `scan_inclusion` does the
full exhaustive audit including stale-index detection after a table
reinitialization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .mem import LINE_BYTES, PAGE_SHIFT, PageMap, Tlb, line_address
from .rtable import RandomTable, index_baseline, rt_slot
from .speculation import PredictionTable, speculate_l1d, speculate_l1i


class Indexing(Enum):
    BASELINE = "baseline"
    RCL = "rcl"


class AccessKind(Enum):
    IFETCH_PREDICTED = "I-predicted"
    IFETCH_REQUESTED = "I-requested"
    READ = "R"
    WRITE = "W"


INSTRUCTION_KINDS = (AccessKind.IFETCH_PREDICTED, AccessKind.IFETCH_REQUESTED)


class InclusionError(Exception):
    """A structural invariant of the inclusive hierarchy was violated."""


@dataclass
class CacheConfig:
    """Geometry and indexing mode for one cache."""

    ways: int
    set_bits: int
    rand_bits: int
    level: str  # "L1I" | "L1D" | "LLC"
    indexing: Indexing = Indexing.BASELINE
    speculative: bool = False
    line_bytes: int = LINE_BYTES

    def __post_init__(self):
        if self.ways < 1:
            raise ValueError("ways must be >= 1")
        if not 1 <= self.set_bits <= 16:
            raise ValueError("set_bits outside [1, 16]")
        if not 0 <= self.rand_bits <= 16:
            raise ValueError("rand_bits outside [0, 16]")
        if self.level not in ("L1I", "L1D", "LLC"):
            raise ValueError(f"unknown cache level {self.level!r}")
        if self.speculative and self.indexing is not Indexing.RCL:
            raise ValueError("speculation requires remapped indexing")

    @property
    def num_sets(self) -> int:
        return 1 << self.set_bits

    @property
    def capacity_bytes(self) -> int:
        return self.ways * self.num_sets * self.line_bytes


@dataclass
class LatencyModel:
    l1_hit: int = 2
    serialized_extra: int = 1
    replay_penalty: int = 2
    llc_hit: int = 20
    llc_rt_extra: int = 1
    memory: int = 100


@dataclass(slots=True)
class AccessOutcome:
    """Result of one memory access through the hierarchy."""

    l1_hit: bool
    llc_hit: bool
    cycles: int
    replayed: bool
    evicted_lines: list[tuple[str, int]]


class Cache:
    """One set-associative cache. Sets are LRU-ordered tag lists (MRU last)."""

    def __init__(self, cache_id: str, cfg: CacheConfig, rt: RandomTable | None):
        if cfg.indexing is Indexing.RCL:
            if rt is None:
                raise ValueError("remapped indexing needs a random table")
            if rt.s != cfg.set_bits or rt.k != cfg.rand_bits:
                raise ValueError("random table geometry does not match cache")
        self.cache_id = cache_id
        self.cfg = cfg
        self.rt = rt
        self.sets: list[list[int]] = [[] for _ in range(cfg.num_sets)]
        self._where: dict[int, int] = {}  # line address -> set index
        self._dirty: set[int] = set()
        self.accesses = 0
        self.misses = 0
        self.writebacks = 0

    def set_index(self, va: int, pa: int) -> int:
        """Set selector for an access; VA drives L1 bits, PA drives the rest."""
        cfg = self.cfg
        if cfg.indexing is Indexing.BASELINE:
            base = va if cfg.level != "LLC" else pa
            return (base >> 6) & (cfg.num_sets - 1)
        hkey = self.rt.entries[rt_slot(pa, cfg.set_bits, cfg.rand_bits)]
        base = va if cfg.level != "LLC" else pa
        return hkey ^ ((base >> 6) & (cfg.num_sets - 1))

    def hkey_for(self, pa: int) -> int:
        return self.rt.entries[rt_slot(pa, self.cfg.set_bits, self.cfg.rand_bits)]

    def contains(self, tag: int) -> bool:
        return tag in self._where

    def touch(self, tag: int) -> None:
        lines = self.sets[self._where[tag]]
        lines.remove(tag)
        lines.append(tag)

    def install(self, tag: int, set_index: int) -> int | None:
        """Insert tag as MRU; returns the evicted victim tag, if any."""
        lines = self.sets[set_index]
        victim = None
        if len(lines) >= self.cfg.ways:
            victim = lines.pop(0)
            del self._where[victim]
        lines.append(tag)
        self._where[tag] = set_index
        return victim

    def remove(self, tag: int) -> bool:
        """Drop tag if resident; returns whether it was dirty."""
        set_index = self._where.pop(tag, None)
        if set_index is None:
            return False
        self.sets[set_index].remove(tag)
        dirty = tag in self._dirty
        self._dirty.discard(tag)
        return dirty

    def resident_lines(self) -> list[int]:
        return list(self._where)

    def flush(self) -> int:
        """Invalidate everything; dirty lines count as write-backs."""
        dirty = len(self._dirty)
        self.writebacks += dirty
        self.sets = [[] for _ in range(self.cfg.num_sets)]
        self._where.clear()
        self._dirty.clear()
        return dirty


class CacheHierarchy:
    """Per-core L1 I/D caches over one shared, inclusive LLC."""

    def __init__(
        self,
        pagemap: PageMap,
        l1i_cfg: CacheConfig,
        l1d_cfg: CacheConfig,
        llc_cfg: CacheConfig,
        cores: int = 1,
        tables: dict[str, RandomTable] | None = None,
        latency: LatencyModel | None = None,
        tlb_entries: int = 8,
        pt_entries: int = 8,
    ):
        tables = tables or {}
        self.pagemap = pagemap
        self.latency = latency or LatencyModel()
        self.cores = cores
        self.llc = Cache("llc", llc_cfg, tables.get("llc"))
        self.l1i: dict[int, Cache] = {}
        self.l1d: dict[int, Cache] = {}
        self.tlbs: dict[int, Tlb] = {}
        self.pts: dict[str, PredictionTable] = {}
        self._prev_ikey: dict[int, int | None] = {}
        for core in range(cores):
            self.l1i[core] = Cache(f"l1i:{core}", l1i_cfg, tables.get("l1i"))
            self.l1d[core] = Cache(f"l1d:{core}", l1d_cfg, tables.get("l1d"))
            self.tlbs[core] = Tlb(tlb_entries)
            self._prev_ikey[core] = None
            if l1i_cfg.speculative:
                self.pts[f"l1i:{core}"] = PredictionTable(pt_entries)
            if l1d_cfg.speculative:
                self.pts[f"l1d:{core}"] = PredictionTable(pt_entries)

    def caches(self) -> list[Cache]:
        out: list[Cache] = []
        for core in range(self.cores):
            out.append(self.l1i[core])
            out.append(self.l1d[core])
        out.append(self.llc)
        return out

    def access(self, core: int, kind: AccessKind, va: int) -> AccessOutcome:
        """Run one access through L1 and (on miss) the LLC; enforce inclusion."""
        pa, _ = self.tlbs[core].translate(self.pagemap, va)
        tag = line_address(pa)
        instruction = kind in INSTRUCTION_KINDS
        l1 = self.l1i[core] if instruction else self.l1d[core]
        lat = self.latency
        evicted: list[tuple[str, int]] = []

        cycles = lat.l1_hit
        replayed = False
        if l1.cfg.indexing is Indexing.RCL:
            if l1.cfg.speculative:
                true_hkey = l1.hkey_for(pa)
                page = va >> PAGE_SHIFT
                pt = self.pts[l1.cache_id]
                if instruction:
                    fetch = (
                        "predicted"
                        if kind is AccessKind.IFETCH_PREDICTED
                        else "requested"
                    )
                    extra, _, _ = speculate_l1i(
                        pt, self._prev_ikey[core], fetch, page, true_hkey,
                        lat.replay_penalty,
                    )
                    self._prev_ikey[core] = true_hkey
                else:
                    extra, _ = speculate_l1d(pt, page, true_hkey, lat.replay_penalty)
                cycles += extra
                replayed = extra > 0
            else:
                cycles += lat.serialized_extra

        l1.accesses += 1
        l1_hit = tag in l1._where
        llc_hit = False
        if l1_hit:
            l1.touch(tag)
        else:
            l1.misses += 1
            llc = self.llc
            llc.accesses += 1
            llc_set = llc.set_index(pa, pa)
            llc_hit = tag in llc._where
            if llc_hit:
                llc.touch(tag)
                cycles += lat.llc_hit
                if llc.cfg.indexing is Indexing.RCL:
                    cycles += lat.llc_rt_extra
            else:
                llc.misses += 1
                cycles += lat.memory
                victim = llc.install(tag, llc_set)
                if victim is not None:
                    evicted.append(("llc", victim))
                    if victim in llc._dirty:
                        llc._dirty.discard(victim)
                        llc.writebacks += 1
                    evicted.extend(self._back_invalidate(victim))
            l1_victim = l1.install(tag, l1.set_index(va, pa))
            if l1_victim is not None:
                evicted.append((l1.cache_id, l1_victim))
                if l1_victim in l1._dirty:
                    l1._dirty.discard(l1_victim)
                    l1.writebacks += 1
                    # Write-back lands in the LLC, which must hold the line.
                    if l1_victim not in self.llc._where:
                        raise InclusionError(
                            f"{l1.cache_id} wrote back 0x{l1_victim:x} "
                            "but the LLC does not hold it"
                        )
                    self.llc._dirty.add(l1_victim)
            if tag not in self.llc._where:
                raise InclusionError(
                    f"installed 0x{tag:x} in {l1.cache_id} without LLC backing"
                )

        if kind is AccessKind.WRITE:
            l1._dirty.add(tag)
        return AccessOutcome(l1_hit, llc_hit, cycles, replayed, evicted)

    def _back_invalidate(self, tag: int) -> list[tuple[str, int]]:
        """Purge an LLC-evicted line from every L1 (inclusion)."""
        purged = []
        for core in range(self.cores):
            for l1 in (self.l1i[core], self.l1d[core]):
                if tag in l1._where:
                    if l1.remove(tag):
                        l1.writebacks += 1
                    purged.append((l1.cache_id, tag))
        return purged

    def evict_llc_set(self, set_index: int) -> list[tuple[str, int]]:
        """Invalidate one whole LLC set; returns the L1 lines purged with it."""
        llc = self.llc
        if not 0 <= set_index < llc.cfg.num_sets:
            raise ValueError(f"LLC set index {set_index} out of range")
        purged: list[tuple[str, int]] = []
        for tag in list(llc.sets[set_index]):
            if llc.remove(tag):
                llc.writebacks += 1
            purged.extend(self._back_invalidate(tag))
        return purged

    def flush_caches(self) -> None:
        """Invalidate every cache (dirty lines count as write-backs)."""
        for cache in self.caches():
            cache.flush()

    def flush_speculation(self) -> None:
        for pt in self.pts.values():
            pt.flush()
        for core in self._prev_ikey:
            self._prev_ikey[core] = None

    def swap_tables(self, tables: dict[str, RandomTable]) -> None:
        """Attach reinitialized tables. The caller is responsible for flushing
        caches and speculation state; until then resident lines sit in sets
        the new tables no longer derive and `scan_inclusion` reports them.
        """
        for core in range(self.cores):
            if "l1i" in tables:
                self.l1i[core].rt = tables["l1i"]
            if "l1d" in tables:
                self.l1d[core].rt = tables["l1d"]
        if "llc" in tables:
            self.llc.rt = tables["llc"]

    def scan_inclusion(self, stale_check: bool = True) -> list[str]:
        """Exhaustive audit; returns human-readable violations (empty = OK).

        Checks: every L1 line is LLC-resident; per-cache bookkeeping agrees
        with set contents; no duplicate tags in a set; and (optionally) every
        resident line still sits in the set its cache's current table derives
        — reinitializing a table without flushing leaves stale lines behind,
        and this is the scan that reports them.
        """
        problems = []
        for cache in self.caches():
            seen: set[int] = set()
            for set_index, lines in enumerate(cache.sets):
                if len(lines) > cache.cfg.ways:
                    problems.append(
                        f"{cache.cache_id} set {set_index} overfull ({len(lines)})"
                    )
                for tag in lines:
                    if tag in seen:
                        problems.append(
                            f"{cache.cache_id} holds duplicate 0x{tag:x}"
                        )
                    seen.add(tag)
                    if cache._where.get(tag) != set_index:
                        problems.append(
                            f"{cache.cache_id} bookkeeping wrong for 0x{tag:x}"
                        )
                    if cache.cache_id != "llc" and tag not in self.llc._where:
                        problems.append(
                            f"inclusion: {cache.cache_id} holds 0x{tag:x} "
                            "but the LLC does not"
                        )
                    if stale_check:
                        va = (
                            tag
                            if cache.cfg.level == "LLC"
                            else self.pagemap.reverse(tag)
                        )
                        if cache.set_index(va, tag) != set_index:
                            problems.append(
                                f"stale index: {cache.cache_id} 0x{tag:x} sits "
                                f"in set {set_index}, table says "
                                f"{cache.set_index(va, tag)}"
                            )
            if len(seen) != len(cache._where):
                problems.append(f"{cache.cache_id} bookkeeping count mismatch")
        return problems
