"""Virtual memory model: page-granular VA->PA mapping and a small LRU TLB.

Addresses are plain unsigned integers (byte granularity). Lines are 64 bytes,
pages are 4 KiB, large pages are 2 MiB. A large page is represented as 512
consecutive 4 KiB mappings plus a region record, so translation is always
page-granular while physical contiguity is guaranteed within the region.

Physical memory is a single contiguous pool (default 256 MiB at base 0).
The mapping is injective: no two virtual pages share a physical page, which
also means virtual address synonyms cannot occur in the caches.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

LINE_BYTES = 64
LINE_SHIFT = 6
PAGE_BYTES = 4096
PAGE_SHIFT = 12
LARGE_PAGE_BYTES = 2 * 1024 * 1024
PAGES_PER_LARGE_PAGE = LARGE_PAGE_BYTES // PAGE_BYTES

DEFAULT_POOL_PAGES = (256 * 1024 * 1024) // PAGE_BYTES

ALLOC_POLICIES = ("identity", "sequential", "random-permutation", "large-page")


def line_address(addr: int) -> int:
    """Address with the low 6 (offset) bits cleared."""
    return addr & ~(LINE_BYTES - 1)


def page_offset(addr: int) -> int:
    return addr & (PAGE_BYTES - 1)


def vpn(addr: int) -> int:
    return addr >> PAGE_SHIFT


class AllocationError(Exception):
    """Raised for overlapping, misaligned or pool-exhausting allocations."""


class TranslationFault(Exception):
    """Access to a virtual page with no mapping."""

    def __init__(self, va: int):
        super().__init__(f"unmapped virtual address 0x{va:x}")
        self.va = va


@dataclass
class PageMap:
    """Injective vpn -> ppn mapping over a contiguous physical pool."""

    pool_pages: int = DEFAULT_POOL_PAGES
    entries: dict[int, int] = field(default_factory=dict)
    large_page_regions: list[tuple[int, int]] = field(default_factory=list)
    _used_ppns: set[int] = field(default_factory=set)
    _rev: dict[int, int] = field(default_factory=dict)
    _next_sequential: int = 0

    def is_mapped(self, va: int) -> bool:
        return (va >> PAGE_SHIFT) in self.entries

    def reverse(self, pa: int) -> int:
        """PA->VA (well-defined because the mapping is injective)."""
        vp = self._rev[pa >> PAGE_SHIFT]
        return (vp << PAGE_SHIFT) | (pa & (PAGE_BYTES - 1))

    def translate(self, va: int) -> int:
        """Pure VA->PA translation; raises TranslationFault if unmapped."""
        try:
            ppn = self.entries[va >> PAGE_SHIFT]
        except KeyError:
            raise TranslationFault(va) from None
        return (ppn << PAGE_SHIFT) | (va & (PAGE_BYTES - 1))

    def allocate(self, vbase: int, npages: int, policy: str, seed: int = 0) -> None:
        """Map npages virtual pages starting at vbase under an allocation policy.

        identity            ppn = vpn (fails if a ppn is already taken)
        sequential          lowest free ppns, in order
        random-permutation  free ppns drawn from a seeded permutation of the pool
        large-page          2 MiB-aligned vbase, npages multiple of 512, contiguous
                            2 MiB-aligned physical spans
        """
        if policy not in ALLOC_POLICIES:
            raise AllocationError(f"unknown allocation policy {policy!r}")
        if vbase % PAGE_BYTES != 0:
            raise AllocationError(f"vbase 0x{vbase:x} is not page-aligned")
        if npages <= 0:
            raise AllocationError("npages must be positive")
        vfirst = vbase >> PAGE_SHIFT
        for i in range(npages):
            if (vfirst + i) in self.entries:
                raise AllocationError(
                    f"virtual page 0x{vfirst + i:x} already mapped"
                )

        if policy == "identity":
            ppns = list(range(vfirst, vfirst + npages))
            for p in ppns:
                if p >= self.pool_pages:
                    raise AllocationError(f"identity ppn 0x{p:x} outside pool")
                if p in self._used_ppns:
                    raise AllocationError(f"physical page 0x{p:x} already in use")
        elif policy == "sequential":
            ppns = []
            p = self._next_sequential
            while len(ppns) < npages:
                if p >= self.pool_pages:
                    raise AllocationError("physical pool exhausted")
                if p not in self._used_ppns:
                    ppns.append(p)
                p += 1
            self._next_sequential = p
        elif policy == "random-permutation":
            perm = list(range(self.pool_pages))
            random.Random(seed).shuffle(perm)
            ppns = []
            for p in perm:
                if p not in self._used_ppns:
                    ppns.append(p)
                    if len(ppns) == npages:
                        break
            if len(ppns) < npages:
                raise AllocationError("physical pool exhausted")
        else:  # large-page
            if vbase % LARGE_PAGE_BYTES != 0:
                raise AllocationError(
                    f"large-page vbase 0x{vbase:x} is not 2 MiB-aligned"
                )
            if npages % PAGES_PER_LARGE_PAGE != 0:
                raise AllocationError(
                    f"large-page npages {npages} is not a multiple of "
                    f"{PAGES_PER_LARGE_PAGE}"
                )
            ppns = []
            regions = []
            for chunk in range(npages // PAGES_PER_LARGE_PAGE):
                pbase = self._find_free_span(PAGES_PER_LARGE_PAGE)
                span = range(pbase, pbase + PAGES_PER_LARGE_PAGE)
                # Reserve immediately so the next chunk sees the span as used.
                self._used_ppns.update(span)
                ppns.extend(span)
                regions.append(
                    (vbase + chunk * LARGE_PAGE_BYTES, pbase << PAGE_SHIFT)
                )
            self.large_page_regions.extend(regions)

        for i, p in enumerate(ppns):
            self.entries[vfirst + i] = p
            self._rev[p] = vfirst + i
            self._used_ppns.add(p)

    def _find_free_span(self, span_pages: int) -> int:
        for base in range(0, self.pool_pages - span_pages + 1, span_pages):
            if all((base + i) not in self._used_ppns for i in range(span_pages)):
                return base
        raise AllocationError("physical pool exhausted (no aligned span free)")

    def contiguous_region(self, vbase: int, npages: int) -> bool:
        """True if [vbase, vbase+npages*4K) is mapped physically contiguously."""
        vfirst = vbase >> PAGE_SHIFT
        if vfirst not in self.entries:
            return False
        pbase = self.entries[vfirst]
        for i in range(npages):
            if self.entries.get(vfirst + i) != pbase + i:
                return False
        return True


class Tlb:
    """Tiny fully-associative LRU translation cache, counters only.

    A TLB hit is always consistent with the PageMap, so the TLB never changes
    the translated address; it only feeds the accesses/misses counters.
    """

    def __init__(self, capacity: int = 8):
        if capacity < 1:
            raise ValueError("TLB capacity must be >= 1")
        self.capacity = capacity
        self._entries: dict[int, int] = {}  # vpn -> ppn, insertion order = LRU order
        self.accesses = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    def flush(self) -> None:
        self._entries.clear()

    def translate(self, pagemap: PageMap, va: int) -> tuple[int, bool]:
        """Return (pa, tlb_hit); updates LRU state and counters."""
        self.accesses += 1
        page = va >> PAGE_SHIFT
        hit = page in self._entries
        if hit:
            ppn = self._entries.pop(page)  # re-insert as most recent
        else:
            self.misses += 1
            ppn = pagemap.entries.get(page)
            if ppn is None:
                raise TranslationFault(va)
            if len(self._entries) >= self.capacity:
                del self._entries[next(iter(self._entries))]
        self._entries[page] = ppn
        return (ppn << PAGE_SHIFT) | (va & (PAGE_BYTES - 1)), hit
