"""Analysis artifacts: same-set bitmaps, counter/MPKI reports, overhead tables.

Everything here is a pure function of simulator state or of an event log,
so re-running a report is bit-identical. Tabular output is plain CSV with a
header row and dot decimals; bitmaps are plain-text portable bitmaps (P1)
chosen because they diff cleanly in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cache import CacheConfig, CacheHierarchy, Indexing
from .mem import LINE_BYTES, PAGE_BYTES, PageMap
from .rtable import RandomTable, index_baseline, rt_slot

LINES_PER_PAGE = PAGE_BYTES // LINE_BYTES


@dataclass
class SetBitmap:
    """Membership of one target set over a physically contiguous region.

    bits[page][line] is True when that line indexes to the target set.
    Rendered with pages on the x axis and the 64 lines of a page on the y
    axis. For s <= 6 every page contributes exactly one line per set
    (the XOR with the in-page line field is a bijection).
    """

    pages: int
    target_set: int
    bits: list[list[bool]]

    def column_weight(self, page: int) -> int:
        return sum(self.bits[page])

    def period(self) -> int:
        """Smallest p such that every column equals the column p earlier."""
        for candidate in range(1, self.pages):
            if all(
                self.bits[i] == self.bits[i + candidate]
                for i in range(self.pages - candidate)
            ):
                return candidate
        return self.pages


def bitmap_same_set(
    cfg: CacheConfig,
    rt: RandomTable | None,
    pagemap: PageMap,
    vbase: int,
    npages: int,
    target_set: int,
) -> SetBitmap:
    """Mark every line in [vbase, vbase + npages pages) mapping to target_set.

    The region must be physically contiguous (a large-page allocation);
    anything else would sample the mapping rather than the layout, so it is
    refused.
    """
    if not pagemap.contiguous_region(vbase, npages):
        raise ValueError(
            f"region 0x{vbase:x}+{npages}p is not physically contiguous; "
            "allocate it with the large-page policy"
        )
    if not 0 <= target_set < cfg.num_sets:
        raise ValueError(f"target set {target_set} out of range")
    bits = []
    mask = cfg.num_sets - 1
    for page in range(npages):
        column = []
        for line in range(LINES_PER_PAGE):
            va = vbase + page * PAGE_BYTES + line * LINE_BYTES
            pa = pagemap.translate(va)
            if cfg.indexing is Indexing.BASELINE:
                idx = index_baseline(va if cfg.level != "LLC" else pa, cfg.set_bits)
            else:
                hkey = rt.entries[rt_slot(pa, cfg.set_bits, cfg.rand_bits)]
                idx = hkey ^ index_baseline(
                    va if cfg.level != "LLC" else pa, cfg.set_bits
                )
            column.append((idx & mask) == target_set)
        bits.append(column)
    return SetBitmap(pages=npages, target_set=target_set, bits=bits)


def bitmap_to_pbm(bm: SetBitmap, extra_comments: tuple[str, ...] = ()) -> str:
    """P1 rendering: x = pages, y = lines; the header records the period."""
    lines = [
        "P1",
        f"# same-set bitmap, target set {bm.target_set}",
        "# x axis: pages (one column per page); y axis: 64 lines per page,",
        "# line 0 on the top row; 1 = line maps to the target set",
        f"# period={bm.period()} pages",
    ]
    lines.extend(f"# {c}" for c in extra_comments)
    lines.append(f"{bm.pages} {LINES_PER_PAGE}")
    for row in range(LINES_PER_PAGE):
        lines.append(" ".join("1" if bm.bits[p][row] else "0" for p in range(bm.pages)))
    return "\n".join(lines) + "\n"


@dataclass
class CounterRow:
    name: str
    accesses: int
    misses: int
    writebacks: int
    mpki: float


@dataclass
class CounterReport:
    instructions: int
    rows: list[CounterRow]


def mpki_report(h: CacheHierarchy, instructions: int) -> CounterReport:
    """One row per cache, then TLBs, then prediction tables.

    mpki = misses * 1000 / instructions. Prediction-table rows map lookups
    to accesses and mispredictions to misses.
    """
    if instructions <= 0:
        raise ValueError("instruction count must be positive")
    rows = []
    for cache in h.caches():
        rows.append(
            CounterRow(
                cache.cache_id,
                cache.accesses,
                cache.misses,
                cache.writebacks,
                cache.misses * 1000 / instructions,
            )
        )
    for core in sorted(h.tlbs):
        tlb = h.tlbs[core]
        rows.append(
            CounterRow(
                f"tlb:{core}",
                tlb.accesses,
                tlb.misses,
                0,
                tlb.misses * 1000 / instructions,
            )
        )
    for name in sorted(h.pts):
        pt = h.pts[name]
        rows.append(
            CounterRow(
                f"pt:{name}",
                pt.lookups,
                pt.mispredictions,
                0,
                pt.mispredictions * 1000 / instructions,
            )
        )
    return CounterReport(instructions=instructions, rows=rows)


def counters_to_csv(report: CounterReport) -> str:
    lines = ["cache,accesses,misses,writebacks,mpki"]
    for r in report.rows:
        lines.append(
            f"{r.name},{r.accesses},{r.misses},{r.writebacks},{r.mpki:.6f}"
        )
    return "\n".join(lines) + "\n"


def overhead_to_csv(rows: list[tuple[str, int]]) -> str:
    """rows = (mode, total cycles), first row is the comparison baseline."""
    if not rows:
        return "mode,total_cycles,overhead_pct\n"
    base = rows[0][1]
    out = ["mode,total_cycles,overhead_pct"]
    for mode, cycles in rows:
        pct = 0.0 if base == 0 else (cycles - base) * 100.0 / base
        out.append(f"{mode},{cycles},{pct:.4f}")
    return "\n".join(out) + "\n"
