"""Trace format and seeded synthetic trace generators.

A trace is plain text, one event per line, `#` comments allowed:

    I-predicted 0x401000    instruction fetch continuing the current stream
    I-requested 0x402000    instruction fetch from a redirect (branch target
                            mispredict, pipeline flush, ...)
    R 0x801040              data read
    W 0x801080              data write
    FLUSH-PT                context switch: drop speculation state
    VICTIM-CALL             invoke the configured victim once

Real workload traces are not shipped, so three seeded generators produce
the access patterns the mechanisms care about: `streaming` (linear code and
data), `pointer-chase` (a permuted cycle over a small working set) and
`multi-page` (a hot page set with cold interruptions, sized to stress the
hash-key prediction table). All generators draw from fixed code and data
regions so one allocation recipe covers every synthetic trace.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .mem import LINE_BYTES, PAGE_BYTES

I_PREDICTED = "I-predicted"
I_REQUESTED = "I-requested"
READ = "R"
WRITE = "W"
FLUSH_PT = "FLUSH-PT"
VICTIM_CALL = "VICTIM-CALL"

ACCESS_KINDS = (I_PREDICTED, I_REQUESTED, READ, WRITE)
DIRECTIVE_KINDS = (FLUSH_PT, VICTIM_CALL)

TRACE_KINDS = ("streaming", "pointer-chase", "multi-page")

# Shared layout for all synthetic traces: one allocation recipe fits all.
SYN_CODE_BASE = 0x400000
SYN_CODE_PAGES = 8
SYN_DATA_BASE = 0x800000
SYN_DATA_PAGES = 32


class TraceError(Exception):
    pass


@dataclass(slots=True)
class TraceEvent:
    kind: str
    va: int | None = None


def parse_trace(text: str) -> list[TraceEvent]:
    events = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind in DIRECTIVE_KINDS:
            if len(parts) != 1:
                raise TraceError(f"line {lineno}: {kind} takes no address")
            events.append(TraceEvent(kind))
        elif kind in ACCESS_KINDS:
            if len(parts) != 2:
                raise TraceError(f"line {lineno}: expected '{kind} <hex address>'")
            try:
                va = int(parts[1], 16)
            except ValueError:
                raise TraceError(
                    f"line {lineno}: bad address {parts[1]!r}"
                ) from None
            events.append(TraceEvent(kind, va))
        else:
            raise TraceError(f"line {lineno}: unknown event kind {kind!r}")
    return events


def format_trace(events: list[TraceEvent], comments: tuple[str, ...] = ()) -> str:
    lines = [f"# {c}" for c in comments]
    for ev in events:
        if ev.va is None:
            lines.append(ev.kind)
        else:
            lines.append(f"{ev.kind} 0x{ev.va:x}")
    return "\n".join(lines) + "\n"


def synthetic_alloc_directives() -> list[tuple[str, int, int]]:
    """Allocation recipe covering every synthetic trace's code+data regions."""
    return [
        ("sequential", SYN_CODE_BASE, SYN_CODE_PAGES),
        ("sequential", SYN_DATA_BASE, SYN_DATA_PAGES),
    ]


def generate_trace(kind: str, seed: int, length: int) -> list[TraceEvent]:
    if kind == "streaming":
        return _gen_streaming(seed, length)
    if kind == "pointer-chase":
        return _gen_pointer_chase(seed, length)
    if kind == "multi-page":
        return _gen_multi_page(seed, length)
    raise TraceError(f"unknown synthetic trace kind {kind!r}")


def _code_line(index: int) -> int:
    lines = SYN_CODE_PAGES * PAGE_BYTES // LINE_BYTES
    return SYN_CODE_BASE + (index % lines) * LINE_BYTES


def _gen_streaming(seed: int, length: int) -> list[TraceEvent]:
    """Linear instruction stream over linear data, a write every few reads."""
    rng = random.Random(seed)
    events: list[TraceEvent] = []
    code_lines = SYN_CODE_PAGES * PAGE_BYTES // LINE_BYTES
    data_lines = SYN_DATA_PAGES * PAGE_BYTES // LINE_BYTES
    ip = rng.randrange(code_lines)
    dp = rng.randrange(data_lines)
    while len(events) < length:
        wrapped = (ip % code_lines) == 0 and ip > 0
        events.append(
            TraceEvent(I_REQUESTED if wrapped else I_PREDICTED, _code_line(ip))
        )
        ip += 1
        addr = SYN_DATA_BASE + (dp % data_lines) * LINE_BYTES
        events.append(TraceEvent(WRITE if dp % 7 == 3 else READ, addr))
        dp += 1
        if len(events) == 2 * (length // 4):
            events.append(TraceEvent(FLUSH_PT))
    return events[:length]


def _gen_pointer_chase(seed: int, length: int) -> list[TraceEvent]:
    """Reads chase a seeded permutation cycle over a small working set."""
    rng = random.Random(seed)
    events: list[TraceEvent] = []
    working_lines = 48  # spread over 6 pages
    slots = [
        SYN_DATA_BASE + page * PAGE_BYTES + line * LINE_BYTES
        for page in range(6)
        for line in rng.sample(range(PAGE_BYTES // LINE_BYTES), working_lines // 6)
    ]
    rng.shuffle(slots)
    loop_lines = 12  # tight code loop within one page
    pos = 0
    ip = 0
    while len(events) < length:
        at_loop_head = (ip % loop_lines) == 0 and ip > 0
        events.append(
            TraceEvent(
                I_REQUESTED if at_loop_head else I_PREDICTED,
                SYN_CODE_BASE + (ip % loop_lines) * LINE_BYTES,
            )
        )
        ip += 1
        events.append(TraceEvent(READ, slots[pos]))
        pos = (pos + 1) % len(slots)
    return events[:length]


def _gen_multi_page(seed: int, length: int) -> list[TraceEvent]:
    """Hot pages touched round-robin with seeded cold-page interruptions.

    The hot set is deliberately wider than the smallest prediction table (6
    pages vs 4 entries) so shrinking the table visibly raises
    mispredictions, while cold interruptions keep the larger tables from
    saturating at zero.
    """
    rng = random.Random(seed)
    events: list[TraceEvent] = []
    hot_pages = list(range(6))
    cold_pages = list(range(6, 22))
    code_span = 2 * PAGE_BYTES // LINE_BYTES
    step = 0
    ip = rng.randrange(code_span)
    while len(events) < length:
        events.append(TraceEvent(I_PREDICTED, _code_line(ip)))
        ip += 1
        if step % 10 == 9:
            page = rng.choice(cold_pages)
            line = rng.randrange(PAGE_BYTES // LINE_BYTES)
        else:
            page = hot_pages[step % len(hot_pages)]
            line = (step // len(hot_pages)) % (PAGE_BYTES // LINE_BYTES)
        addr = SYN_DATA_BASE + page * PAGE_BYTES + line * LINE_BYTES
        events.append(TraceEvent(WRITE if step % 13 == 5 else READ, addr))
        step += 1
    return events[:length]
