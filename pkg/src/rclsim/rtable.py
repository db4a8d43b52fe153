"""Set-index computation for plain and remapped (randomized) caches.

A w-way cache with 2^s sets normally selects its set with address bits
[s+5:6], i.e. the bits just above the 64-byte line offset. The remapped
layout instead XORs that field with an s-bit hash key pulled from a table
of 2^k random entries, indexed by the k physical-address bits immediately
above the set field:

    slot  = PA[k+s+5 : s+6]
    hkey  = table[slot]
    index = hkey XOR VA[s+5:6]     (virtually indexed L1)
    index = hkey XOR PA[s+5:6]     (physically indexed shared cache)

Because the XOR is an involution, an all-zero table degenerates exactly to
the plain index, which the test suite uses as an end-to-end equivalence
oracle. Table entries come from a counter-mode BLAKE2b generator: hardware
would use a TRNG, but reproducibility requires a seeded source here, and
every draw is an independent keyed-hash output rather than a short-state
LCG so the entries carry no exploitable pattern.

Per-cache tables are derived from one master seed by domain separation
(`derive_seed`), keeping tables in different caches mutually independent
while the whole simulation stays reproducible from a single seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

LINE_SHIFT = 6


def _keyed_words(seed: int, count: int, bits: int) -> list[int]:
    # Counter-mode PRF: word i = BLAKE2b(key=seed, data=i) truncated to `bits`.
    key = (seed & ((1 << 128) - 1)).to_bytes(16, "little")
    mask = (1 << bits) - 1
    out = []
    for i in range(count):
        digest = hashlib.blake2b(
            i.to_bytes(8, "little"), key=key, digest_size=8
        ).digest()
        out.append(int.from_bytes(digest, "little") & mask)
    return out


def derive_seed(master: int, label: str) -> int:
    """Domain-separated sub-seed so independent components never share streams."""
    key = (master & ((1 << 128) - 1)).to_bytes(16, "little")
    digest = hashlib.blake2b(label.encode(), key=key, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def index_baseline(addr: int, s: int) -> int:
    """Plain set index: bits [s+5:6] of the address."""
    return (addr >> LINE_SHIFT) & ((1 << s) - 1)


def rt_slot(pa: int, s: int, k: int) -> int:
    """Table slot: bits [k+s+5:s+6] of the physical address.

    These are the lowest k PA bits that are never part of the virtual page
    offset, so they are hidden from user code yet vary across pages.
    """
    return (pa >> (s + LINE_SHIFT)) & ((1 << k) - 1)


@dataclass
class IndexResult:
    """Set index plus the intermediates that produced it."""

    index: int
    hkey: int
    rt_slot: int


@dataclass
class RandomTable:
    """2^k entries of s-bit hash keys, reproducible from (seed, k, s)."""

    s: int
    k: int
    seed: int
    entries: list[int] = field(default_factory=list)
    generation: int = 0

    def __post_init__(self):
        if not 1 <= self.s <= 16:
            raise ValueError(f"s={self.s} outside [1, 16]")
        if not 0 <= self.k <= 16:
            raise ValueError(f"k={self.k} outside [0, 16]")
        if not self.entries:
            self.entries = _keyed_words(self.seed, 1 << self.k, self.s)
        if len(self.entries) != 1 << self.k:
            raise ValueError("entry count does not match 2^k")
        if any(e >> self.s for e in self.entries):
            raise ValueError("table entry wider than s bits")

    @classmethod
    def zeros(cls, s: int, k: int) -> "RandomTable":
        """All-zero table: remapped indexing degenerates to the plain index."""
        return cls(s=s, k=k, seed=0, entries=[0] * (1 << k))


def init_random_table(s: int, k: int, seed: int) -> RandomTable:
    return RandomTable(s=s, k=k, seed=seed)


def reinit_random_table(rt: RandomTable, seed: int) -> RandomTable:
    """Fresh entries under a new seed; the caller must flush affected caches.

    Lines installed under the old table sit in sets the new table no longer
    derives, which the hierarchy's stale-line scan reports until a flush.
    """
    return RandomTable(
        s=rt.s, k=rt.k, seed=seed, generation=rt.generation + 1
    )


def index_rcl_l1(va: int, pa: int, rt: RandomTable) -> IndexResult:
    """Remapped index for a virtually indexed L1: table[slot(PA)] XOR VA[s+5:6]."""
    if (va ^ pa) & 0xFFF:
        raise ValueError(
            f"va=0x{va:x} / pa=0x{pa:x} disagree in the page offset; "
            "translation is broken"
        )
    slot = rt_slot(pa, rt.s, rt.k)
    hkey = rt.entries[slot]
    return IndexResult(hkey ^ index_baseline(va, rt.s), hkey, slot)


def index_rcl_llc(pa: int, rt: RandomTable) -> IndexResult:
    """Remapped index for a physically indexed cache: table[slot] XOR PA[s+5:6]."""
    slot = rt_slot(pa, rt.s, rt.k)
    hkey = rt.entries[slot]
    return IndexResult(hkey ^ index_baseline(pa, rt.s), hkey, slot)


def dump_table(rt: RandomTable) -> str:
    """Text form for cross-implementation comparison: header plus hex entries."""
    lines = [f"rt s={rt.s} k={rt.k} seed=0x{rt.seed:x}"]
    lines.extend(f"{e:x}" for e in rt.entries)
    return "\n".join(lines) + "\n"


def load_table(text: str) -> RandomTable:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("rt "):
        raise ValueError("missing 'rt s=<s> k=<k> seed=<hex>' header")
    fields = dict(part.split("=", 1) for part in lines[0][3:].split())
    try:
        s = int(fields["s"])
        k = int(fields["k"])
        seed = int(fields["seed"], 16)
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad table header {lines[0]!r}") from exc
    entries = [int(ln, 16) for ln in lines[1:]]
    return RandomTable(s=s, k=k, seed=seed, entries=entries)
