"""Experiment orchestration: config -> simulation -> deterministic outputs.

Everything an experiment needs (page mappings, random tables, hierarchy,
victim) is derived from the configuration plus one master seed, using
domain-separated sub-seeds, so a (config, trace, seed) triple always
reproduces the same bytes.

The four operation modes wire the hierarchy differently:

    baseline   plain indexing everywhere
    rcl-n      remapped indexing everywhere, serialized translation in L1
    rcl-s      remapped everywhere, speculative hash keys in the L1s
    rcl-llc    remapped indexing only in the shared LLC

Attack scenarios (`run_attack`) build a fresh simulation per trial with a
per-trial seed and emit one CSV row per trial. The auto-search scenario
seeds the candidate pool with a guaranteed congruent core plus decoys: a
fully random pool large enough to contain an eviction set by chance would
need tens of thousands of lines, which the quadratic reference search
cannot chew through at desk scale, and the search itself stays black-box.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from . import trace as trace_mod
from .analysis import counters_to_csv, mpki_report, overhead_to_csv
from .attacker import (
    CacheOracle,
    EvictionSet,
    SearchFailure,
    VictimModel,
    auto_search_evset,
    build_congruent_set,
    prime_probe,
    scatter_metric,
)
from .cache import (
    AccessKind,
    AccessOutcome,
    CacheConfig,
    CacheHierarchy,
    InclusionError,
    Indexing,
    LatencyModel,
)
from .config import MODES, ConfigError, ExperimentConfig
from .mem import LINE_BYTES, PAGE_BYTES, PageMap, TranslationFault
from .rtable import RandomTable, derive_seed
from .trace import TraceEvent

_KIND_MAP = {
    trace_mod.I_PREDICTED: AccessKind.IFETCH_PREDICTED,
    trace_mod.I_REQUESTED: AccessKind.IFETCH_REQUESTED,
    trace_mod.READ: AccessKind.READ,
    trace_mod.WRITE: AccessKind.WRITE,
}


class SimulationFault(Exception):
    """A trace event could not be executed (usually an unmapped address)."""

    def __init__(self, event_index: int, message: str):
        super().__init__(f"event {event_index}: {message}")
        self.event_index = event_index


def cache_configs(cfg: ExperimentConfig) -> tuple[CacheConfig, CacheConfig, CacheConfig]:
    l1_rcl = cfg.mode in ("rcl-n", "rcl-s")
    llc_rcl = cfg.mode != "baseline"
    spec = cfg.mode == "rcl-s"
    l1i = CacheConfig(
        cfg.l1i.ways, cfg.l1i.set_bits, cfg.l1i.rand_bits, "L1I",
        Indexing.RCL if l1_rcl else Indexing.BASELINE, spec,
    )
    l1d = CacheConfig(
        cfg.l1d.ways, cfg.l1d.set_bits, cfg.l1d.rand_bits, "L1D",
        Indexing.RCL if l1_rcl else Indexing.BASELINE, spec,
    )
    llc = CacheConfig(
        cfg.llc.ways, cfg.llc.set_bits, cfg.llc.rand_bits, "LLC",
        Indexing.RCL if llc_rcl else Indexing.BASELINE, False,
    )
    return l1i, l1d, llc


def build_tables(cfg: ExperimentConfig) -> dict[str, RandomTable]:
    """One independently seeded table per remapped cache level."""
    l1i, l1d, llc = cache_configs(cfg)
    tables = {}
    for name, ccfg in (("l1i", l1i), ("l1d", l1d), ("llc", llc)):
        if ccfg.indexing is Indexing.RCL:
            if cfg.zero_rt:
                tables[name] = RandomTable.zeros(ccfg.set_bits, ccfg.rand_bits)
            else:
                tables[name] = RandomTable(
                    s=ccfg.set_bits,
                    k=ccfg.rand_bits,
                    seed=derive_seed(cfg.master_seed, f"rt:{name}"),
                )
    return tables


def build_pagemap(cfg: ExperimentConfig) -> PageMap:
    pm = PageMap(pool_pages=cfg.pool_pages)
    for i, (policy, vbase, npages) in enumerate(cfg.allocs):
        pm.allocate(
            vbase, npages, policy, seed=derive_seed(cfg.master_seed, f"alloc:{i}")
        )
    return pm


def latency_model(cfg: ExperimentConfig) -> LatencyModel:
    return LatencyModel(
        l1_hit=cfg.l1_hit_cycles,
        serialized_extra=cfg.serialized_extra_cycles,
        replay_penalty=cfg.replay_penalty_cycles,
        llc_hit=cfg.llc_hit_cycles,
        llc_rt_extra=cfg.llc_rt_extra_cycles,
        memory=cfg.memory_cycles,
    )


class Simulation:
    """A fully wired hierarchy plus the trace-event execution loop."""

    def __init__(
        self,
        cfg: ExperimentConfig,
        pagemap: PageMap | None = None,
        cores: int | None = None,
    ):
        self.cfg = cfg
        self.pagemap = pagemap if pagemap is not None else build_pagemap(cfg)
        self.tables = build_tables(cfg)
        l1i, l1d, llc = cache_configs(cfg)
        if cores is None:
            cores = (cfg.victim.core + 1) if cfg.victim else 1
        self.hierarchy = CacheHierarchy(
            self.pagemap,
            l1i,
            l1d,
            llc,
            cores=cores,
            tables=self.tables,
            latency=latency_model(cfg),
            tlb_entries=cfg.tlb_entries,
            pt_entries=cfg.pt_entries,
        )
        self.victim = None
        if cfg.victim:
            self.victim = VictimModel(
                self.hierarchy,
                page_base=cfg.victim.page,
                secret=cfg.victim.secret,
                core=cfg.victim.core,
            )

    def run(
        self, events: list[TraceEvent], check: str = "off"
    ) -> list[AccessOutcome | None]:
        """Execute trace events on core 0; directives return None outcomes.

        check: "off", "final" (one inclusion scan at the end) or
        "every-event" (scan after each event; exhaustive but slow).
        """
        h = self.hierarchy
        outcomes: list[AccessOutcome | None] = []
        for i, ev in enumerate(events):
            try:
                if ev.kind == trace_mod.FLUSH_PT:
                    h.flush_speculation()
                    outcomes.append(None)
                elif ev.kind == trace_mod.VICTIM_CALL:
                    if self.victim is None:
                        raise SimulationFault(i, "trace calls a victim but none is configured")
                    self.victim.invoke()
                    outcomes.append(None)
                else:
                    outcomes.append(h.access(0, _KIND_MAP[ev.kind], ev.va))
            except TranslationFault as exc:
                raise SimulationFault(i, str(exc)) from None
            if check == "every-event":
                problems = h.scan_inclusion()
                if problems:
                    raise InclusionError(f"after event {i}: {problems[0]}")
        if check in ("final", "every-event"):
            problems = h.scan_inclusion()
            if problems:
                raise InclusionError(problems[0])
        return outcomes


def event_log_text(
    events: list[TraceEvent], outcomes: list[AccessOutcome | None]
) -> str:
    lines = []
    for i, (ev, oc) in enumerate(zip(events, outcomes)):
        if oc is None:
            lines.append(f"{i} {ev.kind}")
        else:
            lines.append(
                f"{i} {ev.kind} 0x{ev.va:x} l1={int(oc.l1_hit)} "
                f"llc={int(oc.llc_hit)} cycles={oc.cycles} replay={int(oc.replayed)}"
            )
    return "\n".join(lines) + ("\n" if lines else "")


def count_instructions(events: list[TraceEvent]) -> int:
    return sum(1 for ev in events if ev.kind in trace_mod.ACCESS_KINDS)


@dataclass
class SimulateOutputs:
    counters_csv: str
    overhead_csv: str
    event_log: str
    outcomes: list[AccessOutcome | None]


def overhead_report(cfg: ExperimentConfig, events: list[TraceEvent]) -> list[tuple[str, int]]:
    """Total cycles for the same trace under every mode (baseline first)."""
    rows = []
    for mode in MODES:
        sim = Simulation(replace(cfg, mode=mode))
        outcomes = sim.run(events)
        rows.append((mode, sum(o.cycles for o in outcomes if o is not None)))
    return rows


def run_simulate(
    cfg: ExperimentConfig, events: list[TraceEvent], check: str = "final"
) -> SimulateOutputs:
    sim = Simulation(cfg)
    outcomes = sim.run(events, check=check)
    instructions = count_instructions(events)
    report = mpki_report(sim.hierarchy, max(instructions, 1))
    return SimulateOutputs(
        counters_csv=counters_to_csv(report),
        overhead_csv=overhead_to_csv(overhead_report(cfg, events)),
        event_log=event_log_text(events, outcomes),
        outcomes=outcomes,
    )


# --- attack scenarios -------------------------------------------------------

ATTACK_SCENARIOS = ("congruent", "auto-search", "prime-probe")

_CONGRUENT_BASE = 0x200000  # 2 MiB-aligned so large-page allocations fit
_SEARCH_BASE = 0x1000000
_PRIME_BASE = 0x1000000


def _attack_int(cfg: ExperimentConfig, key: str, default: int) -> int:
    raw = cfg.attack.get(key)
    if raw is None:
        return default
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"[attack] {key}: bad integer {raw!r}") from None


def run_attack(
    cfg: ExperimentConfig, scenario: str, trials: int
) -> tuple[list[str], list[list]]:
    """Run seeded attack trials; returns (csv header, one row per trial)."""
    if scenario == "congruent":
        return _attack_congruent(cfg, trials)
    if scenario == "auto-search":
        return _attack_auto_search(cfg, trials)
    if scenario == "prime-probe":
        return _attack_prime_probe(cfg, trials)
    raise ConfigError(f"unknown attack scenario {scenario!r}")


def attack_csv(header: list[str], rows: list[list]) -> str:
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(str(v) for v in row))
    return "\n".join(out) + "\n"


def _attack_congruent(cfg: ExperimentConfig, trials: int):
    """Stride-built eviction set against the attacker's own L1 probe.

    With physically contiguous memory (large-page policy) and stride
    2^(k+s+6) the set shares the probe's slot and set under any table; with
    random-permutation pages the same construction scatters and the probe
    survives.
    """
    geom = cfg.l1d
    policy = cfg.attack.get("region_policy", "large-page")
    region_pages = _attack_int(cfg, "region_pages", 512)
    count = _attack_int(cfg, "count", geom.ways)
    stride_bits = _attack_int(
        cfg, "stride_bits", geom.rand_bits + geom.set_bits + 6
    )
    probe = _attack_int(cfg, "probe", _CONGRUENT_BASE)
    header = ["trial", "seed", "mode", "policy", "evicted"]
    rows = []
    for t in range(trials):
        seed = derive_seed(cfg.master_seed, f"congruent:{t}")
        trial_cfg = replace(
            cfg,
            master_seed=seed,
            allocs=[(policy, _CONGRUENT_BASE, region_pages)],
            victim=None,
        )
        sim = Simulation(trial_cfg)
        h = sim.hierarchy
        evset = build_congruent_set(probe, count, stride_bits, sim.pagemap)
        h.access(0, AccessKind.READ, probe)
        for line in evset.lines:
            h.access(0, AccessKind.READ, line)
        evicted = not h.access(0, AccessKind.READ, probe).l1_hit
        rows.append([t, f"0x{seed:x}", cfg.mode, policy, int(evicted)])
    return header, rows


def _attack_auto_search(cfg: ExperimentConfig, trials: int):
    """Blind trim search over a pool seeded with a congruent core plus decoys."""
    llc_geom = cfg.llc
    supply = _attack_int(cfg, "congruent_supply", llc_geom.ways + 8)
    decoys = _attack_int(cfg, "decoys", 240)
    region_pages = _attack_int(cfg, "pool_region_pages", 4096)
    header = [
        "trial", "seed", "mode", "success", "set_size", "llc_sets", "l1_sets",
    ]
    rows = []
    for t in range(trials):
        seed = derive_seed(cfg.master_seed, f"autosearch:{t}")
        trial_cfg = replace(
            cfg,
            master_seed=seed,
            allocs=[("identity", _SEARCH_BASE, region_pages)],
            victim=None,
        )
        sim = Simulation(trial_cfg)
        h = sim.hierarchy
        rng = random.Random(derive_seed(seed, "pool"))
        region_lines = region_pages * PAGE_BYTES // LINE_BYTES
        probe = _SEARCH_BASE + rng.randrange(region_lines) * LINE_BYTES
        probe_pa = sim.pagemap.translate(probe)
        target = h.llc.set_index(probe_pa, probe_pa)
        pool: set[int] = set()
        # White-box pool construction: the scenario guarantees the pool
        # contains an eviction set; finding it stays latency-only.
        while len(pool) < supply:
            va = _SEARCH_BASE + rng.randrange(region_lines) * LINE_BYTES
            if va == probe:
                continue
            pa = sim.pagemap.translate(va)
            if h.llc.set_index(pa, pa) == target:
                pool.add(va)
        while len(pool) < supply + decoys:
            va = _SEARCH_BASE + rng.randrange(region_lines) * LINE_BYTES
            if va != probe:
                pool.add(va)
        pool_list = sorted(pool)
        rng.shuffle(pool_list)
        oracle = CacheOracle(h)
        try:
            evset = auto_search_evset(oracle, pool_list, probe, llc_geom.ways)
            llc_sets, l1_sets = scatter_metric(evset, h)
            rows.append(
                [t, f"0x{seed:x}", cfg.mode, 1, len(evset), llc_sets, l1_sets]
            )
        except SearchFailure:
            rows.append([t, f"0x{seed:x}", cfg.mode, 0, 0, 0, 0])
    return header, rows


def _attack_prime_probe(cfg: ExperimentConfig, trials: int):
    """Whole-index-space prime+probe through the shared LLC.

    The attacker primes, for every possible victim L1 set index c, the LLC
    set that the victim's line would occupy if its secret were c (the
    white-box group construction of the unprotected threat model). A probe
    line returning from memory implies the victim evicted it, and its own
    VA[s+5:6] names the secret. Trials where nothing missed are scored with
    a seeded uniform forced guess so accuracy has a 1/2^s chance floor.
    """
    if cfg.l1d.set_bits > 6 or cfg.llc.set_bits < 6:
        raise ConfigError(
            "prime-probe scenario needs l1d set_bits <= 6 (secret fits one "
            "page) and llc set_bits >= 6"
        )
    l1_sets = 1 << cfg.l1d.set_bits
    llc_s = cfg.llc.set_bits
    llc_w = cfg.llc.ways
    group_span = 1 << (llc_s + 6)
    sweep = cfg.attack.get("secrets", "random") == "sweep"
    region_pages = (llc_w + 1) * (group_span // PAGE_BYTES)
    victim_va = _PRIME_BASE + region_pages * PAGE_BYTES
    header = [
        "trial", "seed", "mode", "secret", "inferred", "forced_guess",
        "correct", "probe_latencies",
    ]
    rows = []
    for t in range(trials):
        seed = derive_seed(cfg.master_seed, f"primeprobe:{t}")
        if sweep:
            secret = t % l1_sets
        else:
            secret = random.Random(derive_seed(seed, "secret")).randrange(l1_sets)
        trial_cfg = replace(
            cfg,
            master_seed=seed,
            allocs=[
                ("identity", _PRIME_BASE, region_pages),
                ("identity", victim_va, 1),
            ],
            victim=None,
        )
        sim = Simulation(trial_cfg, cores=2)  # core 1 runs the victim
        h = sim.hierarchy
        victim_ppn = sim.pagemap.translate(victim_va) >> 12
        offset = (victim_ppn % (group_span // PAGE_BYTES)) * PAGE_BYTES
        lines = [
            _PRIME_BASE + offset + (c << 6) + (i << (llc_s + 6))
            for c in range(l1_sets)
            for i in range(llc_w)
        ]
        evset = EvictionSet(lines=lines, target_probe=None)
        victim = VictimModel(h, page_base=victim_va, secret=secret, core=1)
        oracle = CacheOracle(h)
        latencies: list[int] = []
        inferred = prime_probe(oracle, evset, victim, latencies_out=latencies)
        forced = ""
        if inferred is None:
            forced = random.Random(derive_seed(seed, "guess")).randrange(l1_sets)
            correct = forced == secret
        else:
            correct = inferred == secret
        rows.append(
            [
                t,
                f"0x{seed:x}",
                cfg.mode,
                secret,
                "" if inferred is None else inferred,
                forced,
                int(correct),
                ";".join(str(c) for c in latencies),
            ]
        )
    return header, rows


# --- bitmap driver ----------------------------------------------------------


def run_bitmap(cfg: ExperimentConfig, target_set: int) -> str:
    """Same-set bitmap over the configured large-page region, as PBM text."""
    from .analysis import bitmap_same_set, bitmap_to_pbm

    pagemap = build_pagemap(cfg)
    large = [a for a in cfg.allocs if a[0] == "large-page"]
    if not large:
        raise SimulationFault(
            0, "bitmap requires a large-page allocation directive"
        )
    _, vbase, npages = large[0]
    l1i_cfg, l1d_cfg, _ = cache_configs(cfg)
    tables = build_tables(cfg)
    bm = bitmap_same_set(
        l1d_cfg, tables.get("l1d"), pagemap, vbase, npages, target_set
    )
    comments = (
        f"mode={cfg.mode} l1d ways={cfg.l1d.ways} s={cfg.l1d.set_bits} "
        f"k={cfg.l1d.rand_bits} seed=0x{cfg.master_seed:x}",
    )
    return bitmap_to_pbm(bm, comments)
