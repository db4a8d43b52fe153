"""Experiment configuration: a flat `key = value` text format.

The format is deliberately primitive so any language can parse it: one
`key = value` pair per line, `#` comments, and four optional sections
(`[l1i]`, `[l1d]`, `[llc]`, `[victim]`, `[attack]`) that scope cache
geometry, the synthetic victim and attack-scenario parameters. `alloc`
is the only repeatable key. Unknown keys and malformed lines are rejected
with their line number.

`format_config` emits the effective configuration (defaults applied) in a
canonical order; parsing that echo reproduces the exact same configuration,
which is what makes every output directory self-describing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MODES = ("baseline", "rcl-n", "rcl-s", "rcl-llc")

_TOP_KEYS = {
    "mode",
    "master_seed",
    "tlb_entries",
    "pt_entries",
    "pool_pages",
    "zero_rt",
    "l1_hit_cycles",
    "serialized_extra_cycles",
    "replay_penalty_cycles",
    "llc_hit_cycles",
    "llc_rt_extra_cycles",
    "memory_cycles",
    "alloc",
}
_GEOM_KEYS = {"ways", "set_bits", "rand_bits"}
_VICTIM_KEYS = {"core", "page", "secret"}
_ATTACK_KEYS = {
    "probe",
    "count",
    "stride_bits",
    "region_policy",
    "region_pages",
    "congruent_supply",
    "decoys",
    "pool_region_pages",
    "secrets",
}


class ConfigError(Exception):
    pass


@dataclass
class CacheGeometry:
    ways: int
    set_bits: int
    rand_bits: int


@dataclass
class VictimSpec:
    page: int
    secret: int
    core: int = 1


@dataclass
class ExperimentConfig:
    mode: str = "baseline"
    master_seed: int = 1
    tlb_entries: int = 8
    pt_entries: int = 8
    pool_pages: int = 65536  # 256 MiB physical pool
    zero_rt: bool = False
    l1_hit_cycles: int = 2
    serialized_extra_cycles: int = 1
    replay_penalty_cycles: int = 2
    llc_hit_cycles: int = 20
    llc_rt_extra_cycles: int = 1
    memory_cycles: int = 100
    allocs: list[tuple[str, int, int]] = field(default_factory=list)
    l1i: CacheGeometry = field(default_factory=lambda: CacheGeometry(8, 6, 6))
    l1d: CacheGeometry = field(default_factory=lambda: CacheGeometry(8, 6, 6))
    llc: CacheGeometry = field(default_factory=lambda: CacheGeometry(16, 10, 10))
    victim: VictimSpec | None = None
    attack: dict[str, str] = field(default_factory=dict)


def _parse_int(value: str, where: str) -> int:
    try:
        return int(value, 0)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {value!r}") from None


def _parse_bool(value: str, where: str) -> bool:
    if value in ("true", "false"):
        return value == "true"
    raise ConfigError(f"{where}: expected true/false, got {value!r}")


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    geoms = {"l1i": cfg.l1i, "l1d": cfg.l1d, "llc": cfg.llc}
    victim_raw: dict[str, int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("l1i", "l1d", "llc", "victim", "attack"):
                raise ConfigError(f"{where}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if section in ("l1i", "l1d", "llc"):
            if key not in _GEOM_KEYS:
                raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
            setattr(geoms[section], key, _parse_int(value, where))
        elif section == "victim":
            if key not in _VICTIM_KEYS:
                raise ConfigError(f"{where}: unknown key {key!r} in [victim]")
            victim_raw[key] = _parse_int(value, where)
        elif section == "attack":
            if key not in _ATTACK_KEYS:
                raise ConfigError(f"{where}: unknown key {key!r} in [attack]")
            cfg.attack[key] = value
        else:
            if key not in _TOP_KEYS:
                raise ConfigError(f"{where}: unknown key {key!r}")
            if key == "mode":
                if value not in MODES:
                    raise ConfigError(
                        f"{where}: mode must be one of {', '.join(MODES)}"
                    )
                cfg.mode = value
            elif key == "zero_rt":
                cfg.zero_rt = _parse_bool(value, where)
            elif key == "alloc":
                parts = value.split()
                if len(parts) != 3:
                    raise ConfigError(
                        f"{where}: alloc needs '<policy> <vbase> <npages>'"
                    )
                policy = parts[0]
                cfg.allocs.append(
                    (
                        policy,
                        _parse_int(parts[1], where),
                        _parse_int(parts[2], where),
                    )
                )
            else:
                setattr(cfg, key, _parse_int(value, where))
    if "page" in victim_raw or "secret" in victim_raw:
        try:
            cfg.victim = VictimSpec(
                page=victim_raw["page"],
                secret=victim_raw["secret"],
                core=victim_raw.get("core", 1),
            )
        except KeyError as exc:
            raise ConfigError(f"[victim] section is missing {exc}") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}")
    if not 4 <= cfg.pt_entries <= 8:
        raise ConfigError("pt_entries must be within [4, 8]")
    if cfg.tlb_entries < 1:
        raise ConfigError("tlb_entries must be >= 1")
    if cfg.pool_pages < 1:
        raise ConfigError("pool_pages must be >= 1")
    for name, geom in (("l1i", cfg.l1i), ("l1d", cfg.l1d), ("llc", cfg.llc)):
        if geom.ways < 1:
            raise ConfigError(f"[{name}] ways must be >= 1")
        if not 1 <= geom.set_bits <= 16:
            raise ConfigError(f"[{name}] set_bits must be within [1, 16]")
        if not 0 <= geom.rand_bits <= 16:
            raise ConfigError(f"[{name}] rand_bits must be within [0, 16]")
    for policy, _, _ in cfg.allocs:
        if policy not in ("identity", "sequential", "random-permutation", "large-page"):
            raise ConfigError(f"unknown alloc policy {policy!r}")
    if cfg.victim is not None:
        if not 0 <= cfg.victim.secret < (1 << cfg.l1d.set_bits):
            raise ConfigError("victim secret outside the L1-D set range")


def format_config(cfg: ExperimentConfig) -> str:
    """Canonical echo of the effective configuration; parses back equal."""
    lines = [
        f"mode = {cfg.mode}",
        f"master_seed = 0x{cfg.master_seed:x}",
        f"tlb_entries = {cfg.tlb_entries}",
        f"pt_entries = {cfg.pt_entries}",
        f"pool_pages = {cfg.pool_pages}",
        f"zero_rt = {'true' if cfg.zero_rt else 'false'}",
        f"l1_hit_cycles = {cfg.l1_hit_cycles}",
        f"serialized_extra_cycles = {cfg.serialized_extra_cycles}",
        f"replay_penalty_cycles = {cfg.replay_penalty_cycles}",
        f"llc_hit_cycles = {cfg.llc_hit_cycles}",
        f"llc_rt_extra_cycles = {cfg.llc_rt_extra_cycles}",
        f"memory_cycles = {cfg.memory_cycles}",
    ]
    for policy, vbase, npages in cfg.allocs:
        lines.append(f"alloc = {policy} 0x{vbase:x} {npages}")
    for name, geom in (("l1i", cfg.l1i), ("l1d", cfg.l1d), ("llc", cfg.llc)):
        lines.append(f"[{name}]")
        lines.append(f"ways = {geom.ways}")
        lines.append(f"set_bits = {geom.set_bits}")
        lines.append(f"rand_bits = {geom.rand_bits}")
    if cfg.victim is not None:
        lines.append("[victim]")
        lines.append(f"core = {cfg.victim.core}")
        lines.append(f"page = 0x{cfg.victim.page:x}")
        lines.append(f"secret = {cfg.victim.secret}")
    if cfg.attack:
        lines.append("[attack]")
        for key in sorted(cfg.attack):
            lines.append(f"{key} = {cfg.attack[key]}")
    return "\n".join(lines) + "\n"
