from rclsim.config import CacheGeometry, ExperimentConfig
from rclsim.harness import Simulation


def make_sim(
    mode="baseline",
    allocs=None,
    l1=(8, 6, 6),
    llc=(16, 10, 10),
    seed=1,
    zero_rt=False,
    pt_entries=8,
    victim=None,
    cores=None,
) -> Simulation:
    """One-stop simulation builder for tests; identity-maps 16 MiB by default."""
    cfg = ExperimentConfig(
        mode=mode,
        master_seed=seed,
        zero_rt=zero_rt,
        pt_entries=pt_entries,
        allocs=allocs if allocs is not None else [("identity", 0x0, 4096)],
        victim=victim,
    )
    cfg.l1i = CacheGeometry(*l1)
    cfg.l1d = CacheGeometry(*l1)
    cfg.llc = CacheGeometry(*llc)
    return Simulation(cfg, cores=cores)
