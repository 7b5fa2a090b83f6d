"""Closed-form mechanistic IPC oracle and a seeded dataset generator.

This is a test instrument standing in for simulator output, not a
performance model of any real machine. CPI is built from a base issue term
plus cache-miss and branch-flush stall terms::

    m1    = min(1, A1 * l1d_kb ** -0.5)
    m2    = min(1, A2 * (l2_kb / 1024) ** -0.5)
    mi    = min(1, AI * l1i_kb ** -0.5)
    Lmiss = L2LAT + m2 * MEMLAT
    CPI   = u / width + (r_load + r_store) * m1 * Lmiss
            + mi * Lmiss * FE + r_branch * MISP * PEN
    IPC   = 1 / CPI
"""

import itertools
import math
from dataclasses import dataclass

from .dataset import Dataset, FeatureVector, LabeledSample
from .rng import stream
from .stats_ingest import PRESETS, SystemConfig

_FEATURE_STREAM = 0xFEA7
_NOISE_STREAM = 0x7015E


@dataclass(frozen=True)
class OracleParams:
    A1: float = 2.0
    A2: float = 1.2
    AI: float = 0.25
    L2LAT: float = 15.0
    MEMLAT: float = 120.0
    FE: float = 0.1
    MISP: float = 0.05
    PEN: float = 20.0
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("A1", "A2", "AI", "L2LAT", "MEMLAT", "FE", "MISP", "PEN"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


def table1_grid():
    return [PRESETS["baseline"], PRESETS["aggressive"], PRESETS["lean"]]


def extended_grid():
    grid = []
    for width, l1d, l2, l1i in itertools.product((4, 8, 16), (256, 512, 1024), (4096, 8192, 16384), (16, 32, 64)):
        grid.append(
            SystemConfig(
                f"w{width}-l1i{l1i}-l1d{l1d}-l2_{l2}",
                pipeline_width=width,
                rob_entries=24 * width,
                l1i_kb=l1i,
                l1d_kb=l1d,
                l2_kb=l2,
            )
        )
    return grid


GRIDS = {"table1": table1_grid, "extended": extended_grid}


@dataclass(frozen=True)
class GeneratorConfig:
    n_samples: int = 1000
    r_load: tuple = (0.20, 0.30)
    r_store: tuple = (0.05, 0.10)
    r_branch: tuple = (0.10, 0.20)
    uop_expansion: tuple = (1.0, 1.5)
    num_insts: tuple = (1e6, 1e9)
    grid: str = "extended"
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        for name in ("r_load", "r_store", "r_branch"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi <= 1:
                raise ValueError(f"{name} range must lie within (0, 1]")
        lo, hi = self.uop_expansion
        if not 0 < lo <= hi:
            raise ValueError("uop_expansion range must be positive")
        lo, hi = self.num_insts
        if not 1 <= lo <= hi:
            raise ValueError("num_insts range must be >= 1")
        if self.grid not in GRIDS:
            raise ValueError(f"grid must be one of {sorted(GRIDS)}")


def true_ipc(rates, config, params=None):
    """Noise-free oracle IPC for ``rates = (r_load, r_store, r_branch, u)``."""
    p = params or OracleParams()
    r_load, r_store, r_branch, u = rates
    m1 = min(1.0, p.A1 * config.l1d_kb ** -0.5)
    m2 = min(1.0, p.A2 * (config.l2_kb / 1024.0) ** -0.5)
    mi = min(1.0, p.AI * config.l1i_kb ** -0.5)
    lmiss = p.L2LAT + m2 * p.MEMLAT
    cpi = u / config.pipeline_width + (r_load + r_store) * m1 * lmiss + mi * lmiss * p.FE + r_branch * p.MISP * p.PEN
    return 1.0 / cpi


def generate(gen, params=None):
    """Draw ``gen.n_samples`` labeled samples.

    Sample ``i`` takes its features from ``stream(gen.seed, FEATURE, i)``
    and its noise from ``stream(params.seed, NOISE, i)``.
    """
    params = params or OracleParams()
    grid = GRIDS[gen.grid]()
    log_lo, log_hi = math.log10(gen.num_insts[0]), math.log10(gen.num_insts[1])
    samples = []
    for i in range(gen.n_samples):
        rng = stream(gen.seed, _FEATURE_STREAM, i)
        r_load = rng.uniform(*gen.r_load)
        r_store = rng.uniform(*gen.r_store)
        r_branch = rng.uniform(*gen.r_branch)
        u = rng.uniform(*gen.uop_expansion)
        n_insts = float(round(10.0 ** rng.uniform(log_lo, log_hi)))
        cfg = grid[int(rng.integers(len(grid)))]

        ipc = true_ipc((r_load, r_store, r_branch, u), cfg, params)
        if params.sigma > 0:
            ipc += params.sigma * stream(params.seed, _NOISE_STREAM, i).standard_normal()
        ipc = max(ipc, 0.01)

        fv = FeatureVector(
            numLoadInsts=float(round(r_load * n_insts)),
            numStoreInsts=float(round(r_store * n_insts)),
            numInsts=n_insts,
            numBranches=float(round(r_branch * n_insts)),
            numOps=float(round(u * n_insts)),
            l1i_kb=float(cfg.l1i_kb),
            l1d_kb=float(cfg.l1d_kb),
            l2_kb=float(cfg.l2_kb),
            pipeline_width=float(cfg.pipeline_width),
        )
        samples.append(LabeledSample(fv, float(ipc), "synth", cfg.config_id, str(i), False))
    return Dataset(tuple(samples))


def sample_rates(sample):
    """Recover ``(r_load, r_store, r_branch, u)`` from a raw sample's counts."""
    f = sample.features
    n = f.numInsts
    return f.numLoadInsts / n, f.numStoreInsts / n, f.numBranches / n, f.numOps / n


def config_of(sample):
    f = sample.features
    return SystemConfig(
        sample.config_id,
        pipeline_width=int(f.pipeline_width),
        rob_entries=24 * int(f.pipeline_width),
        l1i_kb=int(f.l1i_kb),
        l1d_kb=int(f.l1d_kb),
        l2_kb=int(f.l2_kb),
    )
