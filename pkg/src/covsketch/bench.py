"""Config-driven Monte Carlo experiment runner.

A grid sweeps (m, r-or-k, sigma) cells for one structure class, running a
fixed number of independent recovery trials per cell with derived seeds.
Results stream out as TrialRecord rows, deterministic in the base seed and
independent of the worker count.
"""

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ParameterError
from .sensing import draw_ensemble, measure
from .solvers import (
    RecoveryResult,
    SolverConfig,
    pocs,
    recover_lowrank,
    recover_sparse,
    recover_sparse_rankone,
    recover_toeplitz,
)
from .structures import (
    gen_lowrank_psd,
    gen_sparse_psd,
    gen_sparse_rankone,
    gen_sparse_symmetric,
    gen_toeplitz_lowrank,
    nmse,
)

_STRUCTURES = (
    "lowrank_psd",
    "toeplitz_lowrank",
    "sparse_psd",
    "sparse_symmetric",
    "sparse_rankone",
)

ENV_THREADS = "COVSKETCH_THREADS"


@dataclass(frozen=True)
class ExperimentGrid:
    structure: str
    n: int
    m_values: Tuple[int, ...]
    r_or_k_values: Tuple[int, ...]
    sigmas: Tuple[float, ...] = (0.0,)
    trials: int = 20
    threshold: float = 1e-3  # success when sqrt(NMSE) < threshold
    solver: str = "convex"  # convex | pocs
    dist: str = "gaussian"
    base_seed: int = 0
    max_iter: int = 20000
    pocs_iters: int = 2000

    def __post_init__(self):
        if self.structure not in _STRUCTURES:
            raise ConfigError(f"unknown structure {self.structure!r}")
        if self.threshold <= 0:
            raise ConfigError("success threshold must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")

    def cells(self) -> List[Tuple[int, int, float]]:
        return [
            (m, rk, sigma)
            for rk in self.r_or_k_values
            for m in self.m_values
            for sigma in self.sigmas
        ]


@dataclass(frozen=True)
class TrialRecord:
    structure: str
    n: int
    r_or_k: int
    m: int
    sigma: float
    trial_index: int
    seed: int
    nmse: float
    success: bool
    iterations: int
    wall_ms: float
    solver: str


def _gen_truth(structure: str, n: int, r_or_k: int, seed: int):
    if structure == "lowrank_psd":
        return gen_lowrank_psd(n, r_or_k, seed)
    if structure == "toeplitz_lowrank":
        return gen_toeplitz_lowrank(n, r_or_k, seed)
    if structure == "sparse_psd":
        return gen_sparse_psd(n, r_or_k, seed)
    if structure == "sparse_symmetric":
        return gen_sparse_symmetric(n, r_or_k, seed)
    return gen_sparse_rankone(n, r_or_k, seed)


def _solve(grid: ExperimentGrid, structure, meas, ens, r_or_k) -> RecoveryResult:
    cfg = SolverConfig(epsilon=meas.noise_level, max_iter=grid.max_iter)
    if grid.solver == "pocs":
        return pocs(meas, ens, iters=grid.pocs_iters)
    if structure == "lowrank_psd":
        return recover_lowrank(meas, ens, cfg)
    if structure == "toeplitz_lowrank":
        return recover_toeplitz(meas, ens, cfg)
    if structure in ("sparse_psd", "sparse_symmetric"):
        cfg.psd_constraint = structure == "sparse_psd"
        return recover_sparse(meas, ens, cfg)
    cfg.lam = 1.0 / r_or_k
    return recover_sparse_rankone(meas, ens, cfg)


def _trial_seed(base_seed: int, cell_index: int, trial: int) -> int:
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(cell_index, trial))
    return int(ss.generate_state(1, np.uint64)[0])


def run_trial(grid: ExperimentGrid, cell_index: int, trial: int) -> TrialRecord:
    m, r_or_k, sigma = grid.cells()[cell_index]
    seed = _trial_seed(grid.base_seed, cell_index, trial)
    truth = _gen_truth(grid.structure, grid.n, r_or_k, seed)
    ens = draw_ensemble(grid.n, m, grid.dist, _trial_seed(seed, 1, 0))
    noise_kind = "l2_bounded" if grid.structure == "toeplitz_lowrank" else "l1_bounded"
    meas = measure(ens, truth.matrix, sigma=sigma, noise_kind=noise_kind,
                   noise_seed=_trial_seed(seed, 2, 0))
    t0 = time.perf_counter()
    try:
        result = _solve(grid, grid.structure, meas, ens, r_or_k)
        err = nmse(result.estimate, truth.matrix)
        iterations = result.iterations
    except Exception:
        # solver failures become unsuccessful records, never abort the grid
        err = 1.0
        iterations = 0
    wall_ms = (time.perf_counter() - t0) * 1e3
    return TrialRecord(
        structure=grid.structure,
        n=grid.n,
        r_or_k=r_or_k,
        m=m,
        sigma=sigma,
        trial_index=trial,
        seed=seed,
        nmse=err,
        success=bool(np.sqrt(err) < grid.threshold),
        iterations=iterations,
        wall_ms=wall_ms,
        solver=grid.solver,
    )


def _worker_count(workers: Optional[int]) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get(ENV_THREADS)
    if env:
        return max(1, int(env))
    return 1


def run_grid(grid: ExperimentGrid, workers: Optional[int] = None) -> List[TrialRecord]:
    """Run every (cell, trial) pair; output in canonical (cell, trial) order."""
    tasks = [
        (ci, t) for ci in range(len(grid.cells())) for t in range(grid.trials)
    ]
    count = _worker_count(workers)
    if count == 1:
        return [run_trial(grid, ci, t) for ci, t in tasks]
    with ProcessPoolExecutor(max_workers=count) as pool:
        records = list(
            pool.map(run_trial, [grid] * len(tasks), *zip(*tasks), chunksize=4)
        )
    return records


def info_limit(structure: str, n: int, r_or_k: int) -> int:
    """Minimal parameter count of the structure class."""
    if structure == "lowrank_psd":
        r = r_or_k
        if not 1 <= r <= n:
            raise ParameterError(f"need 1 <= r <= n, got r={r}")
        return n * r - r * (r - 1) // 2
    if structure == "toeplitz_lowrank":
        if r_or_k < 1:
            raise ParameterError("need r >= 1")
        return 2 * r_or_k
    if structure == "sparse_psd":
        root = int(round(np.sqrt(r_or_k)))
        if root * root != r_or_k:
            raise ParameterError(f"k={r_or_k} is not a perfect square")
        return root * (root + 1) // 2
    if structure == "sparse_rankone":
        if r_or_k < 1:
            raise ParameterError("need k >= 1")
        return r_or_k
    if structure == "sparse_symmetric":
        # distinct entries of a symmetric support: about half the nonzeros
        return (r_or_k + 1) // 2
    raise ConfigError(f"unknown structure {structure!r}")


# --- CSV emission -----------------------------------------------------------

_BASE_COLUMNS = [
    "structure", "n", "r_or_k", "m", "sigma", "trial_index",
    "seed", "nmse", "success", "iterations",
]


def emit_csv(records: Sequence[TrialRecord], path, include_timing: bool = False) -> None:
    """Write records with a stable column order.

    Timing is opt-in: wall_ms varies between runs, and the default output
    must be byte-identical for a fixed seed.
    """
    columns = list(_BASE_COLUMNS)
    if include_timing:
        columns.append("wall_ms")
    columns.append("solver")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for rec in records:
            row = [
                rec.structure, rec.n, rec.r_or_k, rec.m, "%.17g" % rec.sigma,
                rec.trial_index, rec.seed, "%.17g" % rec.nmse,
                int(rec.success), rec.iterations,
            ]
            if include_timing:
                row.append("%.3f" % rec.wall_ms)
            row.append(rec.solver)
            writer.writerow(row)


def read_csv(path) -> List[TrialRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                TrialRecord(
                    structure=row["structure"],
                    n=int(row["n"]),
                    r_or_k=int(row["r_or_k"]),
                    m=int(row["m"]),
                    sigma=float(row["sigma"]),
                    trial_index=int(row["trial_index"]),
                    seed=int(row["seed"]),
                    nmse=float(row["nmse"]),
                    success=bool(int(row["success"])),
                    iterations=int(row["iterations"]),
                    wall_ms=float(row.get("wall_ms", 0.0) or 0.0),
                    solver=row["solver"],
                )
            )
    return records


def summarize(records: Sequence[TrialRecord]) -> Dict[Tuple[int, int, float], float]:
    """Empirical success probability per (m, r_or_k, sigma) cell."""
    hits: Dict[Tuple[int, int, float], List[bool]] = {}
    for rec in records:
        hits.setdefault((rec.m, rec.r_or_k, rec.sigma), []).append(rec.success)
    return {cell: float(np.mean(vals)) for cell, vals in hits.items()}
