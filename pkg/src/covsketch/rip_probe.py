"""Empirical RIP, isotropy, and Toeplitz-norm probes.

These routines measure concentration of the debiased quadratic operator
(the RIP-l2/l1 ratio (1/m)||B(X)||_1 / ||X||_F), the l2 isometry of the
isotropic combination on Toeplitz matrices, the deviation of the empirical
second-moment map from identity, and the growth of ||T(zz')|| against
log^{3/2} n. All outputs are empirical quantiles over Monte Carlo trials,
never certified bounds.
"""

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .errors import DegenerateInputError, ParameterError, UnsupportedRegimeError
from .seeds import substream
from .sensing import (
    Distribution,
    SensingEnsemble,
    debiased_apply,
    isotropic_apply,
    isotropic_combo_coeffs,
)
from .structures import (
    circulant_norm_bound,
    gen_lowrank_psd,
    gen_sparse_symmetric,
    gen_toeplitz_lowrank,
    toeplitz_project,
)

_QUANTS = (0.0, 0.05, 0.5, 0.95, 1.0)


@dataclass(frozen=True)
class RipEstimate:
    kind: str
    ratios: np.ndarray
    quantiles: Tuple[float, float, float, float, float]
    m: int
    n: int
    trials: int

    @property
    def spread(self) -> float:
        """max/min ratio over the sampled trials."""
        return float(self.quantiles[-1] / self.quantiles[0])

    @property
    def interval_width(self) -> float:
        """width of the [5%, 95%] quantile interval."""
        return float(self.quantiles[3] - self.quantiles[1])


def _finish(kind, ratios, m, n) -> RipEstimate:
    ratios = np.asarray(ratios)
    q = tuple(float(v) for v in np.quantile(ratios, _QUANTS))
    return RipEstimate(kind=kind, ratios=ratios, quantiles=q, m=m, n=n, trials=len(ratios))


def _sample_nonzero(sampler, trial):
    for attempt in range(100):
        X = sampler(trial * 1000 + attempt)
        norm = np.linalg.norm(X)
        if norm > 0:
            return X / norm
    raise DegenerateInputError("class sampler produced only zero matrices")


def estimate_rip(
    ens_factory: Callable[[int], SensingEnsemble],
    class_sampler: Callable[[int], np.ndarray],
    trials: int,
    fresh_ensemble_per_trial: bool = True,
    kind: str = "rank_r",
) -> RipEstimate:
    """Sample the RIP-l2/l1 ratio of the debiased operator.

    ens_factory(i) supplies the ensemble for trial i (called once with i=0
    when fresh_ensemble_per_trial is off); class_sampler(seed) draws a random
    matrix of the probed class, normalized here to unit Frobenius norm.
    """
    if trials < 10:
        raise ParameterError("need at least 10 trials")
    ens = ens_factory(0)
    ratios = np.empty(trials)
    for t in range(trials):
        if fresh_ensemble_per_trial and t > 0:
            ens = ens_factory(t)
        X = _sample_nonzero(class_sampler, t)
        bx = debiased_apply(ens, X)
        ratios[t] = np.sum(np.abs(bx)) / len(bx)
    return _finish(kind, ratios, ens.m, ens.n)


def rip_l2l2_toeplitz(
    ens_factory: Callable[[int], SensingEnsemble],
    class_sampler: Callable[[int], np.ndarray],
    trials: int,
    fresh_ensemble_per_trial: bool = True,
) -> RipEstimate:
    """Sample the l2/l2 ratio of the isotropic combination on Toeplitz inputs."""
    if trials < 10:
        raise ParameterError("need at least 10 trials")
    ens = ens_factory(0)
    ratios = np.empty(trials)
    for t in range(trials):
        if fresh_ensemble_per_trial and t > 0:
            ens = ens_factory(t)
        X = _sample_nonzero(class_sampler, t)
        bx = isotropic_apply(ens, X)
        ratios[t] = np.linalg.norm(bx) / np.sqrt(len(bx))
    return _finish("toeplitz_rank_r", ratios, ens.m, ens.n)


def isotropy_deviation(
    dist: Distribution,
    n: int,
    sample_count: int,
    test_matrix: np.ndarray,
    seed: int = 0,
    batch: int = 50_000,
) -> float:
    """||(1/N) sum_i B_i <B_i, X> - X||_F / ||X||_F for the isotropic B_i.

    The test matrix must have a constant diagonal (the regime where the
    combination is exactly isotropic); mu4 > 3 is not covered.
    """
    X = np.asarray(test_matrix, dtype=np.float64)
    if np.linalg.norm(X) == 0:
        raise DegenerateInputError("deviation undefined for zero test matrix")
    diag = np.diag(X)
    if np.max(np.abs(diag - diag[0])) > 1e-10 * max(1.0, np.max(np.abs(X))):
        raise ParameterError("test matrix must have a constant diagonal")
    mu4 = dist.mu4
    if mu4 > 3.0:
        raise UnsupportedRegimeError("mu4 > 3 is outside the isotropy construction")
    rng = substream(seed)
    acc = np.zeros((n, n))
    if mu4 == 3.0:
        done = 0
        while done < sample_count:
            b = min(batch, sample_count - done)
            a1 = dist.sample(rng, (b, n))
            a2 = dist.sample(rng, (b, n))
            q = 0.5 * (np.einsum("ij,jk,ik->i", a1, X, a1, optimize=True)
                       - np.einsum("ij,jk,ik->i", a2, X, a2, optimize=True))
            acc += 0.5 * ((a1 * q[:, None]).T @ a1 - (a2 * q[:, None]).T @ a2)
            done += b
    else:
        alpha, beta, gamma = isotropic_combo_coeffs(mu4, n)
        done = 0
        while done < sample_count:
            b = min(batch, sample_count - done)
            a3 = dist.sample(rng, (b, n))
            a2 = dist.sample(rng, (b, n))
            a1 = dist.sample(rng, (b, n))
            q = (alpha * np.einsum("ij,jk,ik->i", a3, X, a3, optimize=True)
                 + beta * np.einsum("ij,jk,ik->i", a2, X, a2, optimize=True)
                 + gamma * np.einsum("ij,jk,ik->i", a1, X, a1, optimize=True))
            acc += (alpha * (a3 * q[:, None]).T @ a3
                    + beta * (a2 * q[:, None]).T @ a2
                    + gamma * (a1 * q[:, None]).T @ a1)
            done += b
    mean = acc / sample_count
    return float(np.linalg.norm(mean - X) / np.linalg.norm(X))


def toeplitz_norm_stats(
    dist: Distribution, n: int, trials: int, seed: int = 0
) -> Tuple[float, np.ndarray]:
    """Samples of ||T(zz')|| / log^{3/2} n over i.i.d. draws of z.

    The spectral norm is taken from a dense eigendecomposition; the circulant
    embedding bound is cross-checked to dominate it on every sample.
    """
    if trials < 50:
        raise ParameterError("need at least 50 trials")
    rng = substream(seed)
    denom = np.log(n) ** 1.5
    samples = np.empty(trials)
    for t in range(trials):
        z = dist.sample(rng, n)
        T = toeplitz_project(np.outer(z, z))
        dense = float(np.max(np.abs(np.linalg.eigvalsh(T))))
        bound, _ = circulant_norm_bound(T)
        if bound < dense * (1.0 - 1e-9):
            raise AssertionError(
                f"circulant bound {bound} below dense norm {dense} at trial {t}"
            )
        samples[t] = dense / denom
    return float(np.max(samples)), samples


def l1l1_failure_ratio(n: int, r: int, m: int, seed: int = 0) -> float:
    """Mean-absolute measurement ratio for the two equal-nuclear-norm
    diagonal test matrices diag(I, I, 0) and diag(I, -I, 0).

    Under the raw quadratic operator the first concentrates at Theta(r) and
    the second at Theta(sqrt(r)), so the ratio grows with r; this is what
    rules out an l1/l1 isometry for low-rank matrices.
    """
    if r % 2 or r > n:
        raise ParameterError(f"need even r <= n, got r={r}, n={n}")
    from .sensing import apply, draw_ensemble

    ens = draw_ensemble(n, m, "gaussian", seed)
    X1 = np.diag(np.concatenate([np.ones(r), np.zeros(n - r)]))
    X2 = np.diag(np.concatenate([np.ones(r // 2), -np.ones(r // 2), np.zeros(n - r)]))
    r1 = float(np.mean(np.abs(apply(ens, X1))))
    r2 = float(np.mean(np.abs(apply(ens, X2))))
    return r1 / r2


# --- class samplers (unit-normalized structure generators) ------------------


def rank_r_sampler(n: int, r: int) -> Callable[[int], np.ndarray]:
    def sample(seed: int) -> np.ndarray:
        return gen_lowrank_psd(n, r, seed).matrix

    return sample


def sparse_k_sampler(n: int, k: int) -> Callable[[int], np.ndarray]:
    def sample(seed: int) -> np.ndarray:
        return gen_sparse_symmetric(n, k, seed).matrix

    return sample


def toeplitz_rank_r_sampler(n: int, r: int) -> Callable[[int], np.ndarray]:
    def sample(seed: int) -> np.ndarray:
        return gen_toeplitz_lowrank(n, r, seed).matrix

    return sample
