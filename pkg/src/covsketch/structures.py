"""Ground-truth generators, structure projections, and error metrics.

Structure classes: low-rank PSD, Toeplitz low-rank PSD (line spectra in
conjugate pairs), sparse PSD (embedded block), sparse symmetric, and sparse
rank-one (lifted sparse signal). Also: the diagonal-averaging Toeplitz
projection, best rank-r / best k-term approximations, the circulant-embedding
spectral norm bound, and NMSE.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import ParameterError, StructureError, UndefinedMetricError
from .seeds import substream

_PSD_RETRIES = 100


@dataclass(frozen=True)
class StructuredTruth:
    """A ground-truth matrix tagged with its structure class and parameters."""

    matrix: np.ndarray = field(repr=False)
    kind: str
    params: Dict
    seed: int

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ToeplitzSpec:
    """Line-spectrum parameters: T_k = sum_j amp_j cos(2 pi f_j k)."""

    frequencies: np.ndarray  # r/2 values in (0, 1/2)
    amplitudes: np.ndarray  # positive reals

    def build(self, n: int) -> np.ndarray:
        k = np.arange(n)
        first_row = np.zeros(n)
        for f, a in zip(self.frequencies, self.amplitudes):
            first_row += a * np.cos(2.0 * np.pi * f * k)
        idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
        return first_row[idx]


def gen_lowrank_psd(n: int, r: int, seed: int) -> StructuredTruth:
    """Sigma = L L' with L an n x r i.i.d. standard normal factor."""
    if not 1 <= r <= n:
        raise ParameterError(f"need 1 <= r <= n, got r={r}, n={n}")
    rng = substream(seed)
    L = rng.standard_normal((n, r))
    return StructuredTruth(matrix=L @ L.T, kind="lowrank_psd", params={"r": r}, seed=seed)


def gen_toeplitz_lowrank(n: int, r: int, seed: int) -> StructuredTruth:
    """PSD Toeplitz of rank r from r/2 random conjugate frequency pairs.

    Frequencies are drawn uniformly from (0.001, 0.499) and resampled when a
    pair comes within 1e-3 of another (or of the endpoints), which would
    collapse the rank. Amplitudes are |N(0, 1)| draws. Rank is validated by
    eigendecomposition, resampling with a derived sub-seed on failure.
    """
    if r % 2 or not 2 <= r <= n:
        raise ParameterError(f"need even r with 2 <= r <= n, got r={r}, n={n}")
    half = r // 2
    for attempt in range(_PSD_RETRIES):
        rng = substream(seed, attempt)
        freqs = np.sort(rng.uniform(0.001, 0.499, size=half))
        if half > 1 and np.min(np.diff(freqs)) < 1e-3:
            continue
        amps = np.abs(rng.standard_normal(half))
        if np.min(amps) < 1e-6:
            continue
        spec = ToeplitzSpec(frequencies=freqs, amplitudes=amps)
        T = spec.build(n)
        w = np.linalg.eigvalsh(T)
        if w[0] < -1e-9 * w[-1]:
            continue
        if np.count_nonzero(w > 1e-8 * w[-1]) != r:
            continue
        params = {"r": r, "frequencies": freqs, "amplitudes": amps}
        return StructuredTruth(matrix=T, kind="toeplitz_lowrank", params=params, seed=seed)
    raise ParameterError(
        f"could not generate a rank-{r} PSD Toeplitz matrix in {_PSD_RETRIES} attempts"
    )


def gen_sparse_psd(n: int, k: int, seed: int) -> StructuredTruth:
    """Random sqrt(k) x sqrt(k) PSD block embedded on a random index subset."""
    root = int(round(np.sqrt(k)))
    if root * root != k:
        raise ParameterError(f"k={k} is not a perfect square")
    if root > n:
        raise ParameterError(f"sqrt(k)={root} exceeds n={n}")
    rng = substream(seed)
    support = rng.choice(n, size=root, replace=False)
    L = rng.standard_normal((root, root))
    block = L @ L.T
    M = np.zeros((n, n))
    M[np.ix_(support, support)] = block
    params = {"k": k, "support": np.sort(support)}
    return StructuredTruth(matrix=M, kind="sparse_psd", params=params, seed=seed)


def gen_sparse_symmetric(n: int, k: int, seed: int) -> StructuredTruth:
    """Symmetric matrix with <= k Gaussian nonzeros on a random support."""
    if not 1 <= k <= n * n:
        raise ParameterError(f"need 1 <= k <= n^2, got k={k}")
    rng = substream(seed)
    M = np.zeros((n, n))
    # upper-triangular positions in random order; diagonal costs 1 nonzero,
    # off-diagonal costs 2 after symmetrization
    iu, ju = np.triu_indices(n)
    order = rng.permutation(len(iu))
    budget = k
    for idx in order:
        i, j = int(iu[idx]), int(ju[idx])
        cost = 1 if i == j else 2
        if cost > budget:
            continue
        v = rng.standard_normal()
        M[i, j] = v
        M[j, i] = v
        budget -= cost
        if budget == 0:
            break
    return StructuredTruth(matrix=M, kind="sparse_symmetric", params={"k": k}, seed=seed)


def gen_sparse_rankone(
    n: int, k: int, seed: int, power_law: Optional[float] = None
) -> StructuredTruth:
    """Lifted sparse signal x x' with ||x||_0 <= k.

    Entries of x are standard normal on a random k-subset; with power_law set
    the magnitudes are deterministic 1/l^alpha with random signs.
    """
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}")
    if power_law is not None and power_law <= 1.0:
        raise ParameterError(f"power-law exponent must exceed 1, got {power_law}")
    rng = substream(seed)
    support = rng.choice(n, size=k, replace=False)
    x = np.zeros(n)
    if power_law is None:
        vals = rng.standard_normal(k)
        while np.min(np.abs(vals)) < 1e-12:
            vals = rng.standard_normal(k)
    else:
        signs = rng.integers(0, 2, size=k) * 2.0 - 1.0
        vals = signs / (np.arange(1, k + 1) ** power_law)
    x[support] = vals
    params = {"k": k, "x": x, "power_law": power_law}
    return StructuredTruth(matrix=np.outer(x, x), kind="sparse_rankone", params=params, seed=seed)


def toeplitz_project(M: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto Toeplitz matrices: average each diagonal."""
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    if M.shape != (n, n):
        raise StructureError(f"expected a square matrix, got shape {M.shape}")
    i, j = np.indices((n, n))
    offset = (i - j).ravel() + (n - 1)
    sums = np.bincount(offset, weights=M.ravel(), minlength=2 * n - 1)
    counts = np.bincount(offset, minlength=2 * n - 1)
    means = sums / counts
    return means[(i - j) + (n - 1)]


def is_toeplitz(M: np.ndarray, rtol: float = 1e-10) -> bool:
    M = np.asarray(M, dtype=np.float64)
    scale = max(np.max(np.abs(M)), 1e-300)
    return bool(np.max(np.abs(M - toeplitz_project(M))) <= rtol * scale)


def best_rank_r(M: np.ndarray, r: int) -> np.ndarray:
    """Best rank-r approximation by SVD truncation."""
    M = np.asarray(M, dtype=np.float64)
    if not 1 <= r <= min(M.shape):
        raise ParameterError(f"need 1 <= r <= min(shape), got r={r}")
    U, s, Vt = np.linalg.svd(M)
    return (U[:, :r] * s[:r]) @ Vt[:r]


def best_k_term(M: np.ndarray, k: int) -> np.ndarray:
    """Keep the k largest-magnitude entries; ties broken row-major."""
    M = np.asarray(M, dtype=np.float64)
    if not 1 <= k <= M.size:
        raise ParameterError(f"need 1 <= k <= {M.size}, got k={k}")
    flat = M.ravel()
    # stable sort on -|v| keeps row-major order among equal magnitudes
    order = np.argsort(-np.abs(flat), kind="stable")
    out = np.zeros_like(flat)
    keep = order[:k]
    out[keep] = flat[keep]
    return out.reshape(M.shape)


def circulant_norm_bound(T: np.ndarray):
    """Spectral norm bound for a symmetric Toeplitz matrix via its
    (2n-1)-circulant embedding.

    Returns (bound, eigen_list) where the eigenvalues are
    lambda_i = T_0 + 2 sum_l T_l cos(2 pi i l / (2n - 1)) and
    ||T|| <= bound = max_i |lambda_i|.
    """
    T = np.asarray(T, dtype=np.float64)
    if not is_toeplitz(T):
        raise StructureError("input is not Toeplitz")
    n = T.shape[0]
    coeffs = T[0]  # T_0 .. T_{n-1}
    i = np.arange(2 * n - 1)[:, None]
    l = np.arange(1, n)[None, :]
    lam = coeffs[0] + 2.0 * (np.cos(2.0 * np.pi * i * l / (2 * n - 1)) @ coeffs[1:])
    return float(np.max(np.abs(lam))), lam


def nmse(est: np.ndarray, truth: np.ndarray) -> float:
    """Normalized mean squared error ||est - truth||_F^2 / ||truth||_F^2."""
    truth = np.asarray(truth, dtype=np.float64)
    denom = np.linalg.norm(truth) ** 2
    if denom == 0.0:
        raise UndefinedMetricError("NMSE undefined for zero truth")
    return float(np.linalg.norm(np.asarray(est) - truth) ** 2 / denom)


# --- serialization ---------------------------------------------------------


def save_truth(truth: StructuredTruth, matrix_path, meta_path) -> None:
    """CSV matrix plus key=value sidecar (class, params, seed)."""
    from .sensing import save_matrix_csv

    save_matrix_csv(truth.matrix, matrix_path)
    lines = [f"class={truth.kind}", f"n={truth.n}", f"seed={truth.seed}"]
    for key, val in truth.params.items():
        if val is None:
            continue
        if isinstance(val, np.ndarray):
            lines.append(f"{key}={','.join('%.17g' % v for v in val)}")
        else:
            lines.append(f"{key}={val}")
    with open(meta_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_truth(matrix_path, meta_path) -> StructuredTruth:
    from .sensing import load_matrix_csv

    matrix = load_matrix_csv(matrix_path)
    params: Dict = {}
    kind = "unknown"
    seed = 0
    with open(meta_path) as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, val = line.split("=", 1)
            if key == "class":
                kind = val
            elif key == "seed":
                seed = int(val)
            elif key == "n":
                continue
            elif key in ("r", "k"):
                params[key] = int(val)
            elif "," in val:
                params[key] = np.array([float(v) for v in val.split(",")])
            else:
                try:
                    params[key] = float(val)
                except ValueError:
                    params[key] = val
    return StructuredTruth(matrix=matrix, kind=kind, params=params, seed=seed)
