"""Sub-Gaussian sensing ensembles and the quadratic measurement operator.

A sensing ensemble is a set of m random vectors a_i with i.i.d. zero-mean,
unit-variance entries. The forward operator maps a symmetric matrix M to the
quadratic forms a_i' M a_i. Also provided: the adjoint, the debiased
(pairwise-difference) operator, the isotropic linear combination restricted
to constant-diagonal matrices, the m x m Gram matrix, and a single-pass
streaming sketch aggregator.
"""

import struct
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from .errors import ConfigError, EmptyInputError, ParameterError, ShapeError
from .seeds import substream

_MAGIC = b"CVSK1"

# fourth moments of the shipped entry distributions
_MU4 = {
    "gaussian": 3.0,
    "rademacher": 1.0,
    "uniform_scaled": 1.8,  # sqrt(3) * U[-1, 1]
}

_KIND_CODE = {"gaussian": 0, "rademacher": 1, "uniform_scaled": 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


@dataclass(frozen=True)
class Distribution:
    """Entry distribution of the sensing vectors (zero mean, unit variance)."""

    kind: str

    def __post_init__(self):
        if self.kind not in _MU4:
            raise ConfigError(
                f"unknown distribution kind {self.kind!r}; "
                f"expected one of {sorted(_MU4)}"
            )

    @property
    def mu4(self) -> float:
        return _MU4[self.kind]

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(shape)
        if self.kind == "rademacher":
            return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
        # uniform_scaled: sqrt(3) * U[-1, 1]
        return np.sqrt(3.0) * rng.uniform(-1.0, 1.0, size=shape)


GAUSSIAN = Distribution("gaussian")
RADEMACHER = Distribution("rademacher")
UNIFORM_SCALED = Distribution("uniform_scaled")


@dataclass(frozen=True)
class SensingEnsemble:
    """m sensing vectors of length n, reproducible from (n, m, dist, seed)."""

    n: int
    m: int
    dist: Distribution
    seed: int
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.vectors.shape != (self.m, self.n):
            raise ShapeError(
                f"vectors shape {self.vectors.shape} != ({self.m}, {self.n})"
            )


@dataclass(frozen=True)
class MeasurementSet:
    """Measurement vector y plus the noise model it was generated under."""

    y: np.ndarray
    noise_kind: str = "none"  # none | l1_bounded | l2_bounded
    noise_level: float = 0.0

    def __post_init__(self):
        if self.noise_kind not in ("none", "l1_bounded", "l2_bounded"):
            raise ConfigError(f"unknown noise kind {self.noise_kind!r}")
        if self.noise_kind == "none" and self.noise_level != 0.0:
            raise ConfigError("noise_level must be 0 when noise_kind is 'none'")


@dataclass(frozen=True)
class SketchSchedule:
    """Stream-time to sketch-index assignment produced by sketch_stream."""

    schedule_seed: int
    counts: np.ndarray
    unassigned: np.ndarray  # indices that received no stream element


def draw_ensemble(
    n: int,
    m: int,
    dist: Union[Distribution, str],
    seed: int,
) -> SensingEnsemble:
    """Draw m i.i.d. sensing vectors with i.i.d. entries from dist."""
    if isinstance(dist, str):
        dist = Distribution(dist)
    if n < 1 or m < 1:
        raise ParameterError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    rng = substream(seed)
    vectors = dist.sample(rng, (m, n))
    return SensingEnsemble(n=n, m=m, dist=dist, seed=seed, vectors=vectors)


def _check_matrix(ens: SensingEnsemble, M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.shape != (ens.n, ens.n):
        raise ShapeError(f"matrix shape {M.shape} incompatible with n={ens.n}")
    return M


def apply(ens: SensingEnsemble, M: np.ndarray) -> np.ndarray:
    """Forward operator: output_i = a_i' M a_i."""
    M = _check_matrix(ens, M)
    A = ens.vectors
    return np.einsum("ij,jk,ik->i", A, M, A, optimize=True)


def adjoint(ens: SensingEnsemble, v: np.ndarray) -> np.ndarray:
    """Adjoint operator: sum_i v_i a_i a_i'."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (ens.m,):
        raise ShapeError(f"vector length {v.shape} incompatible with m={ens.m}")
    A = ens.vectors
    return (A * v[:, None]).T @ A


def debiased_apply(ens: SensingEnsemble, M: np.ndarray) -> np.ndarray:
    """Pairwise-difference measurements <A_{2i-1} - A_{2i}, M>.

    An odd trailing vector is dropped with a warning so arbitrary-m grids
    can be swept.
    """
    if ens.m < 2:
        raise ParameterError("debiased operator needs m >= 2 measurements")
    q = apply(ens, M)
    if ens.m % 2:
        warnings.warn(
            f"odd measurement count m={ens.m}: dropping the last vector",
            stacklevel=2,
        )
        q = q[:-1]
    return q[0::2] - q[1::2]


def expected_gram(
    M: np.ndarray, mu4: float, n: int, debiased: bool = False
) -> np.ndarray:
    """Closed-form E[A <A, M>] (or the debiased companion E[B <B, M>]).

    Raw operator (constant-diagonal M): 2M + (1 + (mu4 - 3)/n) tr(M) I.
    Debiased operator (any symmetric M): 4M + 2 (mu4 - 3) diag(M).
    """
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    M = np.asarray(M, dtype=np.float64)
    if M.shape != (n, n):
        raise ShapeError(f"matrix shape {M.shape} incompatible with n={n}")
    if debiased:
        return 4.0 * M + 2.0 * (mu4 - 3.0) * np.diag(np.diag(M))
    return 2.0 * M + (1.0 + (mu4 - 3.0) / n) * np.trace(M) * np.eye(n)


def default_xi(mu4: float) -> float:
    """Default mixing constant: twice the feasibility threshold."""
    return 2.0 * np.sqrt(1.5 * (3.0 - mu4))


def isotropic_combo_coeffs(
    mu4: float, n: int, xi: Optional[float] = None
) -> Tuple[float, float, float]:
    """Coefficients (alpha, beta, gamma) making B = alpha A_1 + beta A_2 +
    gamma A_3 isotropic on constant-diagonal matrices, for mu4 < 3.

    Solves the quadratic b^2 + b(1 - xi/sqrt(n)) + (1 - xi/sqrt(n))^2/2
    + 1/2 + xi^2/(2(mu4 - 3)) = 0 directly, then rescales so that
    alpha^2 + beta^2 + gamma^2 = 1/2.
    """
    if not mu4 < 3.0:
        raise ParameterError(
            "isotropic combination requires mu4 < 3; "
            "use the pair-difference construction for mu4 = 3"
        )
    if xi is None:
        xi = default_xi(mu4)
    s = 1.0 - xi / np.sqrt(n)
    disc = -(s * s) - 2.0 + 2.0 * xi * xi / (3.0 - mu4)
    if disc <= 0.0:
        raise ParameterError(
            f"xi={xi} out of range: discriminant {disc} <= 0 "
            f"(need xi^2 > 1.5 (3 - mu4) with margin)"
        )
    b = (-s + np.sqrt(disc)) / 2.0
    c = (-s - np.sqrt(disc)) / 2.0
    alpha = np.sqrt((3.0 - mu4) / (2.0 * xi * xi))
    return float(alpha), float(b * alpha), float(c * alpha)


def isotropic_apply(
    ens: SensingEnsemble,
    M: np.ndarray,
    coeffs: Optional[Tuple[float, float, float]] = None,
) -> np.ndarray:
    """Isotropic combined measurements <B_i, M>.

    For mu4 = 3 this is the half pair-difference B_i = (A_{2i-1} - A_{2i})/2
    (group size 2); for mu4 < 3 groups of three vectors are combined with the
    (alpha, beta, gamma) coefficients (group size 3).
    """
    mu4 = ens.dist.mu4
    if mu4 == 3.0:
        if ens.m < 2:
            raise ParameterError("need m >= 2 for pair-difference combination")
        q = apply(ens, M)
        q = q[: 2 * (ens.m // 2)]
        return 0.5 * (q[0::2] - q[1::2])
    if ens.m < 3:
        raise ParameterError("need m >= 3 for three-term combination")
    if coeffs is None:
        coeffs = isotropic_combo_coeffs(mu4, ens.n)
    alpha, beta, gamma = coeffs
    q = apply(ens, M)
    q = q[: 3 * (ens.m // 3)].reshape(-1, 3)
    return alpha * q[:, 2] + beta * q[:, 1] + gamma * q[:, 0]


def isotropic_group_size(dist: Distribution) -> int:
    return 2 if dist.mu4 == 3.0 else 3


def gram_matrix(ens: SensingEnsemble) -> np.ndarray:
    """Gram matrix of the operator: entry (i, j) = (a_i' a_j)^2. PSD."""
    G = ens.vectors @ ens.vectors.T
    return G * G


def sketch_stream(
    stream: Union[np.ndarray, Iterable[np.ndarray]],
    ens: SensingEnsemble,
    schedule_seed: int,
) -> Tuple[MeasurementSet, SketchSchedule]:
    """Single-pass quadratic sketching of a data stream.

    At each time t a sketch index l_t is chosen uniformly at random and the
    scalar (a_{l_t}' x_t)^2 is folded into a running mean for that index.
    Memory is O(m) beyond the ensemble, independent of stream length.
    """
    rng = substream(schedule_seed)
    sums = np.zeros(ens.m)
    counts = np.zeros(ens.m, dtype=np.int64)
    seen = 0
    for x_t in stream:
        x_t = np.asarray(x_t, dtype=np.float64)
        if x_t.shape != (ens.n,):
            raise ShapeError(f"stream element shape {x_t.shape} != ({ens.n},)")
        idx = int(rng.integers(0, ens.m))
        s = float(ens.vectors[idx] @ x_t)
        sums[idx] += s * s
        counts[idx] += 1
        seen += 1
    if seen == 0:
        raise EmptyInputError("empty stream")
    y = np.zeros(ens.m)
    hit = counts > 0
    y[hit] = sums[hit] / counts[hit]
    schedule = SketchSchedule(
        schedule_seed=schedule_seed,
        counts=counts,
        unassigned=np.flatnonzero(~hit),
    )
    return MeasurementSet(y=y), schedule


def measure(
    ens: SensingEnsemble,
    M: np.ndarray,
    sigma: float = 0.0,
    noise_kind: str = "l1_bounded",
    noise_seed: int = 0,
) -> MeasurementSet:
    """Measure M through the ensemble with bounded uniform noise.

    Noise entries are sigma * U[-1, 1]; the recorded bound is sigma * m for
    an l1 budget and sigma * sqrt(m) for an l2 budget.
    """
    y = apply(ens, M)
    if sigma == 0.0:
        return MeasurementSet(y=y)
    rng = substream(noise_seed)
    y = y + sigma * rng.uniform(-1.0, 1.0, size=ens.m)
    if noise_kind == "l1_bounded":
        level = sigma * ens.m
    elif noise_kind == "l2_bounded":
        level = sigma * np.sqrt(ens.m)
    else:
        raise ConfigError(f"unknown noise kind {noise_kind!r}")
    return MeasurementSet(y=y, noise_kind=noise_kind, noise_level=float(level))


# --- serialization ---------------------------------------------------------


def save_ensemble(ens: SensingEnsemble, path) -> None:
    """Write the binary container: magic, header, row-major float64 rows."""
    header = struct.pack(
        "<5sIIBdq",
        _MAGIC,
        ens.n,
        ens.m,
        _KIND_CODE[ens.dist.kind],
        ens.dist.mu4,
        int(ens.seed),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(ens.vectors, dtype=np.float64).tobytes())


def load_ensemble(path) -> SensingEnsemble:
    with open(path, "rb") as fh:
        raw = fh.read()
    hsize = struct.calcsize("<5sIIBdq")
    magic, n, m, code, mu4, seed = struct.unpack("<5sIIBdq", raw[:hsize])
    if magic != _MAGIC:
        raise ConfigError(f"bad magic {magic!r}; not a covsketch ensemble file")
    kind = _CODE_KIND.get(code)
    if kind is None:
        raise ConfigError(f"unknown distribution code {code}")
    vectors = np.frombuffer(raw[hsize:], dtype=np.float64).reshape(m, n).copy()
    return SensingEnsemble(n=n, m=m, dist=Distribution(kind), seed=seed, vectors=vectors)


def save_matrix_csv(M: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(M, dtype=np.float64), delimiter=",", fmt="%.17g")


def load_matrix_csv(path) -> np.ndarray:
    M = np.loadtxt(path, delimiter=",", dtype=np.float64)
    return np.atleast_2d(M)
