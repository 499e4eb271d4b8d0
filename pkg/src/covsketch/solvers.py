"""Convex recovery solvers for quadratic covariance measurements.

Four programs are implemented with one consensus ADMM engine:

  * trace (or nuclear-norm) minimization with an l1 data-fit ball,
  * the same with an added Toeplitz constraint and an l2 data-fit ball,
  * entrywise l1 minimization (sparse matrices),
  * trace + lambda * l1 (lifted sparse rank-one signals).

Each structure term is a separate proximable consensus block; the data fit
is a projection of the measurement copy onto an l1/l2 ball around y (or onto
{y} exactly in noiseless mode). The x-update is a least-squares solve whose
normal matrix is factored once per call.

Also here: the POCS alternating-projection baseline, top-eigenvector signal
extraction, and the shared projection primitives.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    DegenerateInputError,
    ParameterError,
    RankDeficiencyError,
    ShapeError,
)
from .sensing import MeasurementSet, SensingEnsemble, adjoint, apply, gram_matrix
from .structures import toeplitz_project


@dataclass
class SolverConfig:
    penalty: float = 1.0
    max_iter: int = 20000
    tol_primal: float = 1e-7
    tol_dual: float = 1e-7
    epsilon: float = 0.0  # noise-ball radius; 0 means equality constraint
    lam: float = 0.0  # l1 weight, sparse rank-one program only
    psd_constraint: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0 or self.lam < 0:
            raise ParameterError("epsilon and lambda must be nonnegative")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be at least 1")
        if self.tol_primal <= 0 or self.tol_dual <= 0:
            raise ParameterError("tolerances must be positive")


@dataclass
class RecoveryResult:
    estimate: np.ndarray = field(repr=False)
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    objective: float
    trajectory: Optional[np.ndarray] = None  # per-iteration NMSE (POCS only)


# --- projection primitives --------------------------------------------------


def project_psd(M: np.ndarray) -> np.ndarray:
    """Project a symmetric matrix onto the PSD cone (clip negative eigs)."""
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    if w[0] >= 0:
        return M
    pos = w > 0
    if not np.any(pos):
        return np.zeros_like(M)
    Vp = V[:, pos]
    return (Vp * w[pos]) @ Vp.T


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the l1 ball via the sorted-threshold method."""
    if radius < 0:
        raise ParameterError("radius must be nonnegative")
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    if radius == 0:
        return np.zeros_like(v)
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(u) + 1) > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def project_l2_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the l2 ball (radial scaling)."""
    if radius < 0:
        raise ParameterError("radius must be nonnegative")
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm <= radius:
        return v.copy()
    if radius == 0:
        return np.zeros_like(v)
    return v * (radius / norm)


def _soft(M: np.ndarray, t: float) -> np.ndarray:
    return np.sign(M) * np.maximum(np.abs(M) - t, 0.0)


# --- consensus blocks -------------------------------------------------------


class _TracePsdBlock:
    """prox of t * tr(M) + indicator(M PSD): shift eigenvalues, clip."""

    psd = True
    toeplitz = False

    def prox(self, V, t):
        return project_psd(V - t * np.eye(V.shape[0]))

    def objective(self, M):
        return float(np.trace(M))


class _NuclearBlock:
    """prox of t * ||M||_* for symmetric M: soft-threshold eigenvalues."""

    psd = False
    toeplitz = False

    def prox(self, V, t):
        V = 0.5 * (V + V.T)
        w, Q = np.linalg.eigh(V)
        ws = np.sign(w) * np.maximum(np.abs(w) - t, 0.0)
        return (Q * ws) @ Q.T

    def objective(self, M):
        return float(np.sum(np.abs(np.linalg.eigvalsh(M))))


class _PsdBlock:
    psd = True
    toeplitz = False

    def prox(self, V, t):
        return project_psd(V)

    def objective(self, M):
        return 0.0


class _L1Block:
    psd = False
    toeplitz = False

    def __init__(self, weight=1.0):
        self.weight = weight

    def prox(self, V, t):
        return _soft(V, self.weight * t)

    def objective(self, M):
        return float(self.weight * np.sum(np.abs(M)))


class _ToeplitzBlock:
    psd = False
    toeplitz = True

    def prox(self, V, t):
        return toeplitz_project(V)

    def objective(self, M):
        return 0.0


class _EqualityFit:
    def __init__(self, y):
        self.y = y

    def project(self, v):
        return self.y


class _L1BallFit:
    def __init__(self, y, eps):
        self.y = y
        self.eps = eps

    def project(self, v):
        return self.y - project_l1_ball(self.y - v, self.eps)


class _L2BallFit:
    def __init__(self, y, eps):
        self.y = y
        self.eps = eps

    def project(self, v):
        return self.y - project_l2_ball(self.y - v, self.eps)


# --- symmetric vectorization ------------------------------------------------


class _SymBasis:
    """Isometric vectorization of symmetric matrices (svec with sqrt(2))."""

    def __init__(self, n):
        self.n = n
        self.iu, self.ju = np.triu_indices(n)
        self.scale = np.where(self.iu == self.ju, 1.0, np.sqrt(2.0))

    def svec(self, M):
        return M[self.iu, self.ju] * self.scale

    def smat(self, v):
        M = np.zeros((self.n, self.n))
        vals = v / self.scale
        M[self.iu, self.ju] = vals
        M[self.ju, self.iu] = vals
        return M

    def operator_rows(self, vectors):
        """Rows g_i = svec(a_i a_i') so that g_i . svec(M) = a_i' M a_i."""
        return (vectors[:, self.iu] * vectors[:, self.ju]) * self.scale


# --- ADMM engine ------------------------------------------------------------


def _make_solver(G, k):
    """Return a solver for (k I + G' G) x = b, factored once.

    Uses the Woodbury identity when m < d so the factored system is the
    smaller of the two Gram matrices.
    """
    m, d = G.shape
    if m < d:
        C = cho_factor(k * np.eye(m) + G @ G.T)

        def solve(b):
            return (b - G.T @ cho_solve(C, G @ b)) / k

    else:
        C = cho_factor(k * np.eye(d) + G.T @ G)

        def solve(b):
            return cho_solve(C, b)

    return solve


def _admm(ens, meas, cfg, blocks, fit_kind):
    y_raw = np.asarray(meas.y, dtype=np.float64)
    if y_raw.shape != (ens.m,):
        raise ShapeError(f"y length {y_raw.shape} != m={ens.m}")
    n = ens.n
    basis = _SymBasis(n)
    G = basis.operator_rows(ens.vectors)

    # normalize the data so tolerances and proximal shifts are
    # scale-equivariant: recover from y/s, multiply the estimate back by s
    s = np.linalg.norm(y_raw)
    if s == 0.0:
        s = 1.0
    y = y_raw / s
    eps = cfg.epsilon / s

    if eps == 0.0:
        fit = _EqualityFit(y)
    elif fit_kind == "l1":
        fit = _L1BallFit(y, eps)
    else:
        fit = _L2BallFit(y, eps)

    J = len(blocks)
    solve = _make_solver(G, float(J))

    d = G.shape[1]
    x = np.zeros(d)
    zs = [np.zeros(d) for _ in blocks]
    us = [np.zeros(d) for _ in blocks]
    w = np.zeros(ens.m)
    uw = np.zeros(ens.m)
    rho = cfg.penalty
    primal = dual = np.inf
    it = 0
    converged = False

    for it in range(1, cfg.max_iter + 1):
        b = sum(z - u for z, u in zip(zs, us)) + G.T @ (w - uw)
        x = solve(b)
        Gx = G @ x

        dual_vec = np.zeros(d)
        primal_sq = 0.0
        for j, blk in enumerate(blocks):
            z_new = basis.svec(blk.prox(basis.smat(x + us[j]), 1.0 / rho))
            dual_vec += z_new - zs[j]
            zs[j] = z_new
            r = x - z_new
            us[j] += r
            primal_sq += float(r @ r)
        w_new = fit.project(Gx + uw)
        dw = w_new - w
        w = w_new
        rw = Gx - w
        uw += rw
        primal_sq += float(rw @ rw)

        primal = np.sqrt(primal_sq)
        dual = rho * np.linalg.norm(dual_vec + G.T @ dw)

        scale = max(1.0, np.linalg.norm(x))
        if primal <= cfg.tol_primal * scale and dual <= cfg.tol_dual * scale:
            converged = True
            break

        # residual balancing keeps primal and dual progress comparable
        if it % 10 == 0:
            if primal > 10.0 * dual:
                rho *= 2.0
                for u in us:
                    u /= 2.0
                uw /= 2.0
            elif dual > 10.0 * primal:
                rho /= 2.0
                for u in us:
                    u *= 2.0
                uw *= 2.0

    M = basis.smat(x)
    if any(blk.psd for blk in blocks):
        M = project_psd(M)
    if any(blk.toeplitz for blk in blocks):
        M = toeplitz_project(M)
    objective = s * sum(blk.objective(M) for blk in blocks)
    return RecoveryResult(
        estimate=s * M,
        iterations=it,
        primal_residual=float(primal),
        dual_residual=float(dual),
        converged=converged,
        objective=objective,
    )


# --- recovery programs ------------------------------------------------------


def recover_lowrank(
    meas: MeasurementSet, ens: SensingEnsemble, cfg: SolverConfig
) -> RecoveryResult:
    """Trace minimization over PSD matrices with an l1 data-fit ball.

    With psd_constraint off, minimizes the nuclear norm over symmetric
    matrices instead.
    """
    block = _TracePsdBlock() if cfg.psd_constraint else _NuclearBlock()
    return _admm(ens, meas, cfg, [block], "l1")


def recover_toeplitz(
    meas: MeasurementSet, ens: SensingEnsemble, cfg: SolverConfig
) -> RecoveryResult:
    """Trace minimization with Toeplitz constraint and an l2 data-fit ball."""
    head = _TracePsdBlock() if cfg.psd_constraint else _NuclearBlock()
    return _admm(ens, meas, cfg, [head, _ToeplitzBlock()], "l2")


def recover_sparse(
    meas: MeasurementSet, ens: SensingEnsemble, cfg: SolverConfig
) -> RecoveryResult:
    """Entrywise l1 minimization, optional PSD constraint, l1 data-fit ball."""
    blocks: List = [_L1Block(1.0)]
    if cfg.psd_constraint:
        blocks.append(_PsdBlock())
    return _admm(ens, meas, cfg, blocks, "l1")


def recover_sparse_rankone(
    meas: MeasurementSet, ens: SensingEnsemble, cfg: SolverConfig
) -> RecoveryResult:
    """Trace + lambda * l1 minimization over PSD matrices (lifted sparse PR)."""
    lam = cfg.lam if cfg.lam > 0 else 1.0 / np.sqrt(ens.n)
    return _admm(ens, meas, cfg, [_TracePsdBlock(), _L1Block(lam)], "l1")


def pocs(
    meas: MeasurementSet,
    ens: SensingEnsemble,
    init: Optional[np.ndarray] = None,
    iters: int = 2000,
    truth: Optional[np.ndarray] = None,
    tol: float = 1e-12,
) -> RecoveryResult:
    """Alternate projections onto the measurement-consistency affine set and
    the PSD cone: S <- P_psd(S - A*(AA*)^{-1}(A(S) - y)).

    Noiseless measurements assumed. Records the NMSE trajectory when the
    ground truth is supplied.
    """
    y = np.asarray(meas.y, dtype=np.float64)
    if y.shape != (ens.m,):
        raise ShapeError(f"y length {y.shape} != m={ens.m}")
    gram = gram_matrix(ens)
    try:
        C = cho_factor(gram)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError(
            "singular measurement Gram matrix; increase m or regularize"
        ) from exc

    S = np.zeros((ens.n, ens.n)) if init is None else np.array(init, dtype=np.float64)
    traj = [] if truth is not None else None
    truth_sq = np.linalg.norm(truth) ** 2 if truth is not None else 0.0
    resid = np.inf
    for _ in range(iters):
        r = apply(ens, S) - y
        S = S - adjoint(ens, cho_solve(C, r))
        S = project_psd(S)
        if traj is not None:
            traj.append(np.linalg.norm(S - truth) ** 2 / truth_sq)
    resid = float(np.linalg.norm(apply(ens, S) - y))
    yscale = max(1.0, np.linalg.norm(y))
    return RecoveryResult(
        estimate=S,
        iterations=iters,
        primal_residual=resid,
        dual_residual=0.0,
        converged=resid <= tol * yscale,
        objective=float(np.trace(S)),
        trajectory=np.array(traj) if traj is not None else None,
    )


def sin_angle(u: np.ndarray, v: np.ndarray) -> float:
    """sin of the angle between two nonzero vectors."""
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise DegenerateInputError("angle undefined for zero vector")
    cos = abs(float(u @ v)) / (nu * nv)
    return float(np.sqrt(max(0.0, 1.0 - min(1.0, cos) ** 2)))


def extract_signal(
    X: np.ndarray, truth: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, Optional[float]]:
    """Top-eigenpair signal estimate x_hat = sqrt(lambda_1) v_1.

    The sign is fixed so the largest-magnitude entry is positive. With the
    true signal supplied, returns sin of the angle between estimate and truth
    (which the Davis-Kahan theorem bounds by ||X - xx'||_F / ||x||_2^2).
    """
    X = 0.5 * (np.asarray(X, dtype=np.float64) + np.asarray(X).T)
    w, V = np.linalg.eigh(X)
    lam1 = w[-1]
    if lam1 <= 0:
        raise DegenerateInputError("no positive leading eigenvalue")
    v = V[:, -1]
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    xhat = np.sqrt(lam1) * v
    if truth is None:
        return xhat, None
    return xhat, sin_angle(xhat, np.asarray(truth, dtype=np.float64))
