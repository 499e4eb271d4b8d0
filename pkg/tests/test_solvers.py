import numpy as np
import pytest

from covsketch import sensing, solvers, structures
from covsketch.errors import DegenerateInputError
from covsketch.seeds import substream
from covsketch.sensing import MeasurementSet, apply, draw_ensemble, measure
from covsketch.solvers import (
    SolverConfig,
    extract_signal,
    pocs,
    project_l1_ball,
    project_l2_ball,
    project_psd,
    recover_lowrank,
    recover_sparse,
    recover_sparse_rankone,
    recover_toeplitz,
    sin_angle,
)


class TestProjections:
    def test_psd_trivials(self):
        assert np.allclose(project_psd(np.eye(3)), np.eye(3))
        M = np.diag([2.0, -1.0])
        assert np.allclose(project_psd(M), np.diag([2.0, 0.0]))

    def test_psd_idempotent_and_nonexpansive(self):
        rng = substream(11)
        for _ in range(20):
            A = rng.standard_normal((8, 8))
            A = A + A.T
            B = rng.standard_normal((8, 8))
            B = B + B.T
            PA, PB = project_psd(A), project_psd(B)
            assert np.linalg.norm(project_psd(PA) - PA) < 1e-9
            assert np.linalg.norm(PA - PB) <= np.linalg.norm(A - B) + 1e-9

    def test_l1_ball_trivials(self):
        v = np.array([0.2, -0.1])
        assert np.array_equal(project_l1_ball(v, 1.0), v)
        out = project_l1_ball(np.array([2.0, 0.0]), 1.0)
        assert np.allclose(out, [1.0, 0.0])

    def test_l1_ball_idempotent_and_nonexpansive(self):
        rng = substream(12)
        for _ in range(20):
            a = rng.standard_normal(10)
            b = rng.standard_normal(10)
            pa, pb = project_l1_ball(a, 1.5), project_l1_ball(b, 1.5)
            assert np.sum(np.abs(pa)) <= 1.5 + 1e-9
            assert np.linalg.norm(project_l1_ball(pa, 1.5) - pa) < 1e-9
            assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-9

    def test_l1_ball_against_convex_solver(self):
        cp = pytest.importorskip("cvxpy")
        rng = substream(13)
        for _ in range(100):
            v = 3.0 * rng.standard_normal(5)
            r = float(rng.uniform(0.5, 4.0))
            x = cp.Variable(5)
            prob = cp.Problem(cp.Minimize(cp.sum_squares(x - v)),
                              [cp.norm1(x) <= r])
            prob.solve(solver=cp.CLARABEL)
            assert np.linalg.norm(project_l1_ball(v, r) - x.value) < 1e-5

    def test_l2_ball(self):
        v = np.array([3.0, 4.0])
        assert np.allclose(project_l2_ball(v, 5.0), v)
        assert np.allclose(project_l2_ball(v, 1.0), v / 5.0)


def svec_lstsq(ens, y):
    """Independent least-squares oracle in symmetric coordinates."""
    n = ens.n
    iu = np.triu_indices(n)
    rows = []
    for a in ens.vectors:
        outer = np.outer(a, a)
        row = outer[iu].copy()
        off = iu[0] != iu[1]
        row[off] *= 2.0
        rows.append(row)
    sol, *_ = np.linalg.lstsq(np.array(rows), y, rcond=None)
    M = np.zeros((n, n))
    M[iu] = sol
    M = M + M.T - np.diag(np.diag(M))
    return M


class TestExactRecovery:
    def test_lowrank_small(self):
        truth = structures.gen_lowrank_psd(4, 1, seed=5).matrix
        ens = draw_ensemble(4, 20, "gaussian", seed=7)
        res = recover_lowrank(measure(ens, truth), ens, SolverConfig())
        assert structures.nmse(res.estimate, truth) < 1e-12

    def test_toeplitz_overdetermined(self):
        truth = structures.gen_toeplitz_lowrank(10, 2, seed=3).matrix
        ens = draw_ensemble(10, 120, "gaussian", seed=9)
        res = recover_toeplitz(measure(ens, truth), ens, SolverConfig())
        assert structures.nmse(res.estimate, truth) < 1e-12
        for off in range(10):
            d = np.diagonal(res.estimate, off)
            assert np.max(np.abs(d - d[0])) < 1e-9 * max(1.0, abs(d[0]))

    def test_sparse_overdetermined(self):
        truth = structures.gen_sparse_psd(8, 9, seed=2).matrix
        ens = draw_ensemble(8, 72, "gaussian", seed=11)
        res = recover_sparse(measure(ens, truth), ens, SolverConfig())
        assert structures.nmse(res.estimate, truth) < 1e-12

    def test_sparse_rankone_canonical(self):
        truth = np.zeros((6, 6))
        truth[0, 0] = 1.0
        ens = draw_ensemble(6, 40, "gaussian", seed=13)
        res = recover_sparse_rankone(
            measure(ens, truth), ens, SolverConfig(lam=1.0))
        assert structures.nmse(res.estimate, truth) < 1e-8

    def test_matches_linear_solve_oracle(self):
        # with m >= n(n+1)/2 the feasible set is a point, so every program
        # must agree with plain least squares in symmetric coordinates
        cases = [
            (structures.gen_lowrank_psd(5, 2, seed=1).matrix, recover_lowrank,
             SolverConfig()),
            (structures.gen_toeplitz_lowrank(6, 2, seed=1).matrix,
             recover_toeplitz, SolverConfig()),
            (structures.gen_sparse_psd(5, 4, seed=1).matrix, recover_sparse,
             SolverConfig()),
            (structures.gen_sparse_rankone(5, 2, seed=1).matrix,
             recover_sparse_rankone, SolverConfig(lam=0.5)),
        ]
        for truth, solver, cfg in cases:
            n = truth.shape[0]
            ens = draw_ensemble(n, n * (n + 1) // 2 + 5, "gaussian", seed=21)
            meas = measure(ens, truth)
            oracle = svec_lstsq(ens, meas.y)
            res = solver(meas, ens, cfg)
            assert np.linalg.norm(res.estimate - oracle) < 1e-6 * max(
                1.0, np.linalg.norm(oracle))

    def test_scaling_equivariance(self):
        truth = structures.gen_lowrank_psd(8, 2, seed=4).matrix
        ens = draw_ensemble(8, 60, "gaussian", seed=17)
        base = recover_lowrank(measure(ens, truth), ens, SolverConfig())
        for c in (0.5, 10.0):
            res = recover_lowrank(
                MeasurementSet(y=c * apply(ens, truth)), ens, SolverConfig())
            rel = np.linalg.norm(res.estimate - c * base.estimate)
            rel /= np.linalg.norm(c * base.estimate)
            assert rel < 1e-6

    def test_zero_measurements_zero_estimate(self):
        ens = draw_ensemble(5, 12, "gaussian", seed=1)
        res = recover_lowrank(
            MeasurementSet(y=np.zeros(12)), ens, SolverConfig())
        assert np.linalg.norm(res.estimate) < 1e-10

    def test_converged_flags_and_feasibility(self):
        truth = structures.gen_lowrank_psd(6, 2, seed=8).matrix
        ens = draw_ensemble(6, 40, "gaussian", seed=19)
        meas = measure(ens, truth)
        cfg = SolverConfig()
        res = recover_lowrank(meas, ens, cfg)
        assert res.converged
        assert res.primal_residual <= cfg.tol_primal * 10
        fit = np.sum(np.abs(apply(ens, res.estimate) - meas.y))
        assert fit < 1e-4 * np.linalg.norm(meas.y)


class TestPocs:
    def test_truth_is_fixed_point(self):
        truth = structures.gen_lowrank_psd(10, 3, seed=6).matrix
        ens = draw_ensemble(10, 50, "gaussian", seed=23)
        meas = measure(ens, truth)
        res = pocs(meas, ens, init=truth, iters=3, truth=truth)
        assert res.trajectory[-1] < 1e-20

    def test_converges_overdetermined(self):
        truth = structures.gen_lowrank_psd(10, 2, seed=7).matrix
        ens = draw_ensemble(10, 45, "gaussian", seed=29)
        res = pocs(measure(ens, truth), ens, iters=500, truth=truth)
        assert res.trajectory[-1] < 1e-10
        assert np.all(np.diff(res.trajectory[:50]) <= 1e-12)


class TestSignalExtraction:
    def test_sin_angle_trivials(self):
        e1 = np.array([1.0, 0.0])
        e2 = np.array([0.0, 1.0])
        assert sin_angle(e1, e1) == pytest.approx(0.0)
        assert sin_angle(e1, -3.0 * e1) == pytest.approx(0.0)
        assert sin_angle(e1, e2) == pytest.approx(1.0)

    def test_extract_diag(self):
        xhat, ang = extract_signal(np.diag([4.0, 1.0]),
                                   truth=np.array([1.0, 0.0]))
        assert np.allclose(xhat, [2.0, 0.0])
        assert ang == pytest.approx(0.0, abs=1e-12)

    def test_davis_kahan_on_perturbation(self):
        rng = substream(31)
        x = rng.standard_normal(12)
        X = np.outer(x, x)
        for _ in range(20):
            E = 0.05 * np.linalg.norm(x) ** 2 * rng.standard_normal((12, 12))
            E = 0.5 * (E + E.T) / np.linalg.norm(E)
            _, ang = extract_signal(X + E, truth=x)
            bound = np.linalg.norm(E) / np.linalg.norm(x) ** 2
            assert ang <= bound + 1e-9

    def test_negative_definite_rejected(self):
        with pytest.raises(DegenerateInputError):
            extract_signal(-np.eye(3))

    def test_zero_vector_angle_rejected(self):
        with pytest.raises(DegenerateInputError):
            sin_angle(np.zeros(3), np.ones(3))
