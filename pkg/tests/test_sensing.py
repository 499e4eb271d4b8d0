import numpy as np
import pytest

from covsketch import sensing
from covsketch.errors import (
    ConfigError,
    EmptyInputError,
    ParameterError,
    ShapeError,
)
from covsketch.seeds import substream


class TestDistribution:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            sensing.Distribution("cauchy")

    @pytest.mark.parametrize(
        "kind,mu4",
        [("gaussian", 3.0), ("rademacher", 1.0), ("uniform_scaled", 1.8)],
    )
    def test_fourth_moments(self, kind, mu4):
        assert sensing.Distribution(kind).mu4 == mu4

    @pytest.mark.parametrize("kind", ["gaussian", "rademacher", "uniform_scaled"])
    def test_sample_moments(self, kind):
        # mean 0, variance 1, fourth moment mu4, each within 4 standard errors
        dist = sensing.Distribution(kind)
        N = 10**6
        z = dist.sample(substream(123), N)
        assert abs(z.mean()) < 4.0 * z.std() / np.sqrt(N)
        v = z**2
        assert abs(v.mean() - 1.0) < 4.0 * max(v.std(), 1e-12) / np.sqrt(N) + 1e-9
        q = z**4
        assert abs(q.mean() - dist.mu4) < 4.0 * max(q.std(), 1e-12) / np.sqrt(N) + 1e-9


class TestDrawEnsemble:
    def test_rademacher_support(self):
        ens = sensing.draw_ensemble(3, 2, "rademacher", seed=7)
        assert ens.vectors.shape == (2, 3)
        assert set(np.unique(ens.vectors)) <= {-1.0, 1.0}

    def test_gaussian_sample_mean(self):
        ens = sensing.draw_ensemble(100, 1000, "gaussian", seed=11)
        assert abs(ens.vectors.mean()) < 4.0 / np.sqrt(10**5)

    def test_determinism(self):
        a = sensing.draw_ensemble(8, 5, "uniform_scaled", seed=3)
        b = sensing.draw_ensemble(8, 5, "uniform_scaled", seed=3)
        assert np.array_equal(a.vectors, b.vectors)

    def test_bad_parameters(self):
        with pytest.raises(ParameterError):
            sensing.draw_ensemble(0, 5, "gaussian", seed=1)
        with pytest.raises(ParameterError):
            sensing.draw_ensemble(5, 0, "gaussian", seed=1)


class TestApplyAdjoint:
    def test_zero_matrix(self):
        ens = sensing.draw_ensemble(4, 6, "gaussian", seed=1)
        assert np.array_equal(sensing.apply(ens, np.zeros((4, 4))), np.zeros(6))

    def test_unit_quadratic_form(self):
        ens = sensing.draw_ensemble(3, 1, "gaussian", seed=1)
        object.__setattr__(ens, "vectors", np.array([[1.0, 0.0, 0.0]]))
        assert sensing.apply(ens, np.eye(3))[0] == 1.0

    def test_hand_computed_value(self):
        ens = sensing.draw_ensemble(2, 1, "gaussian", seed=1)
        object.__setattr__(ens, "vectors", np.array([[1.0, 2.0]]))
        M = np.array([[1.0, 2.0], [2.0, 5.0]])
        assert sensing.apply(ens, M)[0] == pytest.approx(29.0)

    def test_shape_error(self):
        ens = sensing.draw_ensemble(4, 6, "gaussian", seed=1)
        with pytest.raises(ShapeError):
            sensing.apply(ens, np.zeros((3, 3)))
        with pytest.raises(ShapeError):
            sensing.adjoint(ens, np.zeros(5))

    def test_linearity(self):
        ens = sensing.draw_ensemble(6, 9, "rademacher", seed=2)
        rng = substream(5)
        M1 = rng.standard_normal((6, 6))
        M1 = M1 + M1.T
        M2 = rng.standard_normal((6, 6))
        M2 = M2 + M2.T
        lhs = sensing.apply(ens, M1 + 2.5 * M2)
        rhs = sensing.apply(ens, M1) + 2.5 * sensing.apply(ens, M2)
        assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * np.max(np.abs(lhs)))

    def test_adjoint_trivials(self):
        ens = sensing.draw_ensemble(2, 1, "gaussian", seed=1)
        assert np.array_equal(sensing.adjoint(ens, np.zeros(1)), np.zeros((2, 2)))
        object.__setattr__(ens, "vectors", np.array([[1.0, 1.0]]))
        assert np.array_equal(sensing.adjoint(ens, np.ones(1)), np.ones((2, 2)))

    def test_adjoint_identity(self):
        ens = sensing.draw_ensemble(7, 12, "gaussian", seed=3)
        rng = substream(9)
        for _ in range(10):
            M = rng.standard_normal((7, 7))
            M = M + M.T
            v = rng.standard_normal(12)
            lhs = float(sensing.apply(ens, M) @ v)
            rhs = float(np.sum(M * sensing.adjoint(ens, v)))
            assert abs(lhs - rhs) < 1e-10 * np.linalg.norm(M) * np.linalg.norm(v)


class TestDebiased:
    def test_zero(self):
        ens = sensing.draw_ensemble(4, 6, "gaussian", seed=1)
        assert np.array_equal(sensing.debiased_apply(ens, np.zeros((4, 4))), np.zeros(3))

    def test_identical_pairs_cancel(self):
        ens = sensing.draw_ensemble(4, 6, "gaussian", seed=1)
        v = ens.vectors.copy()
        v[1::2] = v[0::2]
        object.__setattr__(ens, "vectors", v)
        out = sensing.debiased_apply(ens, np.eye(4) + 0.5)
        assert np.allclose(out, 0.0, atol=1e-14)

    def test_odd_m_warns_and_truncates(self):
        ens = sensing.draw_ensemble(4, 5, "gaussian", seed=2)
        with pytest.warns(UserWarning, match="odd"):
            out = sensing.debiased_apply(ens, np.eye(4))
        assert out.shape == (2,)

    def test_m_too_small(self):
        ens = sensing.draw_ensemble(4, 1, "gaussian", seed=2)
        with pytest.raises(ParameterError):
            sensing.debiased_apply(ens, np.eye(4))

    def test_zero_mean(self):
        # mean over fresh ensembles converges to 0; assert within 5 SE
        n, trials = 8, 2000
        vals = np.empty(trials)
        for t in range(trials):
            ens = sensing.draw_ensemble(n, 2, "gaussian", seed=10_000 + t)
            vals[t] = sensing.debiased_apply(ens, np.eye(n))[0]
        assert abs(vals.mean()) < 5.0 * vals.std() / np.sqrt(trials)


class TestExpectedGram:
    def test_gaussian_identity(self):
        out = sensing.expected_gram(np.eye(2), mu4=3.0, n=2)
        assert np.allclose(out, 4.0 * np.eye(2))

    def test_zero(self):
        assert np.array_equal(sensing.expected_gram(np.zeros((3, 3)), 1.8, 3), np.zeros((3, 3)))

    def test_monte_carlo_raw(self):
        # sample mean of A <A, X> matches the closed form within 4 SE
        rng = substream(21)
        n, N = 4, 200_000
        X = rng.standard_normal((n, n))
        X = 0.5 * (X + X.T)
        a = rng.standard_normal((N, n))
        q = np.einsum("ij,jk,ik->i", a, X, a, optimize=True)
        mean = (a * q[:, None]).T @ a / N
        second = ((a * q[:, None]) ** 2).T @ (a**2) / N
        se = np.sqrt(np.maximum(second - mean**2, 0) / N)
        target = sensing.expected_gram(X, 3.0, n)
        assert np.all(np.abs(mean - target) < 4.0 * se)


class TestIsotropy:
    def test_alpha_printed_value(self):
        alpha, beta, gamma = sensing.isotropic_combo_coeffs(1.0, n=100, xi=2.0)
        assert alpha == pytest.approx(0.5)

    def test_normalization_identity(self):
        for mu4, n, xi in [(1.0, 10, 2.0), (1.8, 25, 2.5), (1.0, 7, None)]:
            alpha, beta, gamma = sensing.isotropic_combo_coeffs(mu4, n, xi)
            b, c = beta / alpha, gamma / alpha
            xi_eff = xi if xi is not None else sensing.default_xi(mu4)
            assert 1.0 + b * b + c * c == pytest.approx(xi_eff**2 / (3.0 - mu4), abs=1e-10)
            # mean constraint: alpha+beta+gamma = sqrt((3-mu4)/(2n))
            assert alpha + beta + gamma == pytest.approx(
                np.sqrt((3.0 - mu4) / (2.0 * n)), abs=1e-12
            )

    def test_xi_out_of_range(self):
        with pytest.raises(ParameterError):
            sensing.isotropic_combo_coeffs(1.0, n=10, xi=1.0)

    def test_mu4_equal_3_rejected(self):
        with pytest.raises(ParameterError):
            sensing.isotropic_combo_coeffs(3.0, n=10)

    def test_isotropic_apply_zero(self):
        ens = sensing.draw_ensemble(4, 6, "rademacher", seed=5)
        assert np.array_equal(sensing.isotropic_apply(ens, np.zeros((4, 4))), np.zeros(2))

    def test_gaussian_path_matches_half_debiased(self):
        ens = sensing.draw_ensemble(5, 8, "gaussian", seed=6)
        M = np.eye(5) + 0.3
        assert np.allclose(
            sensing.isotropic_apply(ens, M), 0.5 * sensing.debiased_apply(ens, M)
        )

    def test_second_moment(self):
        # <X, mean B<B,X>> approaches ||X||_F^2
        from covsketch.structures import gen_toeplitz_lowrank

        X = gen_toeplitz_lowrank(8, 4, seed=1).matrix
        X = X / np.linalg.norm(X)
        N = 50_000
        ens = sensing.draw_ensemble(8, 3 * N, "rademacher", seed=77)
        q = sensing.isotropic_apply(ens, X)
        assert np.mean(q**2) == pytest.approx(1.0, rel=0.05)


class TestGramMatrix:
    def test_orthonormal_rows(self):
        ens = sensing.draw_ensemble(3, 3, "gaussian", seed=1)
        object.__setattr__(ens, "vectors", np.eye(3))
        assert np.array_equal(sensing.gram_matrix(ens), np.eye(3))

    def test_identical_rows(self):
        n = 4
        ens = sensing.draw_ensemble(n, 2, "gaussian", seed=1)
        object.__setattr__(ens, "vectors", np.ones((2, n)))
        assert np.array_equal(sensing.gram_matrix(ens), np.full((2, 2), n**2))

    def test_psd(self):
        ens = sensing.draw_ensemble(10, 25, "gaussian", seed=8)
        G = sensing.gram_matrix(ens)
        w = np.linalg.eigvalsh(G)
        assert w[0] >= -1e-8 * np.trace(G)


class TestSketchStream:
    def test_constant_stream(self):
        ens = sensing.draw_ensemble(3, 4, "gaussian", seed=2)
        stream = np.tile(np.array([1.0, 0.0, 0.0]), (200, 1))
        meas, sched = sensing.sketch_stream(stream, ens, schedule_seed=3)
        hit = sched.counts > 0
        assert np.allclose(meas.y[hit], ens.vectors[hit, 0] ** 2)

    def test_determinism(self):
        ens = sensing.draw_ensemble(3, 4, "gaussian", seed=2)
        stream = substream(4).standard_normal((500, 3))
        y1, _ = sensing.sketch_stream(stream, ens, schedule_seed=3)
        y2, _ = sensing.sketch_stream(stream, ens, schedule_seed=3)
        assert np.array_equal(y1.y, y2.y)

    def test_empty_stream(self):
        ens = sensing.draw_ensemble(3, 4, "gaussian", seed=2)
        with pytest.raises(EmptyInputError):
            sensing.sketch_stream(np.zeros((0, 3)), ens, schedule_seed=1)

    def test_convergence_rate(self):
        # error vs A(Sigma) shrinks roughly like 1/sqrt(length)
        n = 2
        Sigma = np.diag([2.0, 1.0])
        L = np.diag(np.sqrt([2.0, 1.0]))
        ens = sensing.draw_ensemble(n, 5, "gaussian", seed=6)
        target = sensing.apply(ens, Sigma)
        errs = {}
        for length in (10**4, 10**5):
            x = substream(8).standard_normal((length, n)) @ L.T
            meas, _ = sensing.sketch_stream(x, ens, schedule_seed=9)
            errs[length] = np.max(np.abs(meas.y - target))
        ratio = errs[10**4] / errs[10**5]
        assert 1.0 < ratio < 10.0 * np.sqrt(10.0)


class TestSerialization:
    def test_ensemble_round_trip(self, tmp_path):
        ens = sensing.draw_ensemble(6, 11, "uniform_scaled", seed=42)
        path = tmp_path / "ens.bin"
        sensing.save_ensemble(ens, path)
        back = sensing.load_ensemble(path)
        assert back.n == 6 and back.m == 11 and back.seed == 42
        assert back.dist.kind == "uniform_scaled"
        assert np.array_equal(back.vectors, ens.vectors)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE!" + b"\0" * 64)
        with pytest.raises(ConfigError):
            sensing.load_ensemble(path)

    def test_matrix_csv_round_trip(self, tmp_path):
        M = substream(1).standard_normal((4, 4))
        path = tmp_path / "m.csv"
        sensing.save_matrix_csv(M, path)
        assert np.array_equal(sensing.load_matrix_csv(path), M)

    def test_measurement_set_validation(self):
        with pytest.raises(ConfigError):
            sensing.MeasurementSet(y=np.zeros(3), noise_kind="none", noise_level=0.5)
        with pytest.raises(ConfigError):
            sensing.MeasurementSet(y=np.zeros(3), noise_kind="gaussian")
