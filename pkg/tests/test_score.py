import numpy as np
import pytest

from wacm.errors import FormatError, NumericalError, ValidationError
from wacm.sampler import make_schedule
from wacm.score import (
    DsmConfig,
    GaussianScore,
    MlpScore,
    ParzenScore,
    dsm_loss,
    load_model,
    save_model,
    train_mlp,
)


def fd_log_density_gradient(model, x, sigma, h=1e-5):
    """Central-difference gradient of the smoothed log density."""
    grad = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (model.log_density(xp, sigma) - model.log_density(xm, sigma)) / (2 * h)
    return grad


class TestParzenScore:
    def test_single_point_closed_form(self):
        model = ParzenScore(np.zeros((1, 4)))
        x = np.array([1.0, 0.0, 0.0, 0.0])
        assert np.allclose(model.score(x, 1.0), [-1.0, 0.0, 0.0, 0.0])

    def test_symmetric_points_cancel(self):
        v = np.array([0.7, -0.2, 0.4])
        model = ParzenScore(np.stack([v, -v]))
        assert np.allclose(model.score(np.zeros(3), 0.5), 0.0, atol=1e-14)

    @pytest.mark.parametrize("sigma", [1.0, 0.1, 0.01])
    def test_matches_finite_difference_gradient(self, sigma):
        rng = np.random.default_rng(0)
        model = ParzenScore(rng.random((6, 5)))
        for _ in range(10):
            x = rng.random(5)
            got = model.score(x, sigma)
            want = fd_log_density_gradient(model, x, sigma)
            assert np.max(np.abs(got - want)) <= 1e-6

    def test_rejects_nonpositive_sigma(self):
        model = ParzenScore(np.zeros((2, 3)))
        with pytest.raises(ValidationError):
            model.score(np.zeros(3), 0.0)

    def test_rejects_dim_mismatch(self):
        model = ParzenScore(np.zeros((2, 3)))
        with pytest.raises(ValidationError):
            model.score(np.zeros(4), 1.0)

    def test_large_sigma_limit(self):
        rng = np.random.default_rng(1)
        data = rng.random((5, 4))
        diameter = np.max(
            [np.linalg.norm(a - b) for a in data for b in data]
        )
        model = ParzenScore(data)
        sigma = 1e3 * diameter
        x = rng.random(4)
        approx = sigma ** 2 * model.score(x, sigma)
        assert np.linalg.norm(approx - (data.mean(axis=0) - x)) <= 1e-3


class _PerfectDenoiser:
    """Score that exactly cancels the injected noise for a known clean point."""

    def __init__(self, clean):
        self.clean = np.asarray(clean, dtype=np.float64)

    def score_batch(self, x, sigmas):
        sig = np.broadcast_to(np.asarray(sigmas, dtype=np.float64), (x.shape[0],))
        return -(x - self.clean[None, :]) / (sig * sig)[:, None]


class TestDsmLoss:
    def test_perfect_model_gives_zero_loss(self):
        clean = np.array([0.4, -0.1, 0.9])
        model = _PerfectDenoiser(clean)
        rng = np.random.default_rng(2)
        loss = dsm_loss(model, clean[None, :], [0.5], rng)
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_zero_model_expected_loss_is_half_dim(self):
        class Zero:
            def score_batch(self, x, sigmas):
                return np.zeros_like(x)

        dim = 6
        rng = np.random.default_rng(3)
        batch = np.zeros((20000, dim))
        loss = dsm_loss(Zero(), batch, [1.0, 0.3], rng)
        assert loss == pytest.approx(dim / 2, rel=0.02)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValidationError):
            dsm_loss(_PerfectDenoiser(np.zeros(2)), np.empty((0, 2)),
                     [1.0], np.random.default_rng(0))

    def test_parzen_oracle_beats_any_mlp(self):
        rng = np.random.default_rng(4)
        data = rng.random((6, 3))
        parzen = ParzenScore(data)
        mlp = MlpScore(3, hidden=(8,), rng=rng)
        schedule = [0.5]
        batch = data[rng.integers(6, size=4000)]
        loss_parzen = dsm_loss(parzen, batch, schedule, np.random.default_rng(5))
        loss_mlp = dsm_loss(mlp, batch, schedule, np.random.default_rng(5))
        assert loss_parzen <= loss_mlp

    def test_scale_balance_for_optimal_score(self):
        # lambda = sigma^2 keeps the expected loss of the optimal score on a
        # common scale: bounded by D/2 (the zero-model loss) at every level
        rng = np.random.default_rng(6)
        data = rng.random((4, 2))
        parzen = ParzenScore(data)
        batch = data[rng.integers(4, size=20000)]
        for sigma in (1.0, 0.3, 0.1, 0.01):
            loss = dsm_loss(parzen, batch, [sigma], np.random.default_rng(7))
            assert 0.0 <= loss <= (data.shape[1] / 2) * 1.05


class TestMlpScore:
    def test_output_dim_and_finite(self):
        mlp = MlpScore(5, hidden=(7,), rng=1)
        out = mlp.score(np.random.default_rng(0).random(5), 0.3)
        assert out.shape == (5,)
        assert np.all(np.isfinite(out))

    def test_gradient_check_against_finite_differences(self):
        rng = np.random.default_rng(8)
        mlp = MlpScore(3, hidden=(5, 4), rng=rng)
        batch = rng.random((4, 3))
        sigmas = np.array([1.0, 0.5, 1.0, 0.5])
        z = rng.standard_normal(batch.shape)
        noisy = batch + sigmas[:, None] * z

        def loss_at(params):
            probe = mlp.copy()
            probe.set_params(params)
            residual = probe.score_batch(noisy, sigmas) + z / sigmas[:, None]
            w = sigmas ** 2
            return float(np.mean(w * 0.5 * np.sum(residual ** 2, axis=1)))

        out, acts = mlp._forward(noisy, sigmas)
        residual = (out + z) / sigmas[:, None]
        dout = ((sigmas ** 2)[:, None] * residual / sigmas[:, None]) / batch.shape[0]
        grads_W, grads_b = mlp._backward(acts, dout)
        analytic = np.concatenate(
            [g.ravel() for g in (*grads_W, *grads_b)]
        )
        params = mlp.get_params()
        h = 1e-5
        numeric = np.empty_like(params)
        for i in range(params.size):
            up, down = params.copy(), params.copy()
            up[i] += h
            down[i] -= h
            numeric[i] = (loss_at(up) - loss_at(down)) / (2 * h)
        denom = max(np.linalg.norm(numeric), 1e-12)
        assert np.linalg.norm(analytic - numeric) / denom <= 1e-5

    def test_zero_iterations_is_identity(self):
        rng = np.random.default_rng(9)
        mlp = MlpScore(2, hidden=(4,), rng=rng)
        before = mlp.get_params()
        cfg = DsmConfig(schedule=[1.0], iterations=0)
        train_mlp(mlp, np.zeros((3, 2)), cfg, rng)
        assert np.array_equal(mlp.get_params(), before)

    def test_training_on_single_point(self):
        rng = np.random.default_rng(10)
        point = np.array([[0.3, -0.2]])
        mlp = MlpScore(2, hidden=(32, 32), rng=rng)
        cfg = DsmConfig(schedule=[1.0], batch_size=64, iterations=3000)
        train_mlp(mlp, point, cfg, rng)
        assert np.linalg.norm(mlp.score(point[0], 1.0)) <= 0.05
        parzen = ParzenScore(point)
        probes = point[0] + np.array(
            [[dx, dy] for dx in (-1, -0.5, 0.5, 1) for dy in (-1, -0.5, 0.5, 1)]
        )
        ref = parzen.score_batch(probes, 1.0)
        est = mlp.score_batch(probes, np.ones(len(probes)))
        rmse = np.sqrt(np.mean((ref - est) ** 2))
        assert rmse <= 0.1

    def test_divergence_detection(self):
        rng = np.random.default_rng(11)
        mlp = MlpScore(2, hidden=(4,), rng=rng)
        mlp.weights[0][:] = np.nan
        cfg = DsmConfig(schedule=[1.0], iterations=1)
        with pytest.raises(NumericalError):
            train_mlp(mlp, np.zeros((2, 2)), cfg, rng)


class TestSerialization:
    def test_mlp_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(12)
        mlp = MlpScore(4, hidden=(6, 5), rng=rng, resolution=(2, 2, 12))
        train_mlp(mlp, rng.random((5, 4)),
                  DsmConfig(schedule=make_schedule(1, 0.1, 3), iterations=50), rng)
        path = tmp_path / "m.wacmmdl"
        save_model(mlp, path)
        back = load_model(path)
        assert back.resolution == (2, 2, 12)
        for _ in range(100):
            x = rng.random(4)
            sigma = rng.uniform(0.05, 2.0)
            assert np.array_equal(back.score(x, sigma), mlp.score(x, sigma))

    def test_parzen_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        model = ParzenScore(rng.random((7, 6)), resolution=(1, 1, 12))
        path = tmp_path / "p.wacmmdl"
        save_model(model, path)
        back = load_model(path)
        assert np.array_equal(back.dataset, model.dataset)
        assert back.resolution == (1, 1, 12)
        x = rng.random(6)
        assert np.array_equal(back.score(x, 0.3), model.score(x, 0.3))

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.wacmmdl"
        path.write_bytes(b"NOTMODL" + bytes(32))
        with pytest.raises(FormatError):
            load_model(path)

    def test_truncated_payload_rejected(self, tmp_path):
        rng = np.random.default_rng(14)
        model = ParzenScore(rng.random((3, 4)))
        path = tmp_path / "t.wacmmdl"
        save_model(model, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            load_model(path)


class TestGaussianScore:
    def test_matches_smoothed_gaussian(self):
        model = GaussianScore(np.array([1.0, -1.0]), 0.25)
        x = np.array([2.0, 0.0])
        # smoothing with sigma adds variance
        expected = (model.mean - x) / (0.25 + 0.09)
        assert np.allclose(model.score(x, 0.3), expected)
