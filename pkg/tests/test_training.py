import numpy as np
import pytest

from mipgan.checkpoint import load_checkpoint, save_checkpoint
from mipgan.network import Discriminator, Generator, ModelConfig, init_params, pixel_scale
from mipgan.training import (
    AdamState,
    TrainConfig,
    TrainHistory,
    TrainingDiverged,
    adam_update,
    bce_grad,
    bce_loss,
    train,
    train_step,
)

TINY = ModelConfig(
    latent_dim=8, embed_dim=6, seed_map=(4, 4), upsample_stages=2,
    gen_channels=(12, 8), disc_layers=3, disc_channels=(6, 8, 8),
)


def tiny_data(n=10, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n,) + TINY.canvas, dtype=np.float32)
    y = np.arange(n) % 5
    return X, y


class TestBce:
    def test_analytic_values(self):
        assert bce_loss(np.array([0.5]), 1.0) == pytest.approx(np.log(2.0), rel=1e-12)
        assert bce_loss(np.array([0.5]), 0.0) == pytest.approx(np.log(2.0), rel=1e-12)
        # saturated prediction bottoms out near the clamp epsilon
        assert bce_loss(np.array([1.0 - 1e-7]), 1.0) == pytest.approx(1e-7, rel=1e-2)

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(0)
        p = rng.uniform(0.01, 0.99, size=64)
        for target in (0.0, 1.0):
            expected = 0.0
            for v in p:
                expected += -(target * np.log(v) + (1 - target) * np.log(1 - v))
            expected /= p.size
            assert abs(bce_loss(p, target) - expected) < 1e-10

    def test_grad_matches_finite_difference(self):
        rng = np.random.default_rng(1)
        p = rng.uniform(0.05, 0.95, size=16)
        for target in (0.0, 1.0):
            g = bce_grad(p, target)
            h = 1e-7
            for i in range(p.size):
                plus, minus = p.copy(), p.copy()
                plus[i] += h
                minus[i] -= h
                num = (bce_loss(plus, target) - bce_loss(minus, target)) / (2 * h)
                assert abs(num - g[i]) < 1e-6

    def test_clamp_keeps_loss_finite(self):
        assert np.isfinite(bce_loss(np.array([0.0, 1.0]), 1.0))
        assert np.isfinite(bce_loss(np.array([0.0, 1.0]), 0.0))


class TestAdam:
    def test_matches_scalar_reference(self):
        # textbook bias-corrected recurrence, scalar loop, float64
        rng = np.random.default_rng(2)
        n = 7
        params = {"w": rng.standard_normal(n)}
        opt = AdamState.for_params(params)
        ref_p = params["w"].copy()
        ref_m = np.zeros(n)
        ref_v = np.zeros(n)
        lr, b1, b2, eps = 0.0002, 0.5, 0.999, 1e-8
        for step in range(1, 101):
            g = rng.standard_normal(n)
            adam_update(params, {"w": g}, opt, lr, b1, b2, eps)
            for i in range(n):
                ref_m[i] = b1 * ref_m[i] + (1 - b1) * g[i]
                ref_v[i] = b2 * ref_v[i] + (1 - b2) * g[i] ** 2
                m_hat = ref_m[i] / (1 - b1**step)
                v_hat = ref_v[i] / (1 - b2**step)
                ref_p[i] -= lr * m_hat / (np.sqrt(v_hat) + eps)
            assert np.abs(params["w"] - ref_p).max() < 1e-10, f"step {step}"

    def test_only_given_grads_updated(self):
        params = {"a": np.ones(3), "b": np.ones(3)}
        opt = AdamState.for_params(params)
        adam_update(params, {"a": np.ones(3)}, opt, 0.1, 0.5, 0.999)
        assert not np.array_equal(params["a"], np.ones(3))
        assert np.array_equal(params["b"], np.ones(3))


class TestTrainStep:
    def make_step_args(self, seed=0):
        gen, disc = Generator(TINY), Discriminator(TINY)
        params = init_params(TINY, seed=seed)
        gen_opt = AdamState.for_params(params.gen)
        disc_opt = AdamState.for_params(params.disc)
        X, y = tiny_data(6, seed)
        batch = pixel_scale(X).astype(np.float32)
        return gen, disc, params, gen_opt, disc_opt, batch, y

    def test_parameters_move(self):
        gen, disc, params, gen_opt, disc_opt, batch, y = self.make_step_args()
        before_gen = {k: v.copy() for k, v in params.gen.items()}
        before_disc = {k: v.copy() for k, v in params.disc.items()}
        cfg = TrainConfig(epochs=1, batch_size=2)
        train_step(gen, disc, params, gen_opt, disc_opt, batch, y, cfg,
                   np.random.default_rng(0))
        assert any(
            not np.array_equal(before_gen[k], params.gen[k]) for k in before_gen
        )
        assert any(
            not np.array_equal(before_disc[k], params.disc[k]) for k in before_disc
        )

    def test_deterministic(self):
        results = []
        for _ in range(2):
            gen, disc, params, gen_opt, disc_opt, batch, y = self.make_step_args()
            cfg = TrainConfig(epochs=1, batch_size=2)
            metrics = train_step(gen, disc, params, gen_opt, disc_opt, batch, y,
                                 cfg, np.random.default_rng(42))
            results.append((params, metrics))
        (pa, ma), (pb, mb) = results
        assert ma == mb
        for key in pa.gen:
            assert np.array_equal(pa.gen[key], pb.gen[key]), key
        for key in pa.disc:
            assert np.array_equal(pa.disc[key], pb.disc[key]), key

    def test_divergence_detected(self):
        gen, disc, params, gen_opt, disc_opt, batch, y = self.make_step_args()
        params.disc["head/W"][:] = np.nan
        cfg = TrainConfig(epochs=1, batch_size=2)
        with pytest.raises(TrainingDiverged):
            train_step(gen, disc, params, gen_opt, disc_opt, batch, y, cfg,
                       np.random.default_rng(0))


class TestTrain:
    def test_step_and_history_counts(self):
        X, y = tiny_data(10)
        ckpt, history = train(X, y, TINY, TrainConfig(epochs=1, batch_size=2, rng_seed=3))
        assert len(history.rows) == 1
        assert ckpt.gen_opt.step == 5  # ceil(10 / 2) generator updates
        assert ckpt.disc_opt.step == 5
        assert ckpt.epoch == 1

    def test_update_isolation(self):
        # one step updates both nets, but each Adam state tracks its own only
        X, y = tiny_data(5)
        ckpt, _ = train(X, y, TINY, TrainConfig(epochs=1, batch_size=5, rng_seed=0))
        assert set(ckpt.gen_opt.m) == set(ckpt.params.gen)
        assert set(ckpt.disc_opt.m) == set(ckpt.params.disc)

    def test_paper_defaults(self):
        cfg = TrainConfig()
        assert cfg.epochs == 300
        assert cfg.lr == 0.0002
        assert cfg.beta1 == 0.5
        assert cfg.beta2 == 0.999
        assert cfg.batch_size == 32

    def test_missing_class_rejected(self):
        X, _ = tiny_data(6)
        y = np.array([0, 1, 2, 3, 0, 1])  # no lymphoma
        with pytest.raises(ValueError, match="lymphoma"):
            train(X, y, TINY, TrainConfig(epochs=1, batch_size=2))

    def test_deterministic_history(self):
        X, y = tiny_data(8)
        cfg = TrainConfig(epochs=2, batch_size=4, rng_seed=9)
        _, h1 = train(X, y, TINY, cfg)
        _, h2 = train(X, y, TINY, cfg)
        assert h1.to_csv() == h2.to_csv()

    def test_history_csv_roundtrip(self):
        X, y = tiny_data(6)
        _, history = train(X, y, TINY, TrainConfig(epochs=2, batch_size=3, rng_seed=1))
        text = history.to_csv()
        assert text.splitlines()[0] == "epoch,d_loss_real,d_loss_fake,g_loss,d_acc"
        back = TrainHistory.from_csv(text)
        assert back.to_csv() == text

    def test_all_metrics_finite(self):
        X, y = tiny_data(8)
        _, history = train(X, y, TINY, TrainConfig(epochs=2, batch_size=4, rng_seed=5))
        for row in history.rows:
            for value in (row.d_loss_real, row.d_loss_fake, row.g_loss, row.d_acc):
                assert np.isfinite(value)


class TestCheckpoint:
    def test_roundtrip_bitwise(self, tmp_path):
        X, y = tiny_data(6)
        ckpt, _ = train(X, y, TINY, TrainConfig(epochs=1, batch_size=3, rng_seed=7))
        save_checkpoint(ckpt, tmp_path / "ck")
        back = load_checkpoint(tmp_path / "ck")
        for group in ("gen", "disc", "gen_state", "disc_state"):
            a, b = getattr(ckpt.params, group), getattr(back.params, group)
            assert set(a) == set(b)
            for key in a:
                assert np.array_equal(a[key], b[key]), (group, key)
        assert back.gen_opt.step == ckpt.gen_opt.step
        assert back.model_cfg == ckpt.model_cfg
        assert back.train_cfg == ckpt.train_cfg
        assert back.rng_state == ckpt.rng_state

    def test_save_twice_identical_bytes(self, tmp_path):
        X, y = tiny_data(6)
        ckpt, _ = train(X, y, TINY, TrainConfig(epochs=1, batch_size=3, rng_seed=7))
        save_checkpoint(ckpt, tmp_path / "a")
        save_checkpoint(ckpt, tmp_path / "b")
        assert (tmp_path / "a" / "params.bin").read_bytes() == (
            tmp_path / "b" / "params.bin"
        ).read_bytes()
        assert (tmp_path / "a" / "meta").read_bytes() == (
            tmp_path / "b" / "meta"
        ).read_bytes()

    def test_meta_is_human_readable(self, tmp_path):
        X, y = tiny_data(6)
        ckpt, _ = train(X, y, TINY, TrainConfig(epochs=1, batch_size=3))
        save_checkpoint(ckpt, tmp_path / "ck")
        meta = (tmp_path / "ck" / "meta").read_text()
        assert "classes=normal,lung,head_neck,oesophagus,lymphoma" in meta
        assert "canvas=16,16" in meta
        assert "train.lr=0.0002" in meta

    def test_schema_mismatch_rejected(self, tmp_path):
        X, y = tiny_data(6)
        ckpt, _ = train(X, y, TINY, TrainConfig(epochs=1, batch_size=3))
        save_checkpoint(ckpt, tmp_path / "ck")
        meta_path = tmp_path / "ck" / "meta"
        meta_path.write_text(meta_path.read_text().replace("schema=1", "schema=99"))
        with pytest.raises(ValueError, match="schema"):
            load_checkpoint(tmp_path / "ck")

    def test_resume_equals_uninterrupted(self, tmp_path):
        X, y = tiny_data(8)
        straight, _ = train(X, y, TINY, TrainConfig(epochs=3, batch_size=4, rng_seed=11))

        partial, _ = train(X, y, TINY, TrainConfig(epochs=2, batch_size=4, rng_seed=11))
        save_checkpoint(partial, tmp_path / "ck")
        resumed_from = load_checkpoint(tmp_path / "ck")
        resumed, _ = train(
            X, y, TINY, TrainConfig(epochs=3, batch_size=4, rng_seed=11),
            resume=resumed_from,
        )
        for group in ("gen", "disc", "gen_state", "disc_state"):
            a, b = getattr(straight.params, group), getattr(resumed.params, group)
            for key in a:
                assert np.array_equal(a[key], b[key]), (group, key)
        assert straight.gen_opt.step == resumed.gen_opt.step

    def test_resume_rejects_other_model(self, tmp_path):
        X, y = tiny_data(6)
        ckpt, _ = train(X, y, TINY, TrainConfig(epochs=1, batch_size=3))
        other = ModelConfig(
            latent_dim=8, embed_dim=6, seed_map=(4, 4), upsample_stages=2,
            gen_channels=(8, 8), disc_layers=3, disc_channels=(6, 8, 8),
        )
        with pytest.raises(ValueError, match="configuration"):
            train(X, y, other, TrainConfig(epochs=2, batch_size=3), resume=ckpt)


class TestConfigValidation:
    def test_bad_values(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(lr=0.0)
        with pytest.raises(ValueError):
            TrainConfig(beta1=1.0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=1)
