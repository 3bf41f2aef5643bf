import numpy as np
import pytest
from sklearn.base import clone

from mipgan.estimator import MipGan


def tiny_gan(**overrides):
    defaults = dict(
        latent_dim=8, embed_dim=6, seed_map=(4, 4), upsample_stages=2,
        gen_channels=(12, 8), disc_layers=3, disc_channels=(6, 8, 8),
        epochs=1, batch_size=5, random_state=0,
    )
    defaults.update(overrides)
    return MipGan(**defaults)


def tiny_data(n=10, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 16, 16), dtype=np.float32)
    y = np.arange(n) % 5
    return X, y


class TestSklearnApi:
    def test_get_set_params_roundtrip(self):
        est = tiny_gan(lr=0.001)
        params = est.get_params()
        assert params["lr"] == 0.001
        assert params["bn_momentum"] == 0.8
        est.set_params(epochs=2)
        assert est.epochs == 2

    def test_clone(self):
        est = tiny_gan(beta1=0.4)
        copy = clone(est)
        assert copy.get_params() == est.get_params()
        assert copy is not est

    def test_defaults_echo_reference_recipe(self):
        est = MipGan()
        assert est.epochs == 300
        assert est.lr == 0.0002
        assert est.beta1 == 0.5
        assert est.latent_dim == 100
        assert est.embed_dim == 50
        assert est.canvas == (160, 96)


@pytest.fixture(scope="module")
def fitted():
    X, y = tiny_data()
    return tiny_gan().fit(X, y)


class TestFitSample:

    def test_fit_records_history(self, fitted):
        assert len(fitted.history_.rows) == 1
        assert fitted.checkpoint_.epoch == 1

    def test_sample_shapes_and_range(self, fitted):
        images = fitted.sample([0, 1, 2], seed=4)
        assert images.shape == (3, 16, 16)
        assert images.min() >= 0.0 and images.max() <= 1.0

    def test_sample_deterministic_per_seed(self, fitted):
        a = fitted.sample([2, 2], seed=5)
        b = fitted.sample([2, 2], seed=5)
        assert np.array_equal(a, b)

    def test_sample_accepts_class_names(self, fitted):
        images = fitted.sample(["lung", "lymphoma"], seed=0)
        assert images.shape == (2, 16, 16)

    def test_discriminate_range(self, fitted):
        X, y = tiny_data(4, seed=9)
        p = fitted.discriminate(X, y[:4])
        assert p.shape == (4,)
        assert np.all((p > 0) & (p < 1))

    def test_unfitted_raises(self):
        with pytest.raises(RuntimeError, match="not fitted"):
            tiny_gan().sample([0])

    def test_save_load_roundtrip(self, fitted, tmp_path):
        fitted.save(tmp_path / "ck")
        back = MipGan.from_checkpoint(tmp_path / "ck")
        assert back.get_params() == fitted.get_params()
        a = fitted.sample([3], seed=1)
        b = back.sample([3], seed=1)
        assert np.array_equal(a, b)
