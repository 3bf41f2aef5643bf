import numpy as np
import pytest

from mipgan.core import ClassLabel, Volume3D
from mipgan.preprocessing import (
    MipPreprocessor,
    PipelineConfig,
    bilinear_resize,
    fit_to_canvas,
    mip_project,
    normalize_suv,
    preprocess,
    resample_nearest,
)


def random_volume(rng, dims, spacing, vmax=20.0):
    vox = rng.random(dims, dtype=np.float64) * vmax
    return Volume3D(voxels=vox.astype(np.float32), spacing_mm=spacing)


def resample_bruteforce(volume, target):
    """Independent oracle: per-output-voxel nearest input center scan."""
    dims_out = [
        max(1, int(np.floor(n * s / target + 0.5)))
        for n, s in zip(volume.dims, volume.spacing_mm)
    ]
    out = np.zeros(dims_out, dtype=np.float32)
    for zo in range(dims_out[0]):
        for yo in range(dims_out[1]):
            for xo in range(dims_out[2]):
                idx = []
                for axis, o in zip(range(3), (zo, yo, xo)):
                    center = (o + 0.5) * target
                    spacing = volume.spacing_mm[axis]
                    best, best_dist = 0, abs(0.5 * spacing - center)
                    for j in range(1, volume.dims[axis]):
                        dist = abs((j + 0.5) * spacing - center)
                        if dist < best_dist:
                            best, best_dist = j, dist
                    idx.append(best)
                out[zo, yo, xo] = volume.voxels[idx[0], idx[1], idx[2]]
    return out


def mip_bruteforce(volume, axis_index):
    dims = volume.dims
    kept = [d for i, d in enumerate(dims) if i != axis_index]
    out = np.full(kept, -np.inf, dtype=np.float32)
    for z in range(dims[0]):
        for y in range(dims[1]):
            for x in range(dims[2]):
                coords = [z, y, x]
                del coords[axis_index]
                out[coords[0], coords[1]] = max(
                    out[coords[0], coords[1]], volume.voxels[z, y, x]
                )
    return out


class TestResample:
    def test_identity_when_already_isotropic(self):
        rng = np.random.default_rng(0)
        v = random_volume(rng, (6, 5, 4), (2.0, 2.0, 2.0))
        out = resample_nearest(v, 2.0)
        assert out.dims == v.dims
        assert np.array_equal(out.voxels, v.voxels)

    def test_constant_volume_stays_constant(self):
        v = Volume3D(np.full((5, 6, 7), 3.25, np.float32), (4.06, 4.06, 2.0))
        out = resample_nearest(v, 2.0)
        assert np.all(out.voxels == np.float32(3.25))

    def test_matches_bruteforce_paper_spacing(self):
        rng = np.random.default_rng(1)
        v = random_volume(rng, (5, 4, 3), (4.06, 4.06, 2.0))
        out = resample_nearest(v, 2.0)
        assert np.array_equal(out.voxels, resample_bruteforce(v, 2.0))

    def test_matches_bruteforce_random_spacings(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            dims = tuple(rng.integers(1, 8, size=3))
            spacing = tuple(rng.uniform(0.5, 6.0, size=3))
            target = float(rng.uniform(0.5, 5.0))
            v = random_volume(rng, dims, spacing)
            out = resample_nearest(v, target)
            assert np.array_equal(out.voxels, resample_bruteforce(v, target))
            assert out.spacing_mm == (target, target, target)

    def test_no_new_intensity_values(self):
        rng = np.random.default_rng(3)
        v = random_volume(rng, (4, 5, 6), (3.7, 1.2, 2.9))
        out = resample_nearest(v, 2.0)
        assert np.isin(out.voxels, v.voxels).all()

    def test_rejects_nonpositive_spacing(self):
        v = random_volume(np.random.default_rng(0), (3, 3, 3), (2.0, 2.0, 2.0))
        with pytest.raises(ValueError):
            resample_nearest(v, 0.0)
        with pytest.raises(ValueError):
            resample_nearest(v, -1.0)


class TestNormalize:
    def test_window_endpoints(self):
        v = Volume3D(np.array([[[0.0, 15.0, 30.0, 45.0]]], np.float32), (1, 1, 1))
        out = normalize_suv(v, 30.0)
        assert out.voxels[0, 0, 0] == 0.0
        assert out.voxels[0, 0, 1] == 0.5
        assert out.voxels[0, 0, 2] == 1.0
        assert out.voxels[0, 0, 3] == 1.0  # clamped above the window

    def test_monotone_and_bounded(self):
        rng = np.random.default_rng(4)
        a = rng.random((3, 4, 5), dtype=np.float32) * 60
        b = a + rng.random((3, 4, 5), dtype=np.float32)
        na = normalize_suv(Volume3D(a, (1, 1, 1)), 30.0).voxels
        nb = normalize_suv(Volume3D(b, (1, 1, 1)), 30.0).voxels
        assert (nb >= na).all()
        assert na.min() >= 0.0 and na.max() <= 1.0

    def test_rejects_bad_suv_max(self):
        v = Volume3D(np.zeros((2, 2, 2), np.float32), (1, 1, 1))
        with pytest.raises(ValueError):
            normalize_suv(v, 0.0)


class TestMip:
    def test_zero_volume(self):
        v = Volume3D(np.zeros((3, 4, 5), np.float32), (1, 1, 1))
        assert np.all(mip_project(v, "y") == 0)

    def test_single_voxel_projection(self):
        vox = np.zeros((6, 5, 4), np.float32)
        vox[2, 3, 1] = 1.0
        v = Volume3D(vox, (1, 1, 1))
        over_x = mip_project(v, "x")
        assert over_x.shape == (6, 5)
        assert over_x[2, 3] == 1.0 and over_x.sum() == 1.0
        over_y = mip_project(v, "y")
        assert over_y.shape == (6, 4)
        assert over_y[2, 1] == 1.0 and over_y.sum() == 1.0

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(5)
        v = random_volume(rng, (6, 5, 4), (1, 1, 1))
        assert np.allclose(mip_project(v, "y"), mip_bruteforce(v, 1), atol=0)
        assert np.allclose(mip_project(v, "x"), mip_bruteforce(v, 2), atol=0)

    def test_rejects_z_axis(self):
        v = random_volume(np.random.default_rng(0), (3, 3, 3), (1, 1, 1))
        with pytest.raises(ValueError):
            mip_project(v, "z")

    def test_commutes_with_monotone_map(self):
        # max of clamp-scale == clamp-scale of max
        rng = np.random.default_rng(6)
        v = random_volume(rng, (5, 6, 7), (1, 1, 1), vmax=60.0)
        a = mip_project(normalize_suv(v, 30.0), "y")
        b = np.clip(mip_project(v, "y"), 0, 30) / np.float32(30.0)
        assert np.array_equal(a, b)


class TestCanvas:
    def test_exact_canvas_passthrough(self):
        rng = np.random.default_rng(7)
        img = rng.random((160, 96), dtype=np.float32)
        assert np.array_equal(fit_to_canvas(img), img)

    def test_exact_double_downscale_no_padding(self):
        rng = np.random.default_rng(8)
        img = rng.random((320, 192), dtype=np.float32)
        out = fit_to_canvas(img)
        assert out.shape == (160, 96)
        # aspect matches exactly, so no letterbox rows/cols of zeros are forced
        assert np.array_equal(out, bilinear_resize(img, 160, 96))

    def test_min_scale_rule_and_zero_borders(self):
        rng = np.random.default_rng(9)
        h, w = 429, 341
        img = rng.random((h, w), dtype=np.float32) + 0.5
        out = fit_to_canvas(img)
        assert out.shape == (160, 96)
        scale = min(160 / h, 96 / w)
        assert scale == 96 / w  # width is the binding constraint here
        new_h = int(np.floor(h * scale + 0.5))
        top = (160 - new_h) // 2
        assert np.all(out[:top] == 0.0)
        assert np.all(out[top + new_h :] == 0.0)
        assert np.all(out[top : top + new_h] > 0.0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            fit_to_canvas(np.zeros((0, 4), np.float32))

    def test_bilinear_identity(self):
        rng = np.random.default_rng(10)
        img = rng.random((13, 9), dtype=np.float32)
        assert np.array_equal(bilinear_resize(img, 13, 9), img)


class TestPreprocess:
    def test_output_contract(self):
        rng = np.random.default_rng(11)
        v = random_volume(rng, (16, 12, 12), (4.0, 4.0, 4.0), vmax=40.0)
        img = preprocess(v, ClassLabel.NORMAL)
        assert img.shape == (160, 96)
        assert img.pixels.min() >= 0.0 and img.pixels.max() <= 1.0
        assert img.label == ClassLabel.NORMAL

    def test_order_exchange_normalize_mip(self):
        rng = np.random.default_rng(12)
        v = random_volume(rng, (8, 7, 6), (2.0, 3.0, 1.5), vmax=60.0)
        a = mip_project(normalize_suv(v, 30.0), "y")
        b = normalize_suv(
            Volume3D(mip_project(v, "y")[:, None, :], v.spacing_mm), 30.0
        ).voxels[:, 0, :]
        assert np.array_equal(a, b)

    def test_transformer_batch(self):
        rng = np.random.default_rng(13)
        vols = [random_volume(rng, (16, 12, 12), (4, 4, 4)) for _ in range(4)]
        tf = MipPreprocessor(canvas=(80, 48))
        X = tf.fit_transform(vols)
        assert X.shape == (4, 80, 48)
        assert X.min() >= 0.0 and X.max() <= 1.0

    def test_transformer_params_roundtrip(self):
        tf = MipPreprocessor(target_spacing_mm=1.5, canvas=(40, 24))
        params = tf.get_params()
        assert params["target_spacing_mm"] == 1.5
        clone = MipPreprocessor(**params)
        assert clone.get_params() == params

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PipelineConfig(projection_axis="z")
        with pytest.raises(ValueError):
            PipelineConfig(target_spacing_mm=-2.0)
