import numpy as np
import pytest

from mipgan.core import ClassLabel
from mipgan.phantoms import (
    PhantomSpec,
    RegionEnergyClassifier,
    anatomy_masks,
    make_corpus,
    make_phantom_volume,
    region_energy_label,
)
from mipgan.preprocessing import preprocess


class TestPhantomVolume:
    def test_deterministic(self):
        a = make_phantom_volume(ClassLabel.LYMPHOMA, 7)
        b = make_phantom_volume(ClassLabel.LYMPHOMA, 7)
        assert np.array_equal(a.voxels, b.voxels)
        assert a.spacing_mm == b.spacing_mm

    def test_normal_quiet_outside_hotspots(self):
        v = make_phantom_volume(ClassLabel.NORMAL, 7)
        masks = anatomy_masks(v.dims)
        hot = masks["brain"] | masks["heart"] | masks["bladder"]
        assert v.voxels[~hot].max() <= 8.0

    def test_lesion_confined_to_recorded_mask(self):
        normal = make_phantom_volume(ClassLabel.NORMAL, 7)
        lung, mask = make_phantom_volume(ClassLabel.LUNG, 7, return_lesion_mask=True)
        diff = lung.voxels != normal.voxels
        assert diff.any()
        assert not (diff & ~mask).any()

    def test_every_class_differs_only_in_mask(self):
        for label in (ClassLabel.HEAD_NECK, ClassLabel.OESOPHAGUS, ClassLabel.LYMPHOMA):
            base = make_phantom_volume(ClassLabel.NORMAL, 11)
            lesioned, mask = make_phantom_volume(label, 11, return_lesion_mask=True)
            diff = lesioned.voxels != base.voxels
            assert diff.any(), label
            assert not (diff & ~mask).any(), label

    def test_value_bounds(self):
        for label in ClassLabel:
            v = make_phantom_volume(label, 3)
            assert v.voxels.min() >= 0.0
            assert v.voxels.max() <= 30.0

    def test_rejects_degenerate_dims(self):
        with pytest.raises(ValueError):
            PhantomSpec(dims=(16, 24, 24))


class TestCorpus:
    def test_counts_and_manifest(self):
        spec = PhantomSpec(
            dims=(32, 24, 24), per_class_count={label: 2 for label in ClassLabel}
        )
        items = make_corpus(spec)
        assert len(items) == 10
        assert len({item.item_id for item in items}) == 10
        per_class = {label: 0 for label in ClassLabel}
        for item in items:
            per_class[item.label] += 1
        assert all(count == 2 for count in per_class.values())

    def test_large_mixed_corpus_counts(self):
        counts = {
            ClassLabel.NORMAL: 675,
            ClassLabel.LUNG: 189,
            ClassLabel.HEAD_NECK: 422,
            ClassLabel.OESOPHAGUS: 97,
            ClassLabel.LYMPHOMA: 225,
        }
        spec = PhantomSpec(dims=(32, 24, 24), per_class_count=counts)
        items = make_corpus(spec)
        assert len(items) == sum(counts.values())
        assert len({item.item_id for item in items}) == len(items)

    def test_two_runs_identical(self):
        spec = PhantomSpec(
            dims=(32, 24, 24),
            per_class_count={ClassLabel.NORMAL: 2, ClassLabel.LUNG: 1},
            rng_seed=5,
        )
        a = make_corpus(spec)
        b = make_corpus(spec)
        assert [i.item_id for i in a] == [i.item_id for i in b]
        for x, y in zip(a, b):
            assert np.array_equal(x.volume.voxels, y.volume.voxels)

    def test_distinct_seeds_distinct_volumes(self):
        spec = PhantomSpec(per_class_count={ClassLabel.NORMAL: 2})
        a, b = make_corpus(spec)
        assert not np.array_equal(a.volume.voxels, b.volume.voxels)


class TestRegionEnergyOracle:
    def test_all_zero_image_is_normal(self):
        assert region_energy_label(np.zeros((160, 96))) == ClassLabel.NORMAL

    def test_calibration_accuracy(self):
        # the oracle must be reliable before it can judge a generator
        seeds = range(1, 201)
        per_class = {}
        for label in (ClassLabel.LUNG, ClassLabel.NORMAL):
            hits = 0
            for s in seeds:
                img = preprocess(make_phantom_volume(label, s), label)
                hits += region_energy_label(img.pixels) == label
            per_class[label] = hits / len(seeds)
        assert per_class[ClassLabel.LUNG] >= 0.95
        assert per_class[ClassLabel.NORMAL] >= 0.95

    def test_remaining_classes_separable(self):
        seeds = range(1, 41)
        for label in (ClassLabel.HEAD_NECK, ClassLabel.OESOPHAGUS, ClassLabel.LYMPHOMA):
            hits = 0
            for s in seeds:
                img = preprocess(make_phantom_volume(label, s), label)
                hits += region_energy_label(img.pixels) == label
            assert hits / len(seeds) >= 0.95, label

    def test_classifier_estimator_api(self):
        clf = RegionEnergyClassifier()
        assert clf.get_params() == {"threshold": 0.005}
        clf.fit()
        imgs = np.stack(
            [
                preprocess(make_phantom_volume(label, 4), label).pixels
                for label in (ClassLabel.NORMAL, ClassLabel.OESOPHAGUS)
            ]
        )
        pred = clf.predict(imgs)
        assert pred.tolist() == [0, 3]
