import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from ace.datasets import (
    DatasetSpec, LabeledDataset, blob_centers, gen_dataset, gen_splits, read_dataset_csv, read_splits,
    write_dataset_csv,
)
from ace.exceptions import ConfigurationError, DimensionError, DomainError


class LabeledDatasetTests(SimpleTestCase):
    def test_rejects_bad_contents(self):
        with self.assertRaises(DomainError):
            LabeledDataset([[0.0, np.nan]], [0])
        with self.assertRaises(DomainError):
            LabeledDataset([[0.0, 1.0]], [2], class_count=2)
        with self.assertRaises(DimensionError):
            LabeledDataset([[0.0, 1.0]], [0, 1])
        with self.assertRaises(DomainError):
            LabeledDataset([[0.0, 1.0]], [0], split="holdout")

    def test_arrays_are_read_only(self):
        data = LabeledDataset([[0.0, 1.0]], [1])
        with self.assertRaises(ValueError):
            data.features[0, 0] = 5.0


class GeneratorTests(SimpleTestCase):
    def test_same_seed_same_samples(self):
        spec = DatasetSpec(n_train=100, n_validation=10, n_test=10)
        a, b = gen_dataset(spec, 3), gen_dataset(spec, 3)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)
        self.assertFalse(np.array_equal(a.features, gen_dataset(spec, 4).features))

    def test_label_noise_flips_an_exact_fraction(self):
        clean = gen_dataset(DatasetSpec(n_train=1000, n_validation=0, n_test=1, noise=0.0), 9, n=1000)
        noisy = gen_dataset(DatasetSpec(n_train=1000, n_validation=0, n_test=1, noise=0.1), 9, n=1000)
        np.testing.assert_array_equal(clean.features, noisy.features)
        self.assertEqual(int((clean.labels != noisy.labels).sum()), 100)

    def test_classes_are_balanced(self):
        data = gen_dataset(DatasetSpec(classes=4, noise=0.0, n_train=400, n_validation=0, n_test=1), 1, n=400)
        np.testing.assert_array_equal(np.bincount(data.labels), [100, 100, 100, 100])

    def test_adjacent_centers_are_two_margins_apart(self):
        centers = blob_centers(4, 3, 2.5)
        self.assertAlmostEqual(float(np.linalg.norm(centers[0] - centers[1])), 5.0, places=12)
        np.testing.assert_allclose(blob_centers(3, 1, 1.0)[:, 0], [-2.0, 0.0, 2.0])

    def test_rings_put_each_class_on_its_radius(self):
        spec = DatasetSpec(kind="rings", classes=2, margin=2.0, spread=0.01, noise=0.0,
                           n_train=200, n_validation=0, n_test=1)
        data = gen_dataset(spec, 5, n=200)
        radius = np.linalg.norm(data.features, axis=1)
        np.testing.assert_allclose(radius[data.labels == 0], 2.0, atol=0.1)
        np.testing.assert_allclose(radius[data.labels == 1], 4.0, atol=0.1)

    def test_invalid_specs(self):
        with self.assertRaises(ConfigurationError):
            DatasetSpec.build(kind="rings", classes=3)
        with self.assertRaises(ConfigurationError):
            DatasetSpec.build(n_train=1, n_validation=0, n_test=1, classes=4)
        with self.assertRaises(ConfigurationError):
            gen_dataset({"kind": "blobs"}, 1)
        with self.assertRaises(ConfigurationError):
            gen_dataset(DatasetSpec(), 1, n=2)


class SplitTests(SimpleTestCase):
    def test_splits_are_sized_and_standardized(self):
        spec = DatasetSpec(n_train=500, n_validation=100, n_test=200, n_proxy=50)
        splits = gen_splits(spec, 11)
        self.assertEqual([len(d) for d in splits.named().values()], [500, 100, 200, 50])
        self.assertEqual(list(splits.named()), ["train", "validation", "test", "proxy"])
        np.testing.assert_allclose(splits.train.features.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(splits.train.features.std(axis=0), 1.0, atol=1e-12)
        pool = gen_dataset(spec, 11)
        np.testing.assert_allclose(splits.test.features * splits.scale + splits.mean, pool.features[600:800],
                                   atol=1e-12)

    def test_raw_splits_keep_the_generator_units(self):
        spec = DatasetSpec(n_train=200, n_validation=50, n_test=50, margin=0.2, spread=0.1, standardize=False)
        splits = gen_splits(spec, 11)
        pool = gen_dataset(spec, 11)
        np.testing.assert_array_equal(splits.train.features, pool.features[:200])
        np.testing.assert_array_equal(splits.test.features, pool.features[250:300])
        np.testing.assert_array_equal(splits.test.labels, pool.labels[250:300])

    def test_no_proxy_split_by_default(self):
        self.assertIsNone(gen_splits(DatasetSpec(n_train=50, n_validation=10, n_test=10), 1).proxy)

    def test_validation_split_is_required(self):
        with self.assertRaises(ConfigurationError):
            gen_splits(DatasetSpec(n_train=50, n_validation=0, n_test=10), 1)


class CsvTests(SimpleTestCase):
    def test_write_then_read(self):
        data = gen_dataset(DatasetSpec(n_train=30, n_validation=0, n_test=1, dimensions=3), 2, n=30, split="test")
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "test.csv"
            write_dataset_csv(data, path)
            header = path.read_text().splitlines()[0]
            loaded = read_dataset_csv(path, split="test", class_count=4)
        self.assertEqual(header, "label,f0,f1,f2")
        np.testing.assert_array_equal(loaded.features, data.features)
        np.testing.assert_array_equal(loaded.labels, data.labels)

    def test_bad_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            bad = Path(tmp) / "bad.csv"
            bad.write_text("y,x0\n1,2\n")
            with self.assertRaises(ConfigurationError):
                read_dataset_csv(bad)
            bad.write_text("label,f0\none,2\n")
            with self.assertRaises(ConfigurationError):
                read_dataset_csv(bad)
            with self.assertRaises(ConfigurationError):
                read_dataset_csv(Path(tmp) / "missing.csv")

    def test_read_splits_unifies_the_class_count(self):
        splits = gen_splits(DatasetSpec(n_train=40, n_validation=12, n_test=12, classes=4), 6)
        with tempfile.TemporaryDirectory() as tmp:
            for name, data in splits.named().items():
                write_dataset_csv(data, Path(tmp) / f"{name}.csv")
            (Path(tmp) / "validation.csv").write_text("label,f0,f1\n0,0.5,0.5\n")
            loaded = read_splits(tmp)
        self.assertEqual(loaded.validation.class_count, 4)
        self.assertEqual(len(loaded.validation), 1)
        self.assertIsNone(loaded.proxy)
        np.testing.assert_array_equal(loaded.train.features, splits.train.features)

    def test_read_splits_needs_train(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigurationError):
                read_splits(tmp)
