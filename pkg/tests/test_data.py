"""CSV/PGM ingestion, standardization, splitting, synthetic blobs."""

import math

import numpy as np
import pytest

from mcbnn.data import (
    SplitSpec,
    StandardizationParams,
    apply_standardizer,
    fit_standardizer,
    fit_standardizer_matrix,
    load_csv,
    load_image_dir,
    read_pgm,
    save_csv,
    split_indices,
    standardize_matrix,
    stratified_split,
    synth_blobs,
    write_pgm,
)
from mcbnn.errors import ConfigError, DataError
from mcbnn.model import Dataset


class TestCsv:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        data = Dataset(rng.standard_normal((5, 3)), np.array([0, 1, 2, 1, 0]), 3)
        path = tmp_path / "data.csv"
        save_csv(data, path)
        back = load_csv(path)
        assert np.array_equal(back.features, data.features)
        assert np.array_equal(back.labels, data.labels)
        assert back.n_classes == 3

    def test_awkward_floats_roundtrip(self, tmp_path):
        values = np.array([[0.1 + 0.2, math.pi, 5e-324]])
        data = Dataset(values, np.array([0]), 1)
        path = tmp_path / "data.csv"
        save_csv(data, path)
        assert np.array_equal(load_csv(path).features, values)

    def test_header_written(self, tmp_path):
        path = tmp_path / "data.csv"
        save_csv(Dataset(np.zeros((1, 2)), np.array([0]), 1), path)
        assert path.read_text().splitlines()[0] == "label,f0,f1"

    def test_classes_inferred_from_max_label(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("label,f0\n0,1.0\n2,2.0\n")
        assert load_csv(path).n_classes == 3

    def test_header_must_match_exactly(self, tmp_path):
        for header in ("class,f0", "label,f1,f0", "label", "f0,label"):
            path = tmp_path / "bad.csv"
            path.write_text(header + "\n0,1.0\n")
            with pytest.raises(DataError, match="header"):
                load_csv(path)

    def test_ragged_row_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,f0,f1\n0,1.0,2.0\n1,3.0\n")
        with pytest.raises(DataError, match=r":3:"):
            load_csv(path)

    def test_non_numeric_cell_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,f0\n0,abc\n")
        with pytest.raises(DataError, match=r":2:"):
            load_csv(path)

    def test_bad_labels(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,f0\n1.5,1.0\n")
        with pytest.raises(DataError):
            load_csv(path)
        path.write_text("label,f0\n-1,1.0\n")
        with pytest.raises(DataError, match="negative"):
            load_csv(path)

    def test_non_finite_feature(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,f0\n0,inf\n")
        with pytest.raises(DataError, match="non-finite"):
            load_csv(path)

    def test_empty_and_header_only(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("")
        with pytest.raises(DataError):
            load_csv(path)
        path.write_text("label,f0\n")
        with pytest.raises(DataError):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "absent.csv")


class TestPgm:
    def test_roundtrip(self, tmp_path):
        img = np.arange(6).reshape(2, 3) / 255.0 * 40
        path = tmp_path / "img.pgm"
        write_pgm(path, img)
        back = read_pgm(path)
        assert back.shape == (2, 3)
        assert np.abs(back - img).max() <= 0.5 / 255.0

    def test_bytes_map_to_unit_interval(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64]))
        img = read_pgm(path)
        assert np.array_equal(img, np.array([[0, 128], [255, 64]]) / 255.0)

    def test_comments_in_header(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P5\n# made by hand\n2 1\n# another\n255\n" + bytes([10, 20]))
        assert np.array_equal(read_pgm(path), np.array([[10, 20]]) / 255.0)

    def test_low_maxval_still_divides_by_255(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P5\n1 1\n128\n" + bytes([128]))
        assert read_pgm(path)[0, 0] == 128 / 255.0

    def test_single_separator_before_pixels(self, tmp_path):
        # first pixel byte 32 is ASCII space; it must be read as data
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P5\n2 1\n255\n" + bytes([32, 65]))
        assert np.array_equal(read_pgm(path), np.array([[32, 65]]) / 255.0)

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P2\n1 1\n255\n0")
        with pytest.raises(DataError, match="P5"):
            read_pgm(path)

    def test_bad_maxval(self, tmp_path):
        for maxval in (b"0", b"256", b"65535"):
            path = tmp_path / "img.pgm"
            path.write_bytes(b"P5\n1 1\n" + maxval + b"\n" + bytes([0, 0]))
            with pytest.raises(DataError, match="maxval"):
                read_pgm(path)

    def test_truncated_pixels(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([1, 2, 3]))
        with pytest.raises(DataError, match="pixel"):
            read_pgm(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P5\n2")
        with pytest.raises(DataError, match="header"):
            read_pgm(path)

    def test_write_clamps_and_rounds(self, tmp_path):
        path = tmp_path / "img.pgm"
        write_pgm(path, np.array([[-0.5, 2.0]]))
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n2 1\n255\n")
        assert raw[-2:] == bytes([0, 255])


class TestImageDir:
    @staticmethod
    def fill(root, layout):
        """layout: {class_name: [constant pixel value per image]}"""
        for name, values in layout.items():
            d = root / name
            d.mkdir(parents=True)
            for i, v in enumerate(values):
                write_pgm(d / f"img_{i}.pgm", np.full((4, 4), v))

    def test_sorted_class_indices_and_counts(self, tmp_path):
        self.fill(tmp_path, {"normal": [0.2] * 5, "bacteria": [0.8] * 3})
        images, labels, class_names = load_image_dir(tmp_path)
        assert class_names == ["bacteria", "normal"]
        assert np.array_equal(np.bincount(labels), [3, 5])
        assert len(images) == 8
        assert images[0].shape == (4, 4)
        # bacteria images come first and carry the bright constant
        assert images[0].mean() > 0.5 > images[3].mean()

    def test_files_sorted_within_class(self, tmp_path):
        d = tmp_path / "only"
        d.mkdir()
        write_pgm(d / "b.pgm", np.full((2, 2), 40 / 255.0))
        write_pgm(d / "a.pgm", np.full((2, 2), 200 / 255.0))
        images, _, _ = load_image_dir(tmp_path)
        assert images[0][0, 0] == 200 / 255.0
        assert images[1][0, 0] == 40 / 255.0

    def test_non_pgm_files_ignored(self, tmp_path):
        self.fill(tmp_path, {"a": [0.1, 0.2], "b": [0.3, 0.4]})
        (tmp_path / "a" / "notes.txt").write_text("ignore me")
        images, labels, _ = load_image_dir(tmp_path)
        assert len(images) == 4

    def test_mismatched_sizes_rejected(self, tmp_path):
        d = tmp_path / "a"
        d.mkdir()
        write_pgm(d / "x.pgm", np.zeros((2, 2)))
        write_pgm(d / "y.pgm", np.zeros((3, 3)))
        with pytest.raises(DataError, match="size"):
            load_image_dir(tmp_path)

    def test_empty_class_dir_rejected(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(DataError, match="no .pgm"):
            load_image_dir(tmp_path)

    def test_no_class_dirs_rejected(self, tmp_path):
        with pytest.raises(DataError):
            load_image_dir(tmp_path)

    def test_missing_root(self, tmp_path):
        with pytest.raises(DataError):
            load_image_dir(tmp_path / "absent")


class TestStandardizer:
    def test_matches_hand_zscore(self):
        X = np.array([[1.0, 10.0], [3.0, 30.0], [5.0, 20.0]])
        params = fit_standardizer_matrix(X)
        mean = X.mean(axis=0)
        sd = np.sqrt(((X - mean) ** 2).mean(axis=0))  # population sd
        assert np.allclose(params.mean, mean, atol=1e-15)
        assert np.allclose(params.sd, sd, atol=1e-15)
        z = standardize_matrix(params, X)
        assert np.allclose(z, (X - mean) / sd, atol=1e-15)

    def test_train_becomes_zero_mean_unit_sd(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((50, 4)) * 3 + 7
        z = standardize_matrix(fit_standardizer_matrix(X), X)
        assert np.abs(z.mean(axis=0)).max() < 1e-9
        assert np.abs(z.std(axis=0) - 1.0).max() < 1e-9

    def test_constant_feature_flagged_and_zeroed(self):
        X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        params = fit_standardizer_matrix(X)
        assert not params.constant_mask[0]
        assert params.constant_mask[1]
        z = standardize_matrix(params, np.array([[10.0, 99.0]]))
        assert z[0, 1] == 0.0
        assert z[0, 0] != 0.0

    def test_single_row_all_constant(self):
        params = fit_standardizer_matrix(np.array([[4.0, -2.0]]))
        assert params.constant_mask.all()
        assert np.array_equal(standardize_matrix(params, np.array([[9.0, 9.0]])),
                              [[0.0, 0.0]])

    def test_test_split_uses_train_statistics(self):
        rng = np.random.default_rng(2)
        train = Dataset(rng.standard_normal((20, 2)) + 5.0, np.zeros(20, dtype=int), 1)
        test = Dataset(rng.standard_normal((10, 2)) + 5.0, np.zeros(10, dtype=int), 1)
        params = fit_standardizer(train)
        z_test = apply_standardizer(params, test)
        expected = (test.features - params.mean) / params.sd
        assert np.allclose(z_test.features, expected, atol=1e-15)

    def test_shape_mismatch(self):
        params = fit_standardizer_matrix(np.zeros((3, 2)))
        with pytest.raises(ValueError):
            standardize_matrix(params, np.zeros((3, 5)))


class TestSplit:
    def test_reference_counts(self):
        labels = np.array([0] * 8 + [1] * 4)
        train_idx, test_idx = split_indices(labels, SplitSpec(0.25, seed=0))
        assert np.array_equal(np.bincount(labels[test_idx]), [2, 1])
        assert np.array_equal(np.bincount(labels[train_idx]), [6, 3])

    def test_partition(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 3, 30)
        train_idx, test_idx = split_indices(labels, SplitSpec(0.3, seed=1))
        combined = np.concatenate([train_idx, test_idx])
        assert np.array_equal(np.sort(combined), np.arange(30))
        assert np.array_equal(train_idx, np.sort(train_idx))
        assert np.array_equal(test_idx, np.sort(test_idx))

    def test_deterministic_and_seed_sensitive(self):
        labels = np.array([0] * 20 + [1] * 20)
        a = split_indices(labels, SplitSpec(0.25, seed=5))
        b = split_indices(labels, SplitSpec(0.25, seed=5))
        c = split_indices(labels, SplitSpec(0.25, seed=6))
        assert np.array_equal(a[1], b[1])
        assert not np.array_equal(a[1], c[1])

    def test_clamping_keeps_both_sides_nonempty(self):
        labels = np.array([0, 0, 1, 1, 1])
        train_idx, test_idx = split_indices(labels, SplitSpec(0.9, seed=0))
        assert np.array_equal(np.bincount(labels[test_idx]), [1, 2])
        train_idx, test_idx = split_indices(labels, SplitSpec(0.01, seed=0))
        assert np.array_equal(np.bincount(labels[test_idx]), [1, 1])

    def test_tiny_class_rejected(self):
        with pytest.raises(ConfigError):
            split_indices(np.array([0, 0, 0, 1]), SplitSpec(0.25))

    def test_class_substreams_independent(self):
        # class 0 occupies the same positions; relabeling the other class
        # must not disturb class 0's assignment
        a = split_indices(np.array([0] * 8 + [1] * 4), SplitSpec(0.25, seed=9))
        b = split_indices(np.array([0] * 8 + [2] * 4), SplitSpec(0.25, seed=9))
        assert np.array_equal(a[1][a[1] < 8], b[1][b[1] < 8])

    def test_unstratified_partition(self):
        labels = np.array([0] * 9 + [1])
        train_idx, test_idx = split_indices(labels, SplitSpec(0.2, seed=2, stratified=False))
        assert len(test_idx) == 2
        assert np.array_equal(np.sort(np.concatenate([train_idx, test_idx])),
                              np.arange(10))

    def test_dataset_split_wrapper(self):
        data = synth_blobs(10, 2, 2, separation=4.0, noise_sd=0.5, seed=0)
        train, test = stratified_split(data, SplitSpec(0.2, seed=0))
        assert train.features.shape[0] == 16
        assert test.features.shape[0] == 4
        assert train.n_classes == test.n_classes == 2

    def test_fraction_validation(self):
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                SplitSpec(bad)


class TestSynthBlobs:
    def test_zero_noise_lands_on_centers(self):
        data = synth_blobs(3, 2, 2, separation=4.0, noise_sd=0.0, seed=0)
        target = 4.0 / math.sqrt(2.0)
        for row, label in zip(data.features, data.labels):
            expected = np.zeros(2)
            expected[label] = target
            assert np.array_equal(row, expected)

    def test_centers_pairwise_equidistant(self):
        data = synth_blobs(1, 3, 4, separation=2.5, noise_sd=0.0, seed=0)
        rows = data.features
        for i in range(3):
            for j in range(i + 1, 3):
                d = np.linalg.norm(rows[i] - rows[j])
                assert abs(d - 2.5) < 1e-12

    def test_sizes_and_balance(self):
        data = synth_blobs(20, 2, 2, separation=1.0, noise_sd=1.0, seed=0)
        assert data.features.shape == (40, 2)
        assert np.array_equal(np.bincount(data.labels), [20, 20])

    def test_deterministic(self):
        a = synth_blobs(5, 2, 3, 1.0, 0.5, seed=4)
        b = synth_blobs(5, 2, 3, 1.0, 0.5, seed=4)
        c = synth_blobs(5, 2, 3, 1.0, 0.5, seed=5)
        assert np.array_equal(a.features, b.features)
        assert not np.array_equal(a.features, c.features)

    def test_class_means_near_centers(self):
        data = synth_blobs(400, 3, 3, separation=6.0, noise_sd=1.0, seed=6)
        target = 6.0 / math.sqrt(2.0)
        for k in range(3):
            mean = data.features[data.labels == k].mean(axis=0)
            expected = np.zeros(3)
            expected[k] = target
            assert np.abs(mean - expected).max() < 5 * 1.0 / math.sqrt(400)

    def test_validation(self):
        with pytest.raises(ValueError):
            synth_blobs(5, 4, 3, 1.0, 0.1)  # more classes than dimensions
        with pytest.raises(ValueError):
            synth_blobs(5, 1, 3, 1.0, 0.1)
        with pytest.raises(ValueError):
            synth_blobs(0, 2, 3, 1.0, 0.1)
        with pytest.raises(ValueError):
            synth_blobs(5, 2, 3, -1.0, 0.1)


class TestStandardizationParamsContainer:
    def test_fields(self):
        p = StandardizationParams(np.zeros(2), np.ones(2), np.zeros(2, dtype=bool))
        assert p.mean.shape == p.sd.shape == p.constant_mask.shape
