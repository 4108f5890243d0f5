import numpy as np
import numpy.testing as npt
import pytest

from pls_lab.datasets import Dataset, from_idx, one_hot, subset, synthetic_digits
from pls_lab.errors import IdxFormatError
from pls_lab.idx import MAGIC_IMAGES, MAGIC_LABELS, load_idx, write_idx
from pls_lab.rng import SeededRng


class TestIdxCodec:
    def test_image_round_trip_byte_exact(self, tmp_path):
        images, _ = synthetic_digits(20, seed=1, rows=9, cols=7)
        path = tmp_path / "imgs.idx"
        write_idx(path, images)
        loaded = load_idx(path)
        npt.assert_array_equal(loaded, images)
        path2 = tmp_path / "imgs2.idx"
        write_idx(path2, loaded)
        assert path.read_bytes() == path2.read_bytes()

    def test_label_round_trip(self, tmp_path):
        labels = np.arange(17, dtype=np.uint8) % 10
        path = tmp_path / "labels.idx"
        write_idx(path, labels)
        npt.assert_array_equal(load_idx(path), labels)

    def test_header_layout(self, tmp_path):
        images = np.zeros((2, 3, 4), dtype=np.uint8)
        path = tmp_path / "z.idx"
        write_idx(path, images)
        blob = path.read_bytes()
        assert int.from_bytes(blob[0:4], "big") == MAGIC_IMAGES
        assert int.from_bytes(blob[4:8], "big") == 2
        assert int.from_bytes(blob[8:12], "big") == 3
        assert int.from_bytes(blob[12:16], "big") == 4
        assert len(blob) == 16 + 24

    def test_single_zero_image(self, tmp_path):
        write_idx(tmp_path / "one.idx", np.zeros((1, 28, 28), dtype=np.uint8))
        ds = from_idx(tmp_path / "one.idx")
        assert ds.train_inputs.shape == (1, 784)
        npt.assert_array_equal(ds.train_inputs, np.zeros((1, 784)))

    def test_unsupported_magic_named_with_offset(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes((0x00000802).to_bytes(4, "big") + b"\x00" * 8)
        with pytest.raises(IdxFormatError) as exc:
            load_idx(path)
        assert exc.value.offset == 0
        assert "0x00000802" in str(exc.value)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "short.idx"
        path.write_bytes(MAGIC_IMAGES.to_bytes(4, "big") + b"\x00\x00\x00\x02")
        with pytest.raises(IdxFormatError) as exc:
            load_idx(path)
        assert exc.value.offset == 8

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "trunc.idx"
        header = MAGIC_LABELS.to_bytes(4, "big") + (10).to_bytes(4, "big")
        path.write_bytes(header + b"\x01" * 4)
        with pytest.raises(IdxFormatError) as exc:
            load_idx(path)
        assert "truncated" in str(exc.value)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "extra.idx"
        header = MAGIC_LABELS.to_bytes(4, "big") + (2).to_bytes(4, "big")
        path.write_bytes(header + b"\x01\x02\x03")
        with pytest.raises(IdxFormatError):
            load_idx(path)

    def test_dimension_overflow_guarded(self, tmp_path):
        path = tmp_path / "huge.idx"
        header = (
            MAGIC_IMAGES.to_bytes(4, "big")
            + (0xFFFFFFFF).to_bytes(4, "big")
            + (0xFFFFFFFF).to_bytes(4, "big")
            + (28).to_bytes(4, "big")
        )
        path.write_bytes(header)
        with pytest.raises(IdxFormatError) as exc:
            load_idx(path)
        assert "overflow" in str(exc.value)

    def test_zero_dimension_rejected(self, tmp_path):
        path = tmp_path / "zero.idx"
        path.write_bytes(MAGIC_LABELS.to_bytes(4, "big") + (0).to_bytes(4, "big"))
        with pytest.raises(IdxFormatError):
            load_idx(path)

    def test_writer_validates_dtype_and_rank(self, tmp_path):
        with pytest.raises(ValueError):
            write_idx(tmp_path / "f.idx", np.zeros((2, 2), dtype=np.uint8))
        with pytest.raises(ValueError):
            write_idx(tmp_path / "f.idx", np.zeros(4, dtype=np.float64))


class TestDataset:
    def test_from_idx_scaling_and_labels(self, tmp_path):
        images, labels = synthetic_digits(30, seed=2, rows=8, cols=8)
        write_idx(tmp_path / "i.idx", images)
        write_idx(tmp_path / "l.idx", labels)
        ds = from_idx(tmp_path / "i.idx", tmp_path / "l.idx")
        assert ds.train_inputs.min() >= 0.0 and ds.train_inputs.max() <= 1.0
        assert ds.train_inputs.shape == (30, 64)
        assert ds.num_classes == 10
        npt.assert_array_equal(ds.train_labels, labels.astype(np.int64))

    def test_label_range_enforced(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 4)), np.array([0, 10]), num_classes=10)

    def test_one_hot(self):
        got = one_hot(np.array([1, 0, 2]), 3)
        npt.assert_array_equal(got, [[0, 1, 0], [1, 0, 0], [0, 0, 1]])

    def test_targets_by_task(self):
        ds = Dataset(np.full((3, 2), 0.5), np.array([0, 1, 0]), num_classes=2)
        npt.assert_array_equal(ds.train_targets("classification"),
                               one_hot(np.array([0, 1, 0]), 2))
        npt.assert_array_equal(ds.train_targets("reconstruction"), ds.train_inputs)

    def test_subset_is_seeded_shuffle_prefix(self):
        ds = Dataset(np.arange(20.0).reshape(10, 2) / 20.0, np.arange(10) % 2,
                     num_classes=2)
        s1 = subset(ds, 4, SeededRng(3))
        s2 = subset(ds, 4, SeededRng(3))
        npt.assert_array_equal(s1.train_inputs, s2.train_inputs)
        assert s1.n == 4
        assert subset(ds, 10, SeededRng(3)) is ds  # no-op at full size
        # prefix of the same shuffle: limit 4 is a prefix of limit 6
        s3 = subset(ds, 6, SeededRng(3))
        npt.assert_array_equal(s3.train_inputs[:4], s1.train_inputs)

    def test_synthetic_digits_deterministic_and_balancedish(self):
        a_img, a_lab = synthetic_digits(50, seed=9, rows=8, cols=8)
        b_img, b_lab = synthetic_digits(50, seed=9, rows=8, cols=8)
        npt.assert_array_equal(a_img, b_img)
        npt.assert_array_equal(a_lab, b_lab)
        assert a_img.dtype == np.uint8
        assert set(np.unique(a_lab)) <= set(range(10))
