import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rib import data
from rib.rng import derive_seed, stream


def write_raw(path, payload):
    path.write_bytes(payload)
    return path


def tiny_idx(tmp_path, count=3, rows=2, cols=2):
    images = np.arange(count * rows * cols, dtype=np.uint8).reshape(count, rows, cols) * 20
    labels = np.arange(count, dtype=np.uint8) % 10
    ip, lp = tmp_path / "img.idx", tmp_path / "lbl.idx"
    data.write_idx(ip, lp, images, labels)
    return ip, lp, images, labels


# ---- IDX ----------------------------------------------------------------


def test_idx_round_trip(tmp_path):
    ip, lp, images, labels = tiny_idx(tmp_path)
    ds = data.load_idx(ip, lp)
    assert len(ds) == 3 and ds.dim == 4
    np.testing.assert_array_equal(ds.labels, labels)
    np.testing.assert_allclose(ds.features, images.reshape(3, 4) / 255.0)


def test_idx_is_big_endian(tmp_path):
    ip = write_raw(tmp_path / "i", struct.pack(">4I", 0x803, 1, 1, 2) + bytes([0, 255]))
    lp = write_raw(tmp_path / "l", struct.pack(">2I", 0x801, 1) + bytes([7]))
    ds = data.load_idx(ip, lp)
    np.testing.assert_array_equal(ds.features, [[0.0, 1.0]])
    assert ds.labels[0] == 7


def test_idx_bad_magic_names_offset_zero(tmp_path):
    ip = write_raw(tmp_path / "i", struct.pack(">4I", 0x802, 1, 1, 1) + b"\0")
    lp = write_raw(tmp_path / "l", struct.pack(">2I", 0x801, 1) + b"\0")
    with pytest.raises(data.FormatError, match="offset 0"):
        data.load_idx(ip, lp)


def test_idx_truncated_pixels(tmp_path):
    ip = write_raw(tmp_path / "i", struct.pack(">4I", 0x803, 2, 2, 2) + b"\0" * 5)
    lp = write_raw(tmp_path / "l", struct.pack(">2I", 0x801, 2) + b"\0\0")
    with pytest.raises(data.FormatError, match="offset 21"):
        data.load_idx(ip, lp)


def test_idx_truncated_header(tmp_path):
    ip = write_raw(tmp_path / "i", struct.pack(">2I", 0x803, 2))
    lp = write_raw(tmp_path / "l", struct.pack(">2I", 0x801, 2) + b"\0\0")
    with pytest.raises(data.FormatError, match="truncated header"):
        data.load_idx(ip, lp)


def test_idx_count_mismatch(tmp_path):
    ip = write_raw(tmp_path / "i", struct.pack(">4I", 0x803, 1, 1, 1) + b"\0")
    lp = write_raw(tmp_path / "l", struct.pack(">2I", 0x801, 2) + b"\0\0")
    with pytest.raises(data.FormatError, match="does not match"):
        data.load_idx(ip, lp)


def test_idx_label_out_of_range(tmp_path):
    ip = write_raw(tmp_path / "i", struct.pack(">4I", 0x803, 1, 1, 1) + b"\0")
    lp = write_raw(tmp_path / "l", struct.pack(">2I", 0x801, 1) + bytes([12]))
    with pytest.raises(data.FormatError):
        data.load_idx(ip, lp)


# ---- CSV ----------------------------------------------------------------


def test_csv_round_trip_is_exact(tmp_path):
    ds = data.gaussian_mixture(3, 2, 10, seed=4)
    data.save_csv(ds, tmp_path / "d.csv")
    back = data.load_csv(tmp_path / "d.csv", num_classes=2)
    assert back.features.tobytes() == ds.features.tobytes()
    np.testing.assert_array_equal(back.labels, ds.labels)


def test_csv_requires_label_column(tmp_path):
    (tmp_path / "d.csv").write_text("a,b\n1,2\n")
    with pytest.raises(data.FormatError):
        data.load_csv(tmp_path / "d.csv")


# ---- datasets -----------------------------------------------------------


def test_dataset_validation():
    with pytest.raises(ValueError):
        data.LabeledDataset(np.zeros((2, 2)), np.array([0, 2]), 2)
    with pytest.raises(ValueError):
        data.LabeledDataset(np.array([[np.nan]]), np.array([0]), 2)
    with pytest.raises(ValueError):
        data.LabeledDataset(np.zeros((2, 2)), np.array([0]), 2)


def test_dataset_arrays_are_read_only():
    ds = data.LabeledDataset(np.zeros((2, 2)), np.array([0, 1]), 2)
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1.0


def test_mixture_is_deterministic_and_balanced():
    a = data.gaussian_mixture(5, 4, 100, seed=9)
    b = data.gaussian_mixture(5, 4, 100, seed=9)
    assert a.features.tobytes() == b.features.tobytes()
    np.testing.assert_array_equal(np.bincount(a.labels), [25] * 4)
    c = data.gaussian_mixture(5, 4, 100, seed=10)
    assert a.features.tobytes() != c.features.tobytes()


def test_mixture_label_noise_rate():
    clean = data.gaussian_mixture(2, 2, 20000, seed=1)
    noisy = data.gaussian_mixture(2, 2, 20000, seed=1, label_noise_rate=0.3)
    flipped = np.mean(clean.labels != noisy.labels)
    # resampling over both classes flips half the noisy rows
    assert abs(flipped - 0.15) < 0.01


def test_mixture_means_have_requested_norm():
    ds = data.gaussian_mixture(20, 2, 40000, seed=3, separation=2.0, scale=0.1)
    for k in range(2):
        mean = ds.features[ds.labels == k].mean(axis=0)
        assert abs(np.linalg.norm(mean) - 2.0) < 0.01


def test_subsample_prefix_property():
    pool = data.gaussian_mixture(3, 2, 50, seed=0)
    small, big = data.subsample(pool, 10, seed=5), data.subsample(pool, 30, seed=5)
    np.testing.assert_array_equal(big.features[:10], small.features)
    with pytest.raises(ValueError):
        data.subsample(pool, 51, seed=5)


@settings(max_examples=30)
@given(st.integers(1, 40), st.integers(0, 2**32))
def test_supersample_rows_are_distinct(n, seed):
    pool = data.LabeledDataset(np.arange(80.0)[:, None], np.zeros(80, dtype=int), 1)
    ss = data.make_supersample(pool, n, seed)
    used = np.concatenate([ss.left_index, ss.right_index])
    assert len(np.unique(used)) == 2 * n
    np.testing.assert_array_equal(ss.left.features[:, 0], ss.left_index)


def test_supersample_prefix_is_nested():
    pool = data.gaussian_mixture(2, 2, 100, seed=0)
    ss = data.make_supersample(pool, 40, seed=2)
    p = ss.prefix(10)
    np.testing.assert_array_equal(p.right.features, ss.right.features[:10])
    np.testing.assert_array_equal(p.left_index, ss.left_index[:10])


@settings(max_examples=30)
@given(st.integers(1, 60), st.integers(0, 2**32))
def test_select_train_partitions_pairs(n, seed):
    left = np.arange(n, dtype=float)[:, None]
    ss = data.Supersample(
        data.LabeledDataset(left, np.zeros(n, dtype=int), 2),
        data.LabeledDataset(-left - 1, np.ones(n, dtype=int), 2),
    )
    u = data.draw_selector(n, seed)
    train, held = data.select_train(ss, u)
    bits = u.bits.astype(bool)
    np.testing.assert_array_equal(train.labels, bits.astype(int))
    np.testing.assert_array_equal(held.labels, 1 - bits.astype(int))
    np.testing.assert_array_equal(np.abs(train.features) + np.abs(held.features), 2 * left + 1)
    flipped_train, _ = data.select_train(ss, u.flipped())
    np.testing.assert_array_equal(flipped_train.features, held.features)


def test_selector_is_fair():
    bits = data.draw_selector(100_000, seed=0).bits
    assert set(np.unique(bits)) == {0, 1}
    assert abs(bits.mean() - 0.5) < 0.01


# ---- seeded streams ---------------------------------------------------------


def test_streams_are_keyed_by_purpose_and_index():
    a = stream(1, "batches").random(4)
    np.testing.assert_array_equal(a, stream(1, "batches").random(4))
    assert not np.array_equal(a, stream(1, "init-critic").random(4))
    assert not np.array_equal(stream(1, "x", 0).random(4), stream(1, "x", 1).random(4))
    assert derive_seed(3, "a") == derive_seed(3, "a")


def test_stream_rejects_out_of_range_seed():
    with pytest.raises(ValueError):
        stream(-1, "x")
    with pytest.raises(ValueError):
        stream(2**64, "x")
    stream(2**64 - 1, "x")
