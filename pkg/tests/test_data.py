import numpy as np
import pytest
from PIL import Image as PILImage

from mrcodec import data


def test_load_1x1_black(tmp_path):
    p = tmp_path / "black.png"
    PILImage.fromarray(np.zeros((1, 1, 3), np.uint8)).save(p)
    img = data.load_image(p)
    assert img.shape == (1, 1, 3)
    assert np.array_equal(img, [[[0, 0, 0]]])


def test_png_roundtrip_lossless(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    p = tmp_path / "x.png"
    data.save_image(img, p)
    assert np.array_equal(data.load_image(p), img)


def test_16bit_png_rejected(tmp_path):
    arr = (np.arange(16, dtype=np.uint16).reshape(4, 4) * 4096)
    p = tmp_path / "deep.png"
    PILImage.fromarray(arr, mode="I;16").save(p)
    with pytest.raises(data.ImageError, match="bit depth"):
        data.load_image(p)


def test_grayscale_converted_or_rejected(tmp_path):
    p = tmp_path / "gray.png"
    PILImage.fromarray(np.full((4, 4), 7, np.uint8), mode="L").save(p)
    img = data.load_image(p)
    assert img.shape == (4, 4, 3)
    with pytest.raises(data.ImageError, match="non-RGB"):
        data.load_image(p, convert_to_rgb=False)


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        data.load_image(tmp_path / "nope.png")


class TestRandomResizedCrop:
    def test_identity_range_returns_image(self):
        rng = np.random.default_rng(0)
        img = np.random.default_rng(2).integers(0, 256, (64, 64, 3), dtype=np.uint8)
        out = data.random_resized_crop(img, 64, rng, scale_range=(1.0, 1.0))
        assert np.array_equal(out, img)

    def test_deterministic_under_seed(self):
        img = np.random.default_rng(3).integers(0, 256, (128, 96, 3), dtype=np.uint8)
        a = data.random_resized_crop(img, 64, np.random.default_rng(7), (1.0, 1.5))
        b = data.random_resized_crop(img, 64, np.random.default_rng(7), (1.0, 1.5))
        assert np.array_equal(a, b)

    def test_shape_over_100_seeds(self):
        img = np.random.default_rng(4).integers(0, 256, (128, 256, 3), dtype=np.uint8)
        for seed in range(100):
            out = data.random_resized_crop(img, 64, np.random.default_rng(seed),
                                           scale_range=(0.5, 1.0))
            assert out.shape == (64, 64, 3)
            assert out.dtype == np.uint8

    def test_too_small_raises(self):
        img = np.zeros((32, 32, 3), np.uint8)
        with pytest.raises(data.ImageError, match="too small"):
            data.random_resized_crop(img, 64, np.random.default_rng(0), (0.5, 1.0))


class TestPadToMultiple:
    def test_already_multiple_unchanged(self):
        img = np.random.default_rng(5).integers(0, 256, (64, 64, 3), dtype=np.uint8)
        padded, dims = data.pad_to_multiple(img, 64)
        assert padded is img
        assert dims == (64, 64)

    def test_ceiling_arithmetic(self):
        img = np.zeros((65, 64, 3), np.uint8)
        padded, dims = data.pad_to_multiple(img, 64)
        assert padded.shape == (128, 64, 3)
        assert dims == (65, 64)

    def test_500x333(self):
        img = np.zeros((500, 333, 3), np.uint8)
        padded, _ = data.pad_to_multiple(img, 64)
        assert padded.shape == (512, 384, 3)

    def test_reflection_content(self):
        img = np.arange(12, dtype=np.uint8).reshape(2, 2, 3)
        padded, _ = data.pad_to_multiple(img, 3)
        # reflection: row 2 mirrors row 0
        assert np.array_equal(padded[2], padded[0])

    def test_crop_pad_unpad_identity(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            h = int(rng.integers(1, 200))
            w = int(rng.integers(1, 200))
            img = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
            m = int(rng.choice([16, 64]))
            padded, dims = data.pad_to_multiple(img, m)
            assert padded.shape[0] % m == 0 and padded.shape[1] % m == 0
            assert np.array_equal(data.unpad(padded, dims), img[:dims[0], :dims[1]])
            assert padded.min() >= 0 and padded.max() <= 255


def test_list_images_lexicographic(tmp_path):
    names = ["b.png", "a.png", "c.png", "notes.txt"]
    for n in names:
        if n.endswith(".png"):
            PILImage.fromarray(np.zeros((2, 2, 3), np.uint8)).save(tmp_path / n)
        else:
            (tmp_path / n).write_text("x")
    found = data.list_images(tmp_path)
    assert [p.name for p in found] == ["a.png", "b.png", "c.png"]


def test_dataset_batches_reproducible(tmp_path):
    rng = np.random.default_rng(8)
    for i in range(5):
        img = rng.integers(0, 256, (96, 96, 3), dtype=np.uint8)
        PILImage.fromarray(img).save(tmp_path / f"img_{i}.png")
    ds = data.CropDataset(tmp_path, side=32)
    a = ds.sample_batch(np.random.default_rng(42), 4)
    b = ds.sample_batch(np.random.default_rng(42), 4)
    assert np.array_equal(a, b)
    assert a.shape == (4, 32, 32, 3)
    assert a.dtype == np.uint8
