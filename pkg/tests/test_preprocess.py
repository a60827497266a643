import math

import numpy as np
import pytest

from leukopipe.errors import DataError, ParameterError
from leukopipe.preprocess import (
    AugmentSpec,
    Image,
    apply_augment,
    augment_balance,
    clahe,
    read_image,
    resize,
    sharpen,
    write_png,
)
from leukopipe.seeding import substream


def gray(arr) -> Image:
    return Image(np.asarray(arr, dtype=np.uint8)[:, :, None])


def clahe_reference(plane: np.ndarray, clip_limit: float, grid: tuple[int, int]) -> np.ndarray:
    """Independent per-pixel evaluation of the tile-equalization contract."""
    h, w = plane.shape
    gy, gx = min(grid[0], h), min(grid[1], w)
    th, tw = math.ceil(h / gy), math.ceil(w / gx)
    padded = np.pad(plane, ((0, gy * th - h), (0, gx * tw - w)), mode="symmetric")
    tile_pixels = th * tw
    limit = clip_limit * tile_pixels / 256.0
    luts = np.empty((gy, gx, 256))
    for ty in range(gy):
        for tx in range(gx):
            tile = padded[ty * th:(ty + 1) * th, tx * tw:(tx + 1) * tw]
            hist = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
            excess = np.maximum(hist - limit, 0.0).sum()
            hist = np.minimum(hist, limit) + excess / 256.0
            luts[ty, tx] = 255.0 * (np.cumsum(hist) / tile_pixels)

    def axis(i, tiles, size):
        pos = (i + 0.5) / size - 0.5
        lo = math.floor(pos)
        frac = pos - lo
        return (min(max(lo, 0), tiles - 1), min(max(lo + 1, 0), tiles - 1), frac)

    out = np.empty((h, w))
    for y in range(h):
        y0, y1, fy = axis(y, gy, th)
        for x in range(w):
            x0, x1, fx = axis(x, gx, tw)
            v = int(plane[y, x])
            top = (1.0 - fx) * luts[y0, x0, v] + fx * luts[y0, x1, v]
            bot = (1.0 - fx) * luts[y1, x0, v] + fx * luts[y1, x1, v]
            out[y, x] = (1.0 - fy) * top + fy * bot
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


class TestClahe:
    def test_constant_image_unchanged_shape_and_constant(self):
        out = clahe(gray(np.full((16, 16), 90)))
        assert out.pixels.shape == (16, 16, 1)
        assert len(np.unique(out.pixels)) == 1

    def test_two_level_image_keeps_extremes(self):
        plane = np.zeros((8, 8), dtype=np.uint8)
        plane[:, 4:] = 255
        out = clahe(gray(plane), clip_limit=2.0, tiles=(2, 2))
        result = out.pixels[:, :, 0]
        assert (result[:, 4:] == 255).all()
        assert (result[:, :4] < 128).all()
        np.testing.assert_array_equal(result, clahe_reference(plane, 2.0, (2, 2)))

    def test_matches_reference_on_noise(self):
        rng = np.random.default_rng(0)
        plane = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        out = clahe(gray(plane), clip_limit=3.0, tiles=(4, 4))
        np.testing.assert_array_equal(out.pixels[:, :, 0], clahe_reference(plane, 3.0, (4, 4)))

    def test_matches_reference_with_padding(self):
        rng = np.random.default_rng(1)
        plane = rng.integers(0, 256, size=(10, 14), dtype=np.uint8)
        out = clahe(gray(plane), clip_limit=2.0, tiles=(3, 4))
        assert out.pixels.shape == (10, 14, 1)
        np.testing.assert_array_equal(out.pixels[:, :, 0], clahe_reference(plane, 2.0, (3, 4)))

    def test_output_range_and_extents_on_noise(self):
        rng = np.random.default_rng(2)
        img = Image(rng.integers(0, 256, size=(20, 24, 3), dtype=np.uint8))
        out = clahe(img)
        assert out.pixels.shape == img.pixels.shape
        assert out.pixels.dtype == np.uint8

    def test_color_chroma_untouched_for_gray_rgb(self):
        # an achromatic RGB image stays (near-)achromatic after luma equalization
        rng = np.random.default_rng(3)
        plane = rng.integers(0, 256, size=(12, 12), dtype=np.uint8)
        img = Image(np.repeat(plane[:, :, None], 3, axis=2))
        out = clahe(img)
        spread = out.pixels.astype(int).max(axis=2) - out.pixels.astype(int).min(axis=2)
        assert spread.max() <= 1  # rounding of the inverse transform only

    def test_bad_clip_limit(self):
        with pytest.raises(ParameterError):
            clahe(gray(np.zeros((4, 4))), clip_limit=0.0)


class TestSharpen:
    def test_constant_image_unchanged(self):
        img = gray(np.full((7, 9), 123))
        np.testing.assert_array_equal(sharpen(img).pixels, img.pixels)

    def test_bright_center_pixel(self):
        plane = np.zeros((5, 5), dtype=np.uint8)
        plane[2, 2] = 255
        out = sharpen(gray(plane)).pixels[:, :, 0]
        expected = np.zeros((5, 5), dtype=np.uint8)
        expected[2, 2] = 255  # 5*255 clamps back down
        np.testing.assert_array_equal(out, expected)

    def test_preserves_extents_and_channels(self):
        rng = np.random.default_rng(4)
        img = Image(rng.integers(0, 256, size=(6, 8, 3), dtype=np.uint8))
        out = sharpen(img)
        assert out.pixels.shape == img.pixels.shape

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        img = gray(rng.integers(0, 256, size=(9, 9), dtype=np.uint8))
        np.testing.assert_array_equal(sharpen(img).pixels, sharpen(img).pixels)


class TestResize:
    def test_same_extents_identity(self):
        rng = np.random.default_rng(6)
        img = gray(rng.integers(0, 256, size=(5, 7), dtype=np.uint8))
        np.testing.assert_array_equal(resize(img, (5, 7)).pixels, img.pixels)

    def test_upscale_constant(self):
        out = resize(gray(np.full((3, 3), 42)), (6, 6))
        np.testing.assert_array_equal(out.pixels, np.full((6, 6, 1), 42))

    def test_checkerboard_bilinear_values(self):
        img = gray([[0, 255], [255, 0]])
        out = resize(img, (4, 4)).pixels[:, :, 0]
        expected = np.array([
            [0, 85, 170, 255],
            [85, 113, 142, 170],
            [170, 142, 113, 85],
            [255, 170, 85, 0],
        ], dtype=np.uint8)
        np.testing.assert_array_equal(out, expected)

    def test_zero_target_rejected(self):
        with pytest.raises(ParameterError):
            resize(gray(np.zeros((2, 2))), (0, 3))


class TestAugment:
    def test_horizontal_flip_involution(self):
        rng = np.random.default_rng(7)
        img = Image(rng.integers(0, 256, size=(8, 6, 3), dtype=np.uint8))
        spec = AugmentSpec(flip_h=True)
        np.testing.assert_array_equal(
            apply_augment(apply_augment(img, spec), spec).pixels, img.pixels)

    def test_augment_keeps_target_extents(self):
        rng = np.random.default_rng(8)
        img = gray(rng.integers(0, 256, size=(10, 10), dtype=np.uint8))
        for seed in range(10):
            spec = AugmentSpec.random(substream(seed, "a"), (10, 10))
            out = apply_augment(img, spec)
            assert (out.height, out.width) == (10, 10)

    def test_bad_spec_rejected(self):
        with pytest.raises(ParameterError):
            AugmentSpec(rotation_degrees=45)
        with pytest.raises(ParameterError):
            AugmentSpec(scale=1.5)

    def test_balance_counts_and_retention(self):
        rng = np.random.default_rng(9)
        imgs = [gray(rng.integers(0, 256, size=(6, 6), dtype=np.uint8)) for _ in range(8)]
        dataset = [(img, 0) for img in imgs[:5]] + [(img, 1) for img in imgs[5:]]
        out = augment_balance(dataset, seed=11)
        assert sum(1 for _, lab in out if lab == 0) == 5
        assert sum(1 for _, lab in out if lab == 1) == 5
        assert out[:8] == dataset  # originals retained, in order

    def test_balanced_input_unchanged(self):
        rng = np.random.default_rng(10)
        imgs = [gray(rng.integers(0, 256, size=(4, 4), dtype=np.uint8)) for _ in range(4)]
        dataset = [(imgs[0], 0), (imgs[1], 1), (imgs[2], 0), (imgs[3], 1)]
        assert augment_balance(dataset, seed=0) == dataset

    def test_same_seed_same_output(self):
        rng = np.random.default_rng(11)
        imgs = [gray(rng.integers(0, 256, size=(6, 6), dtype=np.uint8)) for _ in range(6)]
        dataset = [(img, 0) for img in imgs[:4]] + [(img, 1) for img in imgs[4:]]
        a = augment_balance(dataset, seed=5)
        b = augment_balance(dataset, seed=5)
        assert len(a) == len(b) == 8
        for (ia, la), (ib, lb) in zip(a, b):
            assert la == lb
            np.testing.assert_array_equal(ia.pixels, ib.pixels)

    def test_missing_class_rejected(self):
        img = gray(np.zeros((4, 4)))
        with pytest.raises(DataError):
            augment_balance([(img, 1), (img, 1)], seed=0)


class TestImageIO:
    def test_png_round_trip_gray(self, tmp_path):
        rng = np.random.default_rng(12)
        img = gray(rng.integers(0, 256, size=(9, 5), dtype=np.uint8))
        write_png(tmp_path / "g.png", img)
        np.testing.assert_array_equal(read_image(tmp_path / "g.png").pixels, img.pixels)

    def test_png_round_trip_rgb(self, tmp_path):
        rng = np.random.default_rng(13)
        img = Image(rng.integers(0, 256, size=(4, 6, 3), dtype=np.uint8))
        write_png(tmp_path / "c.png", img)
        np.testing.assert_array_equal(read_image(tmp_path / "c.png").pixels, img.pixels)

    def test_ppm_p6_read(self, tmp_path):
        rng = np.random.default_rng(14)
        pixels = rng.integers(0, 256, size=(3, 4, 3), dtype=np.uint8)
        raw = b"P6\n4 3\n255\n" + pixels.tobytes()
        (tmp_path / "img.ppm").write_bytes(raw)
        np.testing.assert_array_equal(read_image(tmp_path / "img.ppm").pixels, pixels)

    def test_unreadable_file_rejected(self, tmp_path):
        (tmp_path / "junk.png").write_bytes(b"not an image")
        with pytest.raises(DataError, match="junk.png"):
            read_image(tmp_path / "junk.png")
