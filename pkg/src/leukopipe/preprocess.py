"""Image enhancement, resizing, and class-balancing augmentation.

Enhancement is tile-based contrast-limited histogram equalization followed
by an edge-emphasizing sharpen. Class balance is restored by replicating
minority-class images under randomly parameterized geometric transforms.
All randomness is drawn from substreams of an explicit root seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import DataError, ParameterError
from .seeding import substream

SHARPEN_KERNEL = np.array([[0, -1, 0], [-1, 5, -1], [0, -1, 0]], dtype=np.float64)


@dataclass(frozen=True)
class Image:
    """8-bit image, ``pixels`` shaped (height, width, channels in {1, 3})."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise DataError(f"image pixels must be (h, w, 1|3), got {px.shape}")
        if px.dtype != np.uint8:
            raise DataError(f"image pixels must be uint8, got {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise DataError(f"image extents must be positive, got {px.shape}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


# ---------------------------------------------------------------------------
# contrast-limited adaptive histogram equalization


def _clahe_luts(plane: np.ndarray, clip_limit: float, grid: tuple[int, int]):
    """Per-tile equalization mappings as float lookup tables (gy, gx, 256)."""
    h, w = plane.shape
    gy, gx = min(grid[0], h), min(grid[1], w)
    th, tw = math.ceil(h / gy), math.ceil(w / gx)
    padded = np.pad(plane, ((0, gy * th - h), (0, gx * tw - w)), mode="symmetric")
    tile_pixels = th * tw
    limit = clip_limit * tile_pixels / 256.0
    luts = np.empty((gy, gx, 256), dtype=np.float64)
    for ty in range(gy):
        for tx in range(gx):
            tile = padded[ty * th:(ty + 1) * th, tx * tw:(tx + 1) * tw]
            hist = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
            excess = np.maximum(hist - limit, 0.0).sum()
            hist = np.minimum(hist, limit) + excess / 256.0
            cdf = np.cumsum(hist) / tile_pixels
            luts[ty, tx] = 255.0 * cdf
    return luts, gy, gx, th, tw


def _interp_axis(n: int, tiles: int, tile_size: int):
    """Bilinear interpolation coordinates between tile centers along one axis."""
    pos = (np.arange(n) + 0.5) / tile_size - 0.5
    lo = np.floor(pos)
    frac = pos - lo
    t0 = np.clip(lo, 0, tiles - 1).astype(np.intp)
    t1 = np.clip(lo + 1, 0, tiles - 1).astype(np.intp)
    return t0, t1, frac


def _clahe_plane(plane: np.ndarray, clip_limit: float, grid: tuple[int, int]) -> np.ndarray:
    luts, gy, gx, th, tw = _clahe_luts(plane, clip_limit, grid)
    h, w = plane.shape
    y0, y1, fy = _interp_axis(h, gy, th)
    x0, x1, fx = _interp_axis(w, gx, tw)
    v = plane.astype(np.intp)
    top = (1.0 - fx)[None, :] * luts[y0[:, None], x0[None, :], v] \
        + fx[None, :] * luts[y0[:, None], x1[None, :], v]
    bot = (1.0 - fx)[None, :] * luts[y1[:, None], x0[None, :], v] \
        + fx[None, :] * luts[y1[:, None], x1[None, :], v]
    out = (1.0 - fy)[:, None] * top + fy[:, None] * bot
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _rgb_to_ycbcr(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return y, cb, cr


def _ycbcr_to_rgb(y: np.ndarray, cb: np.ndarray, cr: np.ndarray) -> np.ndarray:
    r = y + 1.402 * (cr - 128.0)
    g = y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0)
    b = y + 1.772 * (cb - 128.0)
    return np.stack([r, g, b], axis=-1)


def clahe(image: Image, clip_limit: float = 2.0, tiles: tuple[int, int] = (8, 8)) -> Image:
    """Tile-wise histogram equalization with clipped histograms.

    Per-bin counts are capped at ``clip_limit * tile_pixels / 256`` and the
    excess is redistributed uniformly; mappings of neighboring tiles are
    blended bilinearly. Color images are equalized on the ITU-R 601 luma
    with chroma left untouched. Grids that do not divide the image are
    handled by reflect-padding the tiles (grid clamped to the extents).
    """
    if clip_limit <= 0:
        raise ParameterError(f"clahe clip_limit must be positive, got {clip_limit}")
    if tiles[0] < 1 or tiles[1] < 1:
        raise ParameterError(f"clahe tile grid must be >= 1x1, got {tiles}")
    if image.channels == 1:
        return Image(_clahe_plane(image.pixels[:, :, 0], clip_limit, tiles)[:, :, None])
    y, cb, cr = _rgb_to_ycbcr(image.pixels.astype(np.float64))
    y8 = np.clip(np.rint(y), 0, 255).astype(np.uint8)
    y_eq = _clahe_plane(y8, clip_limit, tiles).astype(np.float64)
    rgb = _ycbcr_to_rgb(y_eq, cb, cr)
    return Image(np.clip(np.rint(rgb), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# sharpening and resizing


def sharpen(image: Image) -> Image:
    """Apply the 5-center sharpen kernel with edge-repeating reflection.

    Results are clamped to [0, 255]; the kernel sums to one, so constant
    images pass through unchanged.
    """
    px = image.pixels.astype(np.float64)
    padded = np.pad(px, ((1, 1), (1, 1), (0, 0)), mode="symmetric")
    out = np.zeros_like(px)
    for dy in range(3):
        for dx in range(3):
            k = SHARPEN_KERNEL[dy, dx]
            if k != 0.0:
                out += k * padded[dy:dy + image.height, dx:dx + image.width]
    return Image(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def resize(image: Image, target: tuple[int, int]) -> Image:
    """Bilinear resize to ``target`` (height, width); corners map to corners.

    Aspect ratio is not preserved; that is the caller's concern.
    """
    th, tw = target
    if th < 1 or tw < 1:
        raise ParameterError(f"resize target extents must be >= 1, got {target}")
    h, w = image.height, image.width
    ys = np.arange(th) * ((h - 1) / (th - 1)) if th > 1 else np.full(1, (h - 1) / 2.0)
    xs = np.arange(tw) * ((w - 1) / (tw - 1)) if tw > 1 else np.full(1, (w - 1) / 2.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    px = image.pixels.astype(np.float64)
    out = ((1 - wy) * (1 - wx) * px[y0[:, None], x0[None, :]]
           + (1 - wy) * wx * px[y0[:, None], x1[None, :]]
           + wy * (1 - wx) * px[y1[:, None], x0[None, :]]
           + wy * wx * px[y1[:, None], x1[None, :]])
    return Image(np.clip(np.rint(out), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# augmentation


@dataclass(frozen=True)
class AugmentSpec:
    """Parameters of one geometric augmentation draw."""

    flip_h: bool = False
    flip_v: bool = False
    rotation_degrees: int = 0
    scale: float = 1.0
    translate: tuple[int, int] = (0, 0)
    crop: tuple[int, int] = (0, 0)  # target extents; (0, 0) means keep

    def __post_init__(self):
        if self.rotation_degrees not in (0, 90, 180, 270):
            raise ParameterError(f"rotation must be in {{0, 90, 180, 270}}, "
                                 f"got {self.rotation_degrees}")
        if not 0.8 <= self.scale <= 1.2:
            raise ParameterError(f"scale must be in [0.8, 1.2], got {self.scale}")

    @staticmethod
    def random(rng: np.random.Generator, extents: tuple[int, int]) -> "AugmentSpec":
        h, w = extents
        max_dy = max(1, round(0.1 * h))
        max_dx = max(1, round(0.1 * w))
        return AugmentSpec(
            flip_h=bool(rng.random() < 0.5),
            flip_v=bool(rng.random() < 0.5),
            rotation_degrees=int(rng.choice([0, 90, 180, 270])),
            scale=float(rng.uniform(0.8, 1.2)),
            translate=(int(rng.integers(-max_dy, max_dy + 1)),
                       int(rng.integers(-max_dx, max_dx + 1))),
            crop=(h, w),
        )


def _crop_or_pad(px: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    th, tw = target
    h, w = px.shape[:2]
    if h > th:
        off = (h - th) // 2
        px = px[off:off + th]
    elif h < th:
        lo = (th - h) // 2
        px = np.pad(px, ((lo, th - h - lo), (0, 0), (0, 0)), mode="symmetric")
    if w > tw:
        off = (w - tw) // 2
        px = px[:, off:off + tw]
    elif w < tw:
        lo = (tw - w) // 2
        px = np.pad(px, ((0, 0), (lo, tw - w - lo), (0, 0)), mode="symmetric")
    return px


def apply_augment(image: Image, spec: AugmentSpec) -> Image:
    """Rotate, flip, rescale, cyclically translate, then crop/pad to target."""
    px = image.pixels
    if spec.rotation_degrees:
        px = np.rot90(px, k=spec.rotation_degrees // 90, axes=(0, 1))
    if spec.flip_h:
        px = px[:, ::-1]
    if spec.flip_v:
        px = px[::-1]
    if spec.scale != 1.0:
        sh = max(1, round(px.shape[0] * spec.scale))
        sw = max(1, round(px.shape[1] * spec.scale))
        px = resize(Image(np.ascontiguousarray(px)), (sh, sw)).pixels
    dy, dx = spec.translate
    if dy or dx:
        px = np.roll(px, shift=(dy, dx), axis=(0, 1))
    target = spec.crop if spec.crop != (0, 0) else (image.height, image.width)
    px = _crop_or_pad(px, target)
    return Image(np.ascontiguousarray(px))


def augment_balance(dataset: list[tuple[Image, int]], seed: int) -> list[tuple[Image, int]]:
    """Equalize class counts by augmenting the minority class.

    Originals are always retained; synthetic samples are appended in draw
    order. Each synthetic sample consumes the substream
    ``(seed, "augment", index)``, so output is reproducible and independent
    of evaluation order.
    """
    labels = {lab for _, lab in dataset}
    if not labels <= {0, 1}:
        raise DataError(f"labels must be 0/1, got {sorted(labels)}")
    count0 = sum(1 for _, lab in dataset if lab == 0)
    count1 = len(dataset) - count0
    if count0 == 0 or count1 == 0:
        raise DataError(f"both classes need samples, got counts ({count0}, {count1})")
    if count0 == count1:
        return list(dataset)
    minority = 0 if count0 < count1 else 1
    pool = [img for img, lab in dataset if lab == minority]
    deficit = abs(count0 - count1)
    out = list(dataset)
    for i in range(deficit):
        rng = substream(seed, "augment", i)
        src = pool[int(rng.integers(len(pool)))]
        spec = AugmentSpec.random(rng, (src.height, src.width))
        out.append((apply_augment(src, spec), minority))
    return out


# ---------------------------------------------------------------------------
# file IO (PNG and binary PPM via Pillow)


def read_image(path: str | Path) -> Image:
    """Decode a PNG or binary PPM file into an :class:`Image`."""
    try:
        with PILImage.open(path) as pil:
            if pil.mode == "L":
                arr = np.asarray(pil, dtype=np.uint8)[:, :, None]
            else:
                arr = np.asarray(pil.convert("RGB"), dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    return Image(np.ascontiguousarray(arr))


def write_png(path: str | Path, image: Image) -> None:
    if image.channels == 1:
        pil = PILImage.fromarray(image.pixels[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(image.pixels, mode="RGB")
    pil.save(path, format="PNG")
