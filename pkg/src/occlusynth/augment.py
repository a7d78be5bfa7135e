"""
Colour/geometric augmentation of instance images and soft-matte pasting.

Default ranges: S/V multipliers in [0.5, 2.0], affine scale in [0.5, 1.0],
translation in [-16, 16] px, rotation in [-180, 180] deg, shear in
[-16, 16] deg, blending sigma in [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import ndimage

from .ingest import InstanceImage


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFF_FFFF_FFFF_FFFF))


@dataclass(frozen=True)
class AugmentRanges:
    hsv_s_scale: tuple[float, float] = (0.5, 2.0)
    hsv_v_scale: tuple[float, float] = (0.5, 2.0)
    affine_scale: tuple[float, float] = (0.5, 1.0)
    translate_x: tuple[float, float] = (-16.0, 16.0)
    translate_y: tuple[float, float] = (-16.0, 16.0)
    rotate: tuple[float, float] = (-180.0, 180.0)
    shear: tuple[float, float] = (-16.0, 16.0)
    blend_sigma: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        for f in fields(self):
            lo, hi = getattr(self, f.name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ValueError(f"{f.name}: empty or invalid range ({lo}, {hi})")
            object.__setattr__(self, f.name, (float(lo), float(hi)))

    @classmethod
    def from_dict(cls, d: dict | None) -> "AugmentRanges":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown augmentation fields: {sorted(unknown)}")
        return cls(**{k: tuple(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in asdict(self).items()}


DEFAULT_RANGES = AugmentRanges()


@dataclass(frozen=True)
class AugmentParams:
    hsv_s_scale: float = 1.0
    hsv_v_scale: float = 1.0
    affine_scale: float = 1.0
    translate_x: float = 0.0
    translate_y: float = 0.0
    rotate: float = 0.0
    shear: float = 0.0
    blend_sigma: float = 0.0

    def within(self, ranges: AugmentRanges = DEFAULT_RANGES) -> bool:
        return all(
            getattr(ranges, f.name)[0] <= getattr(self, f.name) <= getattr(ranges, f.name)[1]
            for f in fields(self)
        )


IDENTITY = AugmentParams()


def sample_params(rng: np.random.Generator, ranges: AugmentRanges = DEFAULT_RANGES) -> AugmentParams:
    """Draw every field independently and uniformly from its closed interval."""
    values = {}
    for f in fields(AugmentParams):
        lo, hi = getattr(ranges, f.name)
        values[f.name] = lo if lo == hi else float(rng.uniform(lo, hi))
    return AugmentParams(**values)


# -- colour -----------------------------------------------------------------

def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Hexcone model. H in [0, 6), S and V in [0, 255]; float64 output."""
    rgb = rgb.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    safe_c = np.where(c > 0, c, 1.0)
    h = np.where(
        v == r, ((g - b) / safe_c) % 6.0,
        np.where(v == g, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
    )
    h = np.where(c > 0, h, 0.0)
    s = np.where(v > 0, 255.0 * c / np.where(v > 0, v, 1.0), 0.0)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    c = v * s / 255.0
    x = c * (1.0 - np.abs(h % 2.0 - 1.0))
    m = v - c
    sector = np.floor(h).astype(np.int64) % 6
    zeros = np.zeros_like(c)
    # rows: (r, g, b) contributions for sectors 0..5
    table_r = np.stack([c, x, zeros, zeros, x, c])
    table_g = np.stack([x, c, c, x, zeros, zeros])
    table_b = np.stack([zeros, zeros, x, c, c, x])
    idx = sector[None]
    r = np.take_along_axis(table_r, idx, 0)[0] + m
    g = np.take_along_axis(table_g, idx, 0)[0] + m
    b = np.take_along_axis(table_b, idx, 0)[0] + m
    return np.stack([r, g, b], axis=-1)


def apply_hsv(pixels: np.ndarray, s_scale: float, v_scale: float) -> np.ndarray:
    """Multiply saturation and value, clamped to [0, 255]; hue is untouched."""
    hsv = rgb_to_hsv(pixels)
    hsv[..., 1] = np.clip(hsv[..., 1] * s_scale, 0.0, 255.0)
    hsv[..., 2] = np.clip(hsv[..., 2] * v_scale, 0.0, 255.0)
    return np.clip(np.rint(hsv_to_rgb(hsv)), 0, 255).astype(np.uint8)


# -- geometry ---------------------------------------------------------------

def linear_part(params: AugmentParams) -> np.ndarray:
    """2x2 (x, y) matrix: scale, then shear, then rotation."""
    s = params.affine_scale
    sh = math.tan(math.radians(params.shear))
    th = math.radians(params.rotate)
    cos, sin = math.cos(th), math.sin(th)
    rot = np.array([[cos, -sin], [sin, cos]])
    shear = np.array([[1.0, sh], [0.0, 1.0]])
    return rot @ shear @ (s * np.eye(2))


def fit_size(shape: tuple[int, int], params: AugmentParams) -> tuple[int, int]:
    """Output (height, width) large enough to hold the whole warped image."""
    h, w = shape
    a = linear_part(params)
    corners = np.array([[-(w - 1) / 2, (w - 1) / 2, (w - 1) / 2, -(w - 1) / 2],
                        [-(h - 1) / 2, -(h - 1) / 2, (h - 1) / 2, (h - 1) / 2]])
    ext = np.abs(a @ corners).max(axis=1)
    out_w = 2 * math.ceil(ext[0] + abs(params.translate_x)) + 3
    out_h = 2 * math.ceil(ext[1] + abs(params.translate_y)) + 3
    return out_h, out_w


def _inverse_map(src_shape, out_shape, params):
    """Matrix and offset for ndimage.affine_transform in (row, col) order."""
    a_inv = np.linalg.inv(linear_part(params))
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    m = swap @ a_inv @ swap
    c_src = np.array([(src_shape[0] - 1) / 2, (src_shape[1] - 1) / 2])
    c_dst = np.array([(out_shape[0] - 1) / 2, (out_shape[1] - 1) / 2])
    t = np.array([params.translate_y, params.translate_x])
    return m, c_src - m @ (c_dst + t)


def apply_affine(img: InstanceImage, params: AugmentParams,
                 out_size: tuple[int, int] | None = None) -> InstanceImage:
    """
    Warp pixels (bilinear) and foreground (nearest) with the same transform
    about the image centre. ``out_size`` is (height, width); by default it is
    chosen so nothing is clipped. Samples from outside the source are black
    and background.
    """
    if out_size is None:
        out_size = fit_size(img.shape, params)
    out_size = (int(out_size[0]), int(out_size[1]))
    if out_size[0] <= 0 or out_size[1] <= 0:
        raise ValueError(f"out_size must be positive, got {out_size}")
    m, off = _inverse_map(img.shape, out_size, params)
    mask = ndimage.affine_transform(
        img.foreground.astype(np.uint8), m, off, output_shape=out_size,
        order=0, mode="constant", cval=0,
    ) > 0
    pixels = np.empty(out_size + (3,), dtype=np.uint8)
    for ch in range(3):
        warped = ndimage.affine_transform(
            img.pixels[..., ch].astype(np.float32), m, off, output_shape=out_size,
            order=1, mode="constant", cval=0.0, prefilter=False,
        )
        pixels[..., ch] = np.clip(np.rint(warped), 0, 255)
    return InstanceImage(img.object_class, img.view_id, pixels, mask)


def augment_instance(img: InstanceImage, params: AugmentParams,
                     out_size: tuple[int, int] | None = None) -> InstanceImage:
    recoloured = InstanceImage(
        img.object_class, img.view_id,
        apply_hsv(img.pixels, params.hsv_s_scale, params.hsv_v_scale), img.foreground,
    )
    return apply_affine(recoloured, params, out_size)


# -- blending ---------------------------------------------------------------

def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled Gaussian of radius ceil(3 sigma), normalised to sum 1."""
    if sigma <= 0:
        return np.ones(1)
    r = math.ceil(3 * sigma)
    x = np.arange(-r, r + 1, dtype=np.float64)
    with np.errstate(over="ignore"):
        k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def soft_matte(mask: np.ndarray, sigma: float) -> tuple[np.ndarray, int]:
    """Blurred alpha of ``mask`` padded by the kernel radius; returns (alpha, radius)."""
    k = gaussian_kernel(sigma)
    r = (k.size - 1) // 2
    alpha = np.pad(mask.astype(np.float64), r)
    if r:
        alpha = ndimage.correlate1d(alpha, k, axis=0, mode="constant")
        alpha = ndimage.correlate1d(alpha, k, axis=1, mode="constant")
    return alpha, r


def blend_paste(canvas: np.ndarray, instance: InstanceImage, position: tuple[int, int],
                sigma: float) -> np.ndarray:
    """
    Paste ``instance`` with its top-left corner at ``position`` = (x, y).

    The binary foreground is blurred into a soft matte and the result is
    ``alpha * instance + (1 - alpha) * canvas``; ``sigma == 0`` is a hard paste.
    Returns a new canvas.
    """
    out = canvas.copy()
    blend_into(out, instance, position, sigma)
    return out


def blend_into(canvas: np.ndarray, instance: InstanceImage, position: tuple[int, int],
               sigma: float) -> None:
    """In-place variant of :func:`blend_paste`."""
    alpha, r = soft_matte(instance.foreground, sigma)
    x0, y0 = int(position[0]) - r, int(position[1]) - r
    H, W = canvas.shape[:2]
    h, w = alpha.shape
    cx0, cy0 = max(x0, 0), max(y0, 0)
    cx1, cy1 = min(x0 + w, W), min(y0 + h, H)
    if cx0 >= cx1 or cy0 >= cy1:
        return
    sl_src = (slice(cy0 - y0, cy1 - y0), slice(cx0 - x0, cx1 - x0))
    a = alpha[sl_src]
    rows, cols = np.nonzero(a > 0)
    if rows.size == 0:
        return
    src = np.pad(instance.pixels, ((r, r), (r, r), (0, 0))) if r else instance.pixels
    # restrict the arithmetic to the matte's support
    ys, xs = slice(rows.min(), rows.max() + 1), slice(cols.min(), cols.max() + 1)
    a = a[ys, xs][..., None]
    fg = src[sl_src][ys, xs].astype(np.float64)
    dst = canvas[cy0:cy1, cx0:cx1][ys, xs]
    dst[...] = np.clip(np.rint(a * fg + (1.0 - a) * dst), 0, 255).astype(np.uint8)
