"""
Binary mask primitives.

A mask is a 2-D ``numpy`` boolean array of shape ``(height, width)``.
Everything here treats masks as values: no function mutates its inputs.

RLE is row-major (C order), which differs from COCO's column-major RLE.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage


class MaskShapeError(ValueError):
    """Raised when masks that must share dimensions do not."""


class RleError(ValueError):
    """Raised when run-length counts violate the codec invariants."""


def as_mask(m) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2:
        raise MaskShapeError(f"mask must be 2-D, got shape {m.shape}")
    return m.astype(bool, copy=False)


def empty_mask(height: int, width: int) -> np.ndarray:
    return np.zeros((height, width), dtype=bool)


def _check_pair(a, b):
    a, b = as_mask(a), as_mask(b)
    if a.shape != b.shape:
        raise MaskShapeError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a, b


def area(m) -> int:
    return int(np.count_nonzero(m))


def iou(a, b) -> float:
    """Intersection over union; two empty masks score 1.0."""
    a, b = _check_pair(a, b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def mask_and(a, b) -> np.ndarray:
    a, b = _check_pair(a, b)
    return a & b


def mask_or(a, b) -> np.ndarray:
    a, b = _check_pair(a, b)
    return a | b


def mask_diff(a, b) -> np.ndarray:
    """Pixels of ``a`` not in ``b``."""
    a, b = _check_pair(a, b)
    return a & ~b


@dataclass(frozen=True)
class RleMask:
    height: int
    width: int
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        validate_counts(self.counts, self.height, self.width)

    @property
    def size(self) -> tuple[int, int]:
        return self.height, self.width

    def to_dict(self) -> dict:
        return {"size": [self.height, self.width], "counts": list(self.counts)}

    @classmethod
    def from_dict(cls, d: dict) -> "RleMask":
        try:
            h, w = d["size"]
            counts = d["counts"]
        except (KeyError, TypeError, ValueError) as e:
            raise RleError(f"malformed RLE object: {e}") from None
        if not isinstance(counts, (list, tuple)):
            raise RleError("RLE counts must be a list of integers")
        return cls(int(h), int(w), tuple(counts))


def validate_counts(counts: Sequence[int], height: int, width: int) -> None:
    if height < 0 or width < 0:
        raise RleError(f"negative RLE size ({height}, {width})")
    if len(counts) == 0:
        raise RleError("RLE counts are empty")
    if any(c < 0 for c in counts):
        raise RleError("RLE counts must be non-negative")
    if any(c == 0 for c in counts[1:]):
        raise RleError("only the leading RLE run may have zero length")
    total = sum(counts)
    if total != height * width:
        raise RleError(f"RLE counts sum to {total}, expected {height * width}")


def rle_encode(m) -> RleMask:
    m = as_mask(m)
    h, w = m.shape
    flat = m.ravel()
    if flat.size == 0:
        return RleMask(h, w, (0,))
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(edges)
    if flat[0]:
        runs = np.concatenate(([0], runs))
    return RleMask(h, w, tuple(runs.tolist()))


def rle_decode(r: RleMask) -> np.ndarray:
    counts = np.asarray(r.counts, dtype=np.int64)
    values = (np.arange(counts.size) % 2).astype(bool)
    return np.repeat(values, counts).reshape(r.height, r.width)


class BoundingBox(NamedTuple):
    """Pixel box; the max edges are exclusive."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    @property
    def is_empty(self) -> bool:
        return self.x_max <= self.x_min or self.y_max <= self.y_min

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    def expand(self, pad: int, height: int, width: int) -> "BoundingBox":
        """Grow by ``pad`` on every side, clipped to a ``height`` x ``width`` canvas."""
        if self.is_empty:
            return self
        return BoundingBox(
            max(self.x_min - pad, 0),
            max(self.y_min - pad, 0),
            min(self.x_max + pad, width),
            min(self.y_max + pad, height),
        )

    def union(self, other: "BoundingBox") -> "BoundingBox":
        if self.is_empty:
            return other
        if other.is_empty:
            return self
        return BoundingBox(
            min(self.x_min, other.x_min),
            min(self.y_min, other.y_min),
            max(self.x_max, other.x_max),
            max(self.y_max, other.y_max),
        )

    def slices(self) -> tuple[slice, slice]:
        return slice(self.y_min, self.y_max), slice(self.x_min, self.x_max)


EMPTY_BOX = BoundingBox(0, 0, 0, 0)


def tight_bbox(m) -> BoundingBox:
    m = as_mask(m)
    rows = np.flatnonzero(m.any(axis=1))
    if rows.size == 0:
        return EMPTY_BOX
    cols = np.flatnonzero(m.any(axis=0))
    return BoundingBox(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def label_components(m, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Integer label image (0 = background) and the number of components."""
    if connectivity not in _STRUCTURES:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, n = ndimage.label(as_mask(m), structure=_STRUCTURES[connectivity])
    return labels, int(n)


def connected_components(m, connectivity: int = 8) -> list[np.ndarray]:
    """Split a mask into its maximal connected regions, in raster order of first pixel."""
    labels, n = label_components(m, connectivity)
    return [labels == k for k in range(1, n + 1)]


def remove_small_components(m, min_area: int, connectivity: int = 8) -> np.ndarray:
    labels, n = label_components(m, connectivity)
    if n == 0:
        return np.zeros_like(labels, dtype=bool)
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    keep = sizes >= min_area
    keep[0] = False
    return keep[labels]
