"""Distance-based segmentation metrics over grid boundaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .core import Excluded, LabelMap


@dataclass
class BoundarySet:
    """Boundary pixels of a mask: grid indices plus physical coordinates."""

    indices: np.ndarray            # (n, ndim) integer grid coordinates
    spacing: tuple[float, ...]
    source_shape: tuple[int, ...] | None = None

    def __post_init__(self):
        self.indices = np.atleast_2d(np.asarray(self.indices))
        self.spacing = tuple(float(s) for s in self.spacing)

    def __len__(self) -> int:
        return 0 if self.indices.size == 0 else self.indices.shape[0]

    @property
    def points(self) -> np.ndarray:
        """Boundary coordinates in physical units."""
        if len(self) == 0:
            return np.zeros((0, len(self.spacing)))
        return self.indices * np.asarray(self.spacing)

    @classmethod
    def from_points(cls, points, spacing=None) -> "BoundarySet":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if spacing is None:
            spacing = (1.0,) * points.shape[1]
        return cls(points, tuple(spacing))


def _as_mask(mask: "LabelMap | np.ndarray", class_index: int):
    if isinstance(mask, LabelMap):
        return mask.mask(class_index), mask.spacing
    arr = np.asarray(mask, dtype=bool)
    return arr, (1.0,) * arr.ndim


def boundary_mask(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with a face-adjacent background or out-of-grid neighbor."""
    mask = np.asarray(mask, dtype=bool)
    interior = np.ones_like(mask)
    for axis in range(mask.ndim):
        lo = np.roll(mask, 1, axis=axis)
        hi = np.roll(mask, -1, axis=axis)
        # rolled-over edges look outside the grid, which counts as background
        idx_lo = [slice(None)] * mask.ndim
        idx_lo[axis] = 0
        lo[tuple(idx_lo)] = False
        idx_hi = [slice(None)] * mask.ndim
        idx_hi[axis] = -1
        hi[tuple(idx_hi)] = False
        interior &= lo & hi
    return mask & ~interior


def extract_boundary(mask: "LabelMap | np.ndarray", class_index: int = 1) -> BoundarySet:
    """Boundary pixel set of a one-vs-rest mask (face adjacency)."""
    arr, spacing = _as_mask(mask, class_index)
    border = boundary_mask(arr)
    idx = np.argwhere(border)
    return BoundarySet(idx.astype(float), spacing, arr.shape)


def _directed_distances(src: BoundarySet, dst: BoundarySet) -> np.ndarray:
    """Nearest-neighbour distance of each src point to the dst set.

    Grid pairs use the exact Euclidean distance transform; free point clouds
    fall back to an exact nearest-neighbour query.
    """
    if len(src) == 0 or len(dst) == 0:
        raise ValueError("directed distances need two non-empty boundary sets")
    same_grid = (src.source_shape is not None and src.source_shape == dst.source_shape
                 and src.spacing == dst.spacing)
    if same_grid:
        target = np.zeros(dst.source_shape, dtype=bool)
        target[tuple(dst.indices.astype(int).T)] = True
        dist_map = ndimage.distance_transform_edt(~target, sampling=dst.spacing)
        return dist_map[tuple(src.indices.astype(int).T)]
    tree = cKDTree(dst.points)
    d, _ = tree.query(src.points)
    return np.asarray(d, dtype=float)


def hausdorff(a: BoundarySet, b: BoundarySet,
              percentile: float | None = None) -> "float | Excluded":
    """Maximum (or pooled percentile) of the symmetric directed distances."""
    if len(a) == 0 or len(b) == 0:
        return Excluded("empty boundary set")
    if percentile is not None and not 0.0 < percentile <= 100.0:
        raise ValueError("percentile must lie in (0, 100]")
    d_ab = _directed_distances(a, b)
    d_ba = _directed_distances(b, a)
    if percentile is None or percentile == 100.0:
        return float(max(d_ab.max(), d_ba.max()))
    pooled = np.concatenate([d_ab, d_ba])
    return float(np.percentile(pooled, percentile))


def assd(a: BoundarySet, b: BoundarySet) -> "float | Excluded":
    """Mean of the pooled directed distance lists (larger set dominates)."""
    if len(a) == 0 or len(b) == 0:
        return Excluded("empty boundary set")
    pooled = np.concatenate([_directed_distances(a, b), _directed_distances(b, a)])
    return float(pooled.mean())


def masd(a: BoundarySet, b: BoundarySet,
         directed_weight: float = 0.5) -> "float | Excluded":
    """Average of the two directed mean distances (both sides weigh equally).

    `directed_weight` scales the combination of the two directed means; 0.5
    yields their average, 1.0 their sum.
    """
    if len(a) == 0 or len(b) == 0:
        return Excluded("empty boundary set")
    m_ab = float(_directed_distances(a, b).mean())
    m_ba = float(_directed_distances(b, a).mean())
    return directed_weight * (m_ab + m_ba)


def nsd(a: BoundarySet, b: BoundarySet, tolerance: float) -> "float | Excluded":
    """Share of boundary points whose nearest counterpart lies within tolerance."""
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    if len(a) == 0 or len(b) == 0:
        return Excluded("empty boundary set")
    d_ab = _directed_distances(a, b)
    d_ba = _directed_distances(b, a)
    hits = int(np.count_nonzero(d_ab <= tolerance)) + int(np.count_nonzero(d_ba <= tolerance))
    return hits / (len(a) + len(b))


def _boundary_band(mask: np.ndarray, width: float,
                   spacing: Sequence[float]) -> np.ndarray:
    """mask pixels within `width` of the mask's own boundary."""
    border = boundary_mask(mask)
    if not border.any():
        return np.zeros_like(mask)
    dist = ndimage.distance_transform_edt(~border, sampling=spacing)
    return mask & (dist <= width)


def boundary_iou(reference: "LabelMap | np.ndarray", prediction: "LabelMap | np.ndarray",
                 width: float = 1.0, class_index: int = 1) -> "float | Excluded":
    """IoU restricted to each mask's own boundary band of the given width."""
    ref, spacing = _as_mask(reference, class_index)
    pred, spacing_p = _as_mask(prediction, class_index)
    if ref.shape != pred.shape:
        raise ValueError("reference and prediction shapes differ")
    if spacing != spacing_p:
        raise ValueError("reference and prediction spacings differ")
    if width < min(spacing):
        raise ValueError("band width must cover at least one pixel")
    ref_band = _boundary_band(ref, width, spacing)
    pred_band = _boundary_band(pred, width, spacing)
    union = int(np.count_nonzero(ref_band | pred_band))
    if union == 0:
        return Excluded("both boundary bands are empty")
    inter = int(np.count_nonzero(ref_band & pred_band))
    return inter / union


def count_components(mask: np.ndarray) -> int:
    """Face-connected component count; detects same-class multi-instance masks."""
    _, n = ndimage.label(np.asarray(mask, dtype=bool))
    return int(n)
