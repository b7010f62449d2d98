"""Priority-flood watershed with explicit ridge pixels.

Seeds are the regional minima plateaus of the height raster (4-connectivity).
Flooding pops pixels in (height, insertion order) priority; a popped pixel
whose labeled 4-neighbors disagree becomes a ridge pixel (label 0) and stops
propagating. Pixels the flood can never reach through basin pixels (possible
only in contrived plateau configurations) are also marked ridge, keeping the
basin/ridge partition exhaustive.

The result depends on the height raster only through value comparisons, so
any strictly increasing transform of the heights yields the same partition.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

_N4 = ((-1, 0), (0, -1), (0, 1), (1, 0))


@dataclass(frozen=True)
class WatershedResult:
    basin_labels: np.ndarray  # int32; 0 on ridge pixels
    num_basins: int
    ridge_mask: np.ndarray    # bool; exactly where basin_labels == 0

    def __post_init__(self):
        self.basin_labels.setflags(write=False)
        self.ridge_mask.setflags(write=False)


def regional_minima(height: np.ndarray) -> np.ndarray:
    """Label regional minima plateaus 1..K in scan order; 0 elsewhere."""
    h, w = height.shape
    labels = np.zeros((h, w), dtype=np.int32)
    visited = np.zeros((h, w), dtype=bool)
    next_label = 1
    for r0 in range(h):
        for c0 in range(w):
            if visited[r0, c0]:
                continue
            # flood the equal-value plateau containing (r0, c0)
            val = height[r0, c0]
            stack = [(r0, c0)]
            visited[r0, c0] = True
            plateau = []
            is_min = True
            while stack:
                r, c = stack.pop()
                plateau.append((r, c))
                for dr, dc in _N4:
                    rr, cc = r + dr, c + dc
                    if not (0 <= rr < h and 0 <= cc < w):
                        continue
                    v = height[rr, cc]
                    if v == val and not visited[rr, cc]:
                        visited[rr, cc] = True
                        stack.append((rr, cc))
                    elif v < val:
                        is_min = False
            if is_min:
                for r, c in plateau:
                    labels[r, c] = next_label
                next_label += 1
    return labels


def watershed_transform(height: np.ndarray) -> WatershedResult:
    height = np.asarray(height, dtype=np.float64)
    if not np.all(np.isfinite(height)):
        raise ValueError("height raster must be finite")
    h, w = height.shape
    labels = regional_minima(height)
    num_basins = int(labels.max(initial=0))

    heap: list[tuple[float, int, int, int]] = []
    queued = labels > 0
    seq = 0
    seeds = np.argwhere(labels > 0)
    for r, c in seeds:
        for dr, dc in _N4:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and not queued[rr, cc]:
                queued[rr, cc] = True
                heapq.heappush(heap, (height[rr, cc], seq, rr, cc))
                seq += 1

    RIDGE = -1
    while heap:
        _, _, r, c = heapq.heappop(heap)
        neighbor_labels = set()
        for dr, dc in _N4:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and labels[rr, cc] > 0:
                neighbor_labels.add(int(labels[rr, cc]))
        if len(neighbor_labels) == 1:
            labels[r, c] = neighbor_labels.pop()
            for dr, dc in _N4:
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w and not queued[rr, cc]:
                    queued[rr, cc] = True
                    heapq.heappush(heap, (height[rr, cc], seq, rr, cc))
                    seq += 1
        else:
            labels[r, c] = RIDGE  # fronts meet here; do not propagate

    labels[labels == RIDGE] = 0  # ridge and never-reached pixels end up 0
    return WatershedResult(basin_labels=labels, num_basins=num_basins,
                           ridge_mask=labels == 0)
