"""Oriented edge-filter bank over the probability map.

Each orientation uses a line-shaped matched kernel: a ridge profile (negated
second derivative of a Gaussian, ``sigma_perp``) across the line, tapered by a
Gaussian along the line so the support is a segment of length
``2 * half_length + 1``. The per-pixel maximum over orientations and the
winning orientation are kept; ties go to the lowest orientation, which makes
the output deterministic (and, since the kernels are symmetric under a 180
degree turn, the stored angle is always the representative below 180).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .config import FilterConfig
from .imagery import ProbabilityMap


@dataclass(frozen=True)
class OrientedResponse:
    width: int
    height: int
    max_response: np.ndarray        # float64, >= 0
    argmax_orientation: np.ndarray  # int16 degrees, multiples of 360/n in [0, 360)

    def __post_init__(self):
        for name in ("max_response", "argmax_orientation"):
            arr = getattr(self, name)
            if arr.shape != (self.height, self.width):
                raise ValueError(f"{name} shape mismatch")
            arr.setflags(write=False)


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian with radius ceil(3 * sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(raster: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing with reflective border handling."""
    k = gaussian_kernel_1d(sigma)
    out = ndimage.correlate1d(np.asarray(raster, dtype=np.float64), k,
                              axis=0, mode="reflect")
    return ndimage.correlate1d(out, k, axis=1, mode="reflect")


def oriented_kernel(theta_deg: float, half_length: int, sigma_perp: float) -> np.ndarray:
    """Matched ridge kernel for a line at ``theta_deg``.

    Axes: column = x, row = y with y growing downward; theta is measured
    counterclockwise from the +x axis as the image is normally displayed
    (so the along-line unit vector is (cos t, -sin t) in (col, row) deltas).
    """
    radius = max(int(half_length), int(np.ceil(3.0 * sigma_perp)))
    t = np.deg2rad(theta_deg)
    rows, cols = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    x = cols.astype(np.float64)
    y = -rows.astype(np.float64)  # flip to the conventional orientation
    along = x * np.cos(t) + y * np.sin(t)
    perp = -x * np.sin(t) + y * np.cos(t)
    sigma_along = max(half_length / 2.0, 0.5)
    taper = np.exp(-0.5 * (along / sigma_along) ** 2)
    taper[np.abs(along) > half_length + 0.5] = 0.0
    s2 = sigma_perp ** 2
    ridge = (1.0 - perp ** 2 / s2) * np.exp(-0.5 * perp ** 2 / s2)
    kernel = taper * ridge
    kernel -= kernel.mean()          # zero response on constant rasters
    norm = np.sqrt((kernel ** 2).sum())
    return kernel / norm


def oriented_filter_bank(pmap: ProbabilityMap | np.ndarray,
                         num_orientations: int = 36,
                         half_length: int = 4,
                         sigma_perp: float = 1.0) -> OrientedResponse:
    """Correlate with all oriented kernels; keep per-pixel max and argmax.

    Responses are clamped at zero (only bright ridges count). Correlation
    uses reflective borders, matching :func:`gaussian_smooth`.
    """
    if 360 % num_orientations != 0:
        raise ValueError(f"num_orientations must divide 360, got {num_orientations}")
    if half_length < 2:
        raise ValueError(f"half_length must be >= 2, got {half_length}")
    values = pmap.values if isinstance(pmap, ProbabilityMap) else np.asarray(pmap, float)
    h, w = values.shape
    radius = max(int(half_length), int(np.ceil(3.0 * sigma_perp)))
    if 2 * radius + 1 > min(h, w):
        raise ValueError(f"kernel size {2 * radius + 1} exceeds image side {min(h, w)}")

    step = 360 // num_orientations
    best = np.full((h, w), -np.inf)
    best_theta = np.zeros((h, w), dtype=np.int16)
    for i in range(num_orientations):
        theta = i * step
        k = oriented_kernel(theta, half_length, sigma_perp)
        resp = ndimage.correlate(values, k, mode="reflect")
        better = resp > best  # strict: first (lowest) orientation wins ties
        best = np.where(better, resp, best)
        best_theta = np.where(better, np.int16(theta), best_theta)
    np.maximum(best, 0.0, out=best)
    return OrientedResponse(width=w, height=h, max_response=best,
                            argmax_orientation=best_theta)


def run_filters(pmap: ProbabilityMap, cfg: FilterConfig) -> tuple[OrientedResponse, np.ndarray]:
    """Filter bank followed by smoothing of the max response.

    Returns the raw response object and the smoothed max-response raster that
    feeds the watershed.
    """
    resp = oriented_filter_bank(pmap, cfg.num_orientations, cfg.half_length,
                                cfg.sigma_perp)
    smoothed = gaussian_smooth(resp.max_response, cfg.smooth_sigma)
    return resp, smoothed
