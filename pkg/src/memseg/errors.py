"""Exception types shared across the pipeline."""


class MemsegError(Exception):
    """Base class for pipeline errors."""


class ImageFormatError(MemsegError):
    """Unreadable, multi-channel, or otherwise unusable raster input."""


class LabelOverflowError(MemsegError):
    """Label ids do not fit the 16-bit output format."""


class RidgeTopologyError(MemsegError):
    """Ridge network cannot be vectorized into a consistent planar graph.

    Carries the offending pixel coordinates when known.
    """

    def __init__(self, message, pixels=()):
        self.pixels = tuple(pixels)
        if self.pixels:
            message = f"{message} (pixels: {list(self.pixels)[:8]})"
        super().__init__(message)


class LpNumericalError(MemsegError):
    """The LP solver failed numerically (distinct from infeasibility)."""


class InfeasibleSpecError(MemsegError):
    """A synthetic scene spec cannot be realized."""
