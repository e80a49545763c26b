"""Half-overlapping patch grid over slide coordinate space.

Slides are tiled into square patches that share half their area with each
lateral neighbor (0.5 linear overlap per axis); the last patch on each axis
is clamped flush with the slide edge so no coordinate ever leaves slide
space. Detections are produced patch-locally and mapped back with a pure
translation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import Circle

__all__ = [
    "SlideGeometry",
    "TilingConfig",
    "Patch",
    "generate_patches",
    "to_slide_coords",
    "from_slide_coords",
]


@dataclass(frozen=True, slots=True)
class SlideGeometry:
    slide_id: str
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"slide dimensions must be >= 1, got {self.width}x{self.height}")


@dataclass(frozen=True, slots=True)
class TilingConfig:
    patch_size: int = 512
    overlap_fraction: float = 0.5

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be >= 1, got {self.patch_size}")
        if not (0.0 < self.overlap_fraction < 1.0):
            raise ValueError(f"overlap_fraction must be in (0,1), got {self.overlap_fraction}")

    @property
    def stride(self) -> int:
        return round(self.patch_size * (1.0 - self.overlap_fraction))


@dataclass(frozen=True, slots=True)
class Patch:
    """Axis-aligned tile of slide space; patch_id is 'col_row_x_y'."""

    patch_id: str
    x: int
    y: int
    w: int
    h: int


def _axis_starts(dimension: int, patch_size: int, stride: int) -> list[int]:
    if dimension <= patch_size:
        return [0]
    starts = []
    s = 0
    while s + patch_size < dimension:
        starts.append(s)
        s += stride
    final = dimension - patch_size
    if starts and starts[-1] == final:
        return starts
    starts.append(final)
    return starts


def generate_patches(slide: SlideGeometry, cfg: TilingConfig = TilingConfig()) -> list[Patch]:
    """Row-major list of patches covering every pixel of the slide.

    Start positions along each axis are 0, stride, 2*stride, ... with the
    final start clamped to max(0, dimension - patch_size). A dimension
    smaller than the patch size yields a single patch of that full extent.
    """
    stride = cfg.stride
    if stride == 0:
        raise ValueError(
            f"tiling stride rounds to 0 (patch_size={cfg.patch_size}, "
            f"overlap_fraction={cfg.overlap_fraction})"
        )
    xs = _axis_starts(slide.width, cfg.patch_size, stride)
    ys = _axis_starts(slide.height, cfg.patch_size, stride)
    w_full = min(cfg.patch_size, slide.width)
    h_full = min(cfg.patch_size, slide.height)
    patches = []
    for row, y in enumerate(ys):
        for col, x in enumerate(xs):
            patches.append(Patch(f"{col}_{row}_{x}_{y}", x, y, w_full, h_full))
    return patches


def to_slide_coords(patch: Patch, local: Circle) -> Circle:
    """Translate a patch-local circle into slide coordinates (radius unchanged).

    The result may extend beyond the patch bounds; detectors are allowed to
    predict centers past tile edges.
    """
    return Circle(local.cx + patch.x, local.cy + patch.y, local.r)


def from_slide_coords(patch: Patch, c: Circle) -> Circle:
    """Inverse of :func:`to_slide_coords`."""
    return Circle(c.cx - patch.x, c.cy - patch.y, c.r)
