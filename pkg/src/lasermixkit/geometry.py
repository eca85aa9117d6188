"""Spherical angles, inclination/grid area assignment, and range-view rasterization."""

import numpy as np

from . import _backend
from .cloud import BeamPartition, GridPartition, PointCloud, RangeImage
from .errors import ValidationError

TWO_PI = 2.0 * np.pi


def _as_coords(obj):
    """Accept a PointCloud or a bare (N,3) / (3,) array; return (N,3) float64."""
    if isinstance(obj, PointCloud):
        return obj.coords
    arr = np.asarray(obj, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValidationError(f"expected (N, 3) coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("coordinates must be finite")
    return arr[0] if single else arr


def inclination(points):
    """Elevation angle above the sensor's horizontal plane, in [-pi/2, pi/2].

    arctan(z / sqrt(x^2 + y^2)); points on the vertical axis map to +-pi/2
    (0 for the origin). Accepts a single 3-vector or an (N, 3) array.
    """
    coords = _as_coords(points)
    flat = np.atleast_2d(coords)
    horiz = np.sqrt(flat[:, 0] * flat[:, 0] + flat[:, 1] * flat[:, 1])
    phi = np.arctan2(flat[:, 2], horiz)
    return float(phi[0]) if coords.ndim == 1 else phi


def azimuth(points):
    """Horizontal angle around the vertical axis, in [-pi, pi).

    Two-argument arctangent of (y, x); the origin maps to 0. The +pi branch
    value is folded to -pi so the half-open range is exact.
    """
    coords = _as_coords(points)
    flat = np.atleast_2d(coords)
    alpha = np.arctan2(flat[:, 1], flat[:, 0])
    alpha = np.where(alpha == np.pi, -np.pi, alpha)
    return float(alpha[0]) if coords.ndim == 1 else alpha


def scan_range(points):
    """Euclidean distance from the sensor origin."""
    coords = _as_coords(points)
    flat = np.atleast_2d(coords)
    r = np.sqrt(flat[:, 0] ** 2 + flat[:, 1] ** 2 + flat[:, 2] ** 2)
    return float(r[0]) if coords.ndim == 1 else r


def make_inclination_partition(phi_min, phi_max, m):
    """m+1 evenly spaced inclination bounds from phi_min to phi_max (radians)."""
    phi_min = float(phi_min)
    phi_max = float(phi_max)
    m = int(m)
    if not (phi_min < phi_max):
        raise ValidationError(f"phi_min must be < phi_max, got {phi_min} >= {phi_max}")
    if m < 1:
        raise ValidationError(f"need at least one area, got m={m}")
    bounds = phi_min + np.arange(m + 1, dtype=np.float64) * ((phi_max - phi_min) / m)
    # pin the endpoints so callers' min/max round-trip exactly
    bounds[0] = phi_min
    bounds[-1] = phi_max
    return BeamPartition(bounds=bounds)


def assign_areas(cloud, partition):
    """Inclination area index per point, in [0, m).

    Interior intervals are half-open [phi_k, phi_{k+1}); the last is closed on
    the right; inclinations outside the bounds clamp to the nearest end area.
    """
    coords = _as_coords(cloud)
    coords = np.atleast_2d(coords)
    phi = inclination(coords)
    return _backend.bin_values(np.atleast_1d(phi), partition.bounds)


def azimuth_sectors(alpha, count):
    """Sector index for azimuth angles: floor((alpha+pi) / (2pi/count)), clamped."""
    alpha = np.asarray(alpha, dtype=np.float64)
    width = TWO_PI / count
    sector = np.floor((alpha + np.pi) / width).astype(np.int64)
    return np.clip(sector, 0, count - 1)


def assign_grid_areas(cloud, grid):
    """Flattened azimuth x inclination cell index per point, in [0, i*j).

    index = sector * j + inclination_area, with j inclination areas and
    sectors of width 2pi/i starting at -pi.
    """
    if not isinstance(grid, GridPartition):
        raise ValidationError("assign_grid_areas needs a GridPartition")
    coords = np.atleast_2d(_as_coords(cloud))
    incl_part = BeamPartition(bounds=grid.inclination_bounds)
    incl_area = assign_areas(coords, incl_part)
    sector = azimuth_sectors(azimuth(coords), grid.azimuth_count)
    return sector * grid.num_inclination_areas + incl_area


def azimuth_columns(alpha, width):
    """Range-view column per azimuth: floor((alpha+pi)/(2pi) * width), clamped."""
    alpha = np.asarray(alpha, dtype=np.float64)
    col = np.floor((alpha + np.pi) / TWO_PI * width).astype(np.int64)
    return np.clip(col, 0, width - 1)


def range_view_rasterize(cloud, partition, width):
    """Project a cloud onto an (areas x width) grid keeping the nearest return.

    Row 0 is the lowest inclination area. Collisions resolve to the smallest
    range (ties to the smallest point index). Cells with no point hold depth
    inf, class -1, point index -1.
    """
    width = int(width)
    if width < 1:
        raise ValidationError(f"width must be >= 1, got {width}")
    if not isinstance(cloud, PointCloud):
        raise ValidationError("range_view_rasterize needs a PointCloud")
    height = partition.num_areas
    rows = assign_areas(cloud, partition)
    cols = azimuth_columns(azimuth(cloud.coords), width)
    ranges = scan_range(cloud.coords)
    depth, index = _backend.rasterize(rows, cols, ranges, height, width)
    class_id = np.full((height, width), -1, dtype=np.int64)
    if cloud.labels is not None:
        hit = index >= 0
        class_id[hit] = cloud.labels[index[hit]]
    return RangeImage(depth=depth, class_id=class_id, point_index=index, partition=partition)
