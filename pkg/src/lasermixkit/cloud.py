"""Point-cloud containers and area-partition descriptors.

Conventions: sensor frame is x forward, y left, z up; angles are radians
everywhere in the library (the CLI converts from degrees at the boundary).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError

IGNORE_ID = 255


@dataclass(frozen=True)
class PointCloud:
    """N lidar points with intensity and optional labels / painted channels.

    coords: (N, 3) float array, meters.
    intensity: (N,) float array in [0, 1].
    labels: optional (N,) integer class ids, IGNORE_ID marks unlabeled points.
    painted: optional (N, D) per-point image evidence (see camera.paint_points).
    """

    coords: np.ndarray
    intensity: np.ndarray
    labels: Optional[np.ndarray] = None
    painted: Optional[np.ndarray] = None

    def __post_init__(self):
        coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise ValidationError(f"coords must be (N, 3), got {coords.shape}")
        if not np.isfinite(coords).all():
            raise ValidationError("coords contain non-finite values")
        n = coords.shape[0]
        intensity = np.ascontiguousarray(self.intensity, dtype=np.float64)
        if intensity.shape != (n,):
            raise ValidationError(f"intensity must have {n} entries, got {intensity.shape}")
        if n and (not np.isfinite(intensity).all() or intensity.min() < 0.0 or intensity.max() > 1.0):
            raise ValidationError("intensity must lie in [0, 1]")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "intensity", intensity)
        if self.labels is not None:
            labels = np.ascontiguousarray(self.labels, dtype=np.int64)
            if labels.shape != (n,):
                raise ValidationError(f"labels must have {n} entries, got {labels.shape}")
            if n and labels.min() < 0:
                raise ValidationError("labels must be nonnegative class ids")
            object.__setattr__(self, "labels", labels)
        if self.painted is not None:
            painted = np.ascontiguousarray(self.painted, dtype=np.float64)
            if painted.ndim != 2 or painted.shape[0] != n:
                raise ValidationError(f"painted must be (N, D), got {painted.shape}")
            if not np.isfinite(painted).all():
                raise ValidationError("painted channels contain non-finite values")
            object.__setattr__(self, "painted", painted)

    def __len__(self):
        return self.coords.shape[0]

    @property
    def num_painted_channels(self):
        return 0 if self.painted is None else self.painted.shape[1]

    def take(self, index):
        """Sub-cloud at the given indices (labels/painted travel along)."""
        index = np.asarray(index)
        return PointCloud(
            coords=self.coords[index],
            intensity=self.intensity[index],
            labels=None if self.labels is None else self.labels[index],
            painted=None if self.painted is None else self.painted[index],
        )

    def with_labels(self, labels):
        return PointCloud(self.coords, self.intensity, labels, self.painted)

    def with_painted(self, painted):
        return PointCloud(self.coords, self.intensity, self.labels, painted)


def check_labels(cloud, num_classes):
    """Enforce the class-id invariant once the class count is known."""
    if cloud.labels is None:
        raise ValidationError("point cloud carries no labels")
    bad = (cloud.labels >= num_classes) & (cloud.labels != IGNORE_ID)
    if bad.any():
        raise ValidationError(
            f"labels contain ids >= {num_classes} that are not the ignore id {IGNORE_ID}"
        )


@dataclass(frozen=True)
class BeamPartition:
    """m inclination areas delimited by m+1 strictly increasing bounds."""

    bounds: np.ndarray

    def __post_init__(self):
        bounds = np.ascontiguousarray(self.bounds, dtype=np.float64)
        if bounds.ndim != 1 or bounds.size < 2:
            raise ValidationError("partition needs at least two bounds")
        if not np.isfinite(bounds).all():
            raise ValidationError("partition bounds must be finite")
        if not (np.diff(bounds) > 0).all():
            raise ValidationError("partition bounds must be strictly increasing")
        half_pi = np.pi / 2
        if bounds[0] <= -half_pi or bounds[-1] >= half_pi:
            raise ValidationError("partition bounds must lie inside (-pi/2, pi/2)")
        object.__setattr__(self, "bounds", bounds)

    @property
    def num_areas(self):
        return self.bounds.size - 1


@dataclass(frozen=True)
class GridPartition:
    """Azimuth x inclination grid: `azimuth_count` equal sectors starting at
    -pi crossed with the inclination areas of `inclination_bounds`."""

    inclination_bounds: np.ndarray
    azimuth_count: int = 1

    def __post_init__(self):
        beam = BeamPartition(self.inclination_bounds)
        object.__setattr__(self, "inclination_bounds", beam.bounds)
        if int(self.azimuth_count) < 1:
            raise ValidationError("azimuth_count must be >= 1")
        object.__setattr__(self, "azimuth_count", int(self.azimuth_count))

    @property
    def num_inclination_areas(self):
        return self.inclination_bounds.size - 1

    @property
    def num_areas(self):
        return self.azimuth_count * self.num_inclination_areas


@dataclass
class RangeImage:
    """2D raster of a scan: rows are beam areas (row 0 = lowest inclination),
    columns are azimuth bins. Empty cells have index -1, class -1, depth inf.
    """

    depth: np.ndarray
    class_id: np.ndarray
    point_index: np.ndarray
    partition: BeamPartition = field(repr=False, default=None)

    @property
    def shape(self):
        return self.depth.shape
