"""Scene mixing: inclination-area swapping, grid checkerboards, and the
baseline strategies (random points, box swap, area cutout, plain union).

All mixing ops conserve the input point multiset exactly: every output point
is a verbatim (coords, intensity, label, painted) tuple from one input. Output
ordering is fixed (scan_a-sourced points first, each block in original order)
so serialized results are byte-stable.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .cloud import IGNORE_ID, BeamPartition, GridPartition, PointCloud
from .errors import ValidationError
from .geometry import assign_areas, azimuth, azimuth_sectors

SCAN_A = 0
SCAN_B = 1


@dataclass(frozen=True)
class Box3:
    """Axis-aligned box, closed on all faces."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.ascontiguousarray(self.lo, dtype=np.float64)
        hi = np.ascontiguousarray(self.hi, dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValidationError("box corners must be 3-vectors")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValidationError("box corners must be finite")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def degenerate(self):
        return bool((self.hi <= self.lo).any())

    def contains(self, coords):
        coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
        return np.all(coords >= self.lo, axis=1) & np.all(coords <= self.hi, axis=1)


@dataclass
class MixOutput:
    """Two mixed scenes plus per-point source tags (SCAN_A / SCAN_B)."""

    mixed_a: PointCloud
    mixed_b: PointCloud
    provenance_a: np.ndarray
    provenance_b: np.ndarray
    partition_used: Optional[Union[BeamPartition, GridPartition]] = None


def _concat_fields(scan_a, scan_b, idx_a, idx_b):
    """Stitch selected rows of two clouds, scan_a rows first.

    Labels present on only one side are filled with IGNORE_ID on the other;
    painted channels must be present on both sides or neither.
    """
    coords = np.concatenate([scan_a.coords[idx_a], scan_b.coords[idx_b]])
    intensity = np.concatenate([scan_a.intensity[idx_a], scan_b.intensity[idx_b]])
    la, lb = scan_a.labels, scan_b.labels
    if la is None and lb is None:
        labels = None
    else:
        fa = la[idx_a] if la is not None else np.full(len(idx_a), IGNORE_ID, dtype=np.int64)
        fb = lb[idx_b] if lb is not None else np.full(len(idx_b), IGNORE_ID, dtype=np.int64)
        labels = np.concatenate([fa, fb])
    pa, pb = scan_a.painted, scan_b.painted
    if pa is None and pb is None:
        painted = None
    elif pa is None or pb is None:
        raise ValidationError("painted channels present on only one input")
    elif pa.shape[1] != pb.shape[1]:
        raise ValidationError(
            f"painted channel dimensions differ: {pa.shape[1]} vs {pb.shape[1]}"
        )
    else:
        painted = np.concatenate([pa[idx_a], pb[idx_b]])
    return PointCloud(coords=coords, intensity=intensity, labels=labels, painted=painted)


def _route(scan_a, scan_b, a_to_a, b_to_a, partition=None):
    """Build a MixOutput from boolean routing masks (True = goes to mixed_a)."""
    a_to_a = np.asarray(a_to_a, dtype=bool)
    b_to_a = np.asarray(b_to_a, dtype=bool)
    idx_a_keep = np.flatnonzero(a_to_a)
    idx_a_give = np.flatnonzero(~a_to_a)
    idx_b_give = np.flatnonzero(b_to_a)
    idx_b_keep = np.flatnonzero(~b_to_a)
    mixed_a = _concat_fields(scan_a, scan_b, idx_a_keep, idx_b_give)
    mixed_b = _concat_fields(scan_a, scan_b, idx_a_give, idx_b_keep)
    prov_a = np.concatenate([
        np.full(idx_a_keep.size, SCAN_A, dtype=np.int8),
        np.full(idx_b_give.size, SCAN_B, dtype=np.int8),
    ])
    prov_b = np.concatenate([
        np.full(idx_a_give.size, SCAN_A, dtype=np.int8),
        np.full(idx_b_keep.size, SCAN_B, dtype=np.int8),
    ])
    return MixOutput(mixed_a, mixed_b, prov_a, prov_b, partition)


def laser_mix(scan_a, scan_b, partition):
    """Swap alternating inclination areas between two scans.

    mixed_a keeps scan_a's even 0-based areas and receives scan_b's odd areas;
    mixed_b is the complement. Labels, intensity, and painted channels travel
    with their points unchanged.
    """
    areas_a = assign_areas(scan_a, partition)
    areas_b = assign_areas(scan_b, partition)
    return _route(scan_a, scan_b, areas_a % 2 == 0, areas_b % 2 == 1, partition)


def multi_modal_laser_mix(pair_a, pair_b, partition):
    """laser_mix for painted scans: image evidence travels with each point.

    Both inputs must carry painted channels of the same dimension (or neither,
    which degenerates to plain laser_mix).
    """
    pa, pb = pair_a.painted, pair_b.painted
    if (pa is None) != (pb is None):
        raise ValidationError("painted channels present on only one input")
    if pa is not None and pa.shape[1] != pb.shape[1]:
        raise ValidationError(
            f"painted channel dimensions differ: {pa.shape[1]} vs {pb.shape[1]}"
        )
    return laser_mix(pair_a, pair_b, partition)


def grid_mix(scan_a, scan_b, grid):
    """Checkerboard swap over an azimuth x inclination grid.

    A cell goes to mixed_a from scan_a when (sector + inclination_area) is
    even, from scan_b when odd; i=1 therefore reduces to laser_mix.
    """
    if not isinstance(grid, GridPartition):
        raise ValidationError("grid_mix needs a GridPartition")
    beam = BeamPartition(grid.inclination_bounds)

    def parity(scan):
        incl = assign_areas(scan, beam)
        sector = azimuth_sectors(azimuth(scan.coords), grid.azimuth_count)
        return (sector + incl) % 2

    return _route(scan_a, scan_b, parity(scan_a) == 0, parity(scan_b) == 1, grid)


def point_mixup(scan_a, scan_b, ratio, seed):
    """Route every point of either scan to mixed_a with probability `ratio`.

    ratio=1 sends everything to mixed_a; ratio=0 sends everything to mixed_b.
    Bit-reproducible for a fixed seed.
    """
    ratio = float(ratio)
    if not (0.0 <= ratio <= 1.0):
        raise ValidationError(f"ratio must lie in [0, 1], got {ratio}")
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random(len(scan_a) + len(scan_b))
    to_a = u < ratio
    return _route(scan_a, scan_b, to_a[: len(scan_a)], to_a[len(scan_a):], None)


def random_box(scan_a, scan_b, seed, side_fraction=(0.2, 0.6)):
    """Seeded random swap box: center uniform inside the joint bounding box,
    side lengths per axis a uniform fraction of the joint extent."""
    coords = np.concatenate([scan_a.coords, scan_b.coords])
    if coords.shape[0] == 0:
        return Box3(np.zeros(3), np.zeros(3))
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    extent = hi - lo
    rng = np.random.Generator(np.random.PCG64(seed))
    center = lo + rng.random(3) * extent
    frac_lo, frac_hi = side_fraction
    side = extent * (frac_lo + rng.random(3) * (frac_hi - frac_lo))
    return Box3(center - side / 2.0, center + side / 2.0)


def cutmix_area(scan_a, scan_b, box=None, seed=0):
    """Swap the points inside an axis-aligned box between two scans.

    With box=None a seeded random box is drawn (see random_box). A degenerate
    box (zero volume) yields the identity mix.
    """
    if box is None:
        box = random_box(scan_a, scan_b, seed)
    if box.degenerate:
        return _route(scan_a, scan_b, np.ones(len(scan_a), bool), np.zeros(len(scan_b), bool), None)
    inside_a = box.contains(scan_a.coords) if len(scan_a) else np.zeros(0, bool)
    inside_b = box.contains(scan_b.coords) if len(scan_b) else np.zeros(0, bool)
    return _route(scan_a, scan_b, ~inside_a, inside_b, None)


def cutout_area(scan, partition, drop_parity):
    """Remove all points in areas of the given parity ("even" or "odd").

    Surviving points keep their original order.
    """
    parity = str(drop_parity).strip().lower()
    if parity not in ("even", "odd"):
        raise ValidationError(f"drop_parity must be 'even' or 'odd', got {drop_parity!r}")
    areas = assign_areas(scan, partition)
    drop = areas % 2 == (0 if parity == "even" else 1)
    return scan.take(np.flatnonzero(~drop))


def scene_concat(scan_a, scan_b):
    """Plain union of two scans (scan_a points first)."""
    return _concat_fields(
        scan_a, scan_b, np.arange(len(scan_a)), np.arange(len(scan_b))
    )
