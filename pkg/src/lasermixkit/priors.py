"""Empirical spatial-prior analytics: per-class area distributions and
entropy estimates over inclination areas, all in nats."""

from dataclasses import dataclass

import numpy as np

from .cloud import IGNORE_ID, check_labels
from .errors import EmptyInputError, ValidationError
from .geometry import assign_areas, azimuth, azimuth_columns


def _entropy(counts):
    """Shannon entropy (nats) of a histogram; 0 log 0 := 0."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts / total
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum())


@dataclass
class PriorReport:
    """class_proportions: share of valid points per class; area_distributions:
    per-class distribution over areas (zero rows for absent classes);
    entropies of the label marginal and of labels conditioned on areas."""

    class_proportions: np.ndarray
    area_distributions: np.ndarray
    conditional_entropy: float
    marginal_entropy: float


def label_entropy_given_areas(labels, areas, m, num_classes):
    """(H(Y), H(Y|A)) in nats from empirical histograms; ignored labels are
    dropped before counting."""
    labels = np.asarray(labels, dtype=np.int64)
    areas = np.asarray(areas, dtype=np.int64)
    if labels.shape != areas.shape or labels.ndim != 1:
        raise ValidationError("labels and areas must be equal-length vectors")
    if areas.size and (areas.min() < 0 or areas.max() >= m):
        raise ValidationError(f"area indices must lie in [0, {m})")
    valid = labels != IGNORE_ID
    labels = labels[valid]
    areas = areas[valid]
    n = labels.size
    if n == 0:
        raise EmptyInputError("no valid labels to histogram")
    if labels.max() >= num_classes:
        raise ValidationError(f"labels contain ids >= {num_classes}")
    joint = np.zeros((m, num_classes), dtype=np.int64)
    np.add.at(joint, (areas, labels), 1)
    marginal = _entropy(joint.sum(axis=0))
    conditional = 0.0
    for k in range(m):
        nk = joint[k].sum()
        if nk:
            conditional += (nk / n) * _entropy(joint[k])
    return marginal, float(conditional)


def class_area_distribution(clouds, partition, num_classes):
    """Pool labeled clouds and report how each class spreads over the areas."""
    clouds = list(clouds)
    m = partition.num_areas
    counts = np.zeros((num_classes, m), dtype=np.int64)
    all_labels = []
    all_areas = []
    for cloud in clouds:
        check_labels(cloud, num_classes)
        areas = assign_areas(cloud, partition)
        valid = cloud.labels != IGNORE_ID
        np.add.at(counts, (cloud.labels[valid], areas[valid]), 1)
        all_labels.append(cloud.labels)
        all_areas.append(areas)
    per_class = counts.sum(axis=1)
    total = per_class.sum()
    if total == 0:
        raise EmptyInputError("no valid labeled points in the dataset")
    proportions = per_class / total
    dists = np.zeros((num_classes, m), dtype=np.float64)
    nonempty = per_class > 0
    dists[nonempty] = counts[nonempty] / per_class[nonempty, None]
    marginal, conditional = label_entropy_given_areas(
        np.concatenate(all_labels), np.concatenate(all_areas), m, num_classes
    )
    return PriorReport(
        class_proportions=proportions,
        area_distributions=dists,
        conditional_entropy=conditional,
        marginal_entropy=marginal,
    )


def empirical_conditional_entropy(prob_dists, areas, m):
    """Average per-point prediction entropy (nats), grouped by area.

    Each row of prob_dists must be a distribution (nonnegative, sums to 1
    within 1e-6). The area-weighted average equals the plain point average.
    """
    p = np.asarray(prob_dists, dtype=np.float64)
    areas = np.asarray(areas, dtype=np.int64)
    if p.ndim != 2 or p.shape[0] == 0:
        if p.ndim == 2 and p.shape[0] == 0:
            raise EmptyInputError("no distributions given")
        raise ValidationError(f"prob_dists must be (N, C), got {p.shape}")
    if areas.shape != (p.shape[0],):
        raise ValidationError("areas must have one entry per distribution row")
    if areas.size and (areas.min() < 0 or areas.max() >= m):
        raise ValidationError(f"area indices must lie in [0, {m})")
    if p.min() < 0.0 or np.abs(p.sum(axis=1) - 1.0).max() > 1e-6:
        raise ValidationError("each row must be a probability distribution")
    plogp = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    point_entropy = -plogp.sum(axis=1)
    return float(point_entropy.mean())


def prior_heatmap(clouds, partition, class_id, width, num_classes=None):
    """Fraction of scans in which the class occupies each (area, column) cell."""
    class_id = int(class_id)
    if class_id < 0 or class_id == IGNORE_ID or (
        num_classes is not None and class_id >= num_classes
    ):
        raise ValidationError(f"unknown class id {class_id}")
    clouds = list(clouds)
    m = partition.num_areas
    width = int(width)
    if width < 1:
        raise ValidationError("width must be >= 1")
    grid = np.zeros((m, width), dtype=np.float64)
    if not clouds:
        return grid
    for cloud in clouds:
        if cloud.labels is None:
            raise ValidationError("prior_heatmap needs labeled clouds")
        sel = cloud.labels == class_id
        if not sel.any():
            continue
        sub = cloud.take(np.flatnonzero(sel))
        rows = assign_areas(sub, partition)
        cols = azimuth_columns(azimuth(sub.coords), width)
        occupancy = np.zeros((m, width), dtype=bool)
        occupancy[rows, cols] = True
        grid += occupancy
    return grid / len(clouds)
