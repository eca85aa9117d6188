import numpy as np
import pytest

from lasermixkit import PointCloud


def random_cloud(rng, n, num_classes=4, painted_dim=0, labeled=True):
    """Uniform box of points with optional labels and painted channels."""
    coords = rng.uniform(-30.0, 30.0, size=(n, 3))
    cloud = PointCloud(coords=coords, intensity=rng.random(n))
    if labeled:
        cloud = cloud.with_labels(rng.integers(0, num_classes, size=n))
    if painted_dim:
        cloud = cloud.with_painted(rng.random((n, painted_dim)))
    return cloud


@pytest.fixture(scope="session")
def tiny_benchmark():
    """Eight labeled scans plus two val scans, shared by the slower tests."""
    from lasermixkit import default_scene_template, make_benchmark

    template = make_template_smaller(default_scene_template())
    return make_benchmark(template, 8, seed=3), make_benchmark(template, 2, seed=77)


def make_template_smaller(template):
    from dataclasses import replace

    return replace(template, azimuth_steps=180)
