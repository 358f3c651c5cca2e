"""Lloyd's k-means with deterministic farthest-first seeding.

The objective is the classic sum of squared Euclidean distances from each
point to its assigned centroid. Small enough inputs can be checked against
the brute-force optimum (see tests).
"""

from __future__ import annotations

import numpy as np

from amisim.errors import ConfigError


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100):
    """Cluster points into k groups; returns (assignments, centroids, objective).

    Iterates Lloyd's update until assignments stop changing or max_iter is
    reached. An emptied cluster is re-seeded to the point farthest from its
    assigned centroid, which keeps k clusters alive and the run deterministic.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = len(pts)
    if n == 0:
        raise ConfigError("kmeans requires at least one point")
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, {n}], got {k}")

    centroids = _farthest_first_seed(pts, k, seed)
    assignments = _assign(pts, centroids)
    for _ in range(max_iter):
        centroids = _update_centroids(pts, assignments, centroids, k)
        new_assignments = _assign(pts, centroids)
        if np.array_equal(new_assignments, assignments):
            assignments = new_assignments
            break
        assignments = new_assignments
    objective = float(((pts - centroids[assignments]) ** 2).sum())
    return assignments, centroids, objective


def _sq_dists(pts, centroids):
    return ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _assign(pts, centroids):
    return np.argmin(_sq_dists(pts, centroids), axis=1)


def _farthest_first_seed(pts, k, seed):
    rng = np.random.default_rng(seed)
    first = int(rng.integers(len(pts)))
    chosen = [first]
    d2 = ((pts - pts[first]) ** 2).sum(axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((pts - pts[nxt]) ** 2).sum(axis=1))
    return pts[chosen].copy()


def _update_centroids(pts, assignments, centroids, k):
    new = centroids.copy()
    dists = ((pts - centroids[assignments]) ** 2).sum(axis=1)
    for j in range(k):
        members = assignments == j
        if members.any():
            new[j] = pts[members].mean(axis=0)
        else:
            new[j] = pts[int(np.argmax(dists))]
    return new
