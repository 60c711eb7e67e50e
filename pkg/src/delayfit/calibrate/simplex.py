"""Geometry of the probability simplex {w : w_j >= 0, sum_j w_j = 1}."""

from itertools import combinations

import numpy as np


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Sort-based: the projection is ``max(v - theta, 0)`` for the unique shift
    ``theta`` that makes the positive part sum to one. The input is shifted so
    its largest entry is 0 first; the result is the same for any finite
    magnitude.

    >>> project_simplex([0.6, 0.6]).tolist()
    [0.5, 0.5]
    >>> project_simplex([1.5, -0.3]).tolist()
    [1.0, 0.0]
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("expected a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project a vector with non-finite entries")
    v = v - v.max()
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    ranks = np.arange(1, v.size + 1)
    # u[0] == 0 makes rank 1 always active
    active = u - cumulative / ranks > 0
    rho = int(ranks[active][-1]) if active.any() else 1
    theta = cumulative[rho - 1] / rho
    return np.clip(v - theta, 0.0, 1.0)


def simplex_lattice(k: int, resolution: float) -> np.ndarray:
    """All points of the simplex whose coordinates are multiples of ``resolution``.

    Returns an ``(m, k)`` array; ``1 / resolution`` must be a whole number.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    steps = round(1.0 / resolution)
    if steps < 1 or abs(steps * resolution - 1.0) > 1e-9:
        raise ValueError(f"1/resolution must be a positive integer, got {1.0 / resolution:g}")
    # stars and bars: choose k-1 divider positions among steps + k - 1 slots
    points = []
    for bars in combinations(range(steps + k - 1), k - 1):
        edges = (-1, *bars, steps + k - 1)
        points.append([edges[j + 1] - edges[j] - 1 for j in range(k)])
    return np.asarray(points, dtype=float) / steps
