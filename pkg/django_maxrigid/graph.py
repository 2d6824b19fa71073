"""
K-nearest-neighbour graph over tracked points, built from image distances.
"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from django_maxrigid.exceptions import DisconnectedPoint, InvalidNeighborCount


@dataclass(frozen=True)
class NeighborGraph:
    edges: tuple
    k_neighbors: int
    n_points: int

    def __len__(self):
        return len(self.edges)

    def degrees(self):
        degree = np.zeros(self.n_points, dtype=int)
        for i, j in self.edges:
            degree[i] += 1
            degree[j] += 1
        return degree

    def without(self, removed):
        removed = set(removed)
        return NeighborGraph(
            edges=tuple(e for e in self.edges if e not in removed),
            k_neighbors=self.k_neighbors,
            n_points=self.n_points,
        )


def mean_image_distances(seq):
    """
    Mean Euclidean image distance over the frames where both points are
    visible; +inf for pairs never seen together and on the diagonal.
    """
    n = seq.n_points
    total = np.zeros((n, n))
    count = np.zeros((n, n))
    for frame in range(seq.n_frames):
        visible = seq.visible[frame]
        both = np.outer(visible, visible)
        uv = np.where(visible[:, None], seq.uv[frame], 0.0)
        total += np.where(both, cdist(uv, uv), 0.0)
        count += both
    with np.errstate(invalid='ignore', divide='ignore'):
        distance = np.where(count > 0, total / np.maximum(count, 1), np.inf)
    np.fill_diagonal(distance, np.inf)
    return distance


def build_knn_graph(seq, k):
    """
    Symmetrized union of each point's ``k`` nearest neighbours. Ties go to the
    smaller point index.
    """
    min_visible = int(seq.visible.sum(axis=1).min())
    if not 1 <= k < min_visible:
        raise InvalidNeighborCount(
            'neighbourhood size must lie in [1, %d), got %r' % (min_visible, k))

    distance = mean_image_distances(seq)
    edges = set()
    for i in range(seq.n_points):
        row = distance[i]
        if not np.isfinite(row).any():
            raise DisconnectedPoint('point %d shares no frame with any other point' % i)
        order = np.argsort(row, kind='stable')
        for j in order[:k]:
            if not np.isfinite(row[j]):
                break
            edges.add((min(i, j), max(i, j)))
    return NeighborGraph(
        edges=tuple(sorted((int(i), int(j)) for i, j in edges)),
        k_neighbors=k,
        n_points=seq.n_points,
    )
