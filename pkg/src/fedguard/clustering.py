"""K-means over a round's submitted parameter vectors.

Detection works in three steps each round:

1. ``wcss_curve``/``select_cluster_count`` pick a cluster count via the
   within-cluster-sum-of-squares elbow: the smallest k whose relative cost
   drop to k+1 falls below ``elbow_ratio``. An adversary-free round
   typically collapses to a single cluster.
2. ``kmeans`` (Lloyd iterations, seeded farthest-point initialization,
   deterministic restarts) partitions the updates.
3. ``label_clusters`` marks the cluster whose centroid lies nearest the
   previously broadcast global weights as benign; every client outside it
   is flagged. Honest clients stay near the broadcast weights because they
   trained from them, while poisoned updates land far away.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .model import ParameterVector

N_RESTARTS = 5
DEGENERATE_TOL = 1e-12
# Points whose largest pairwise distance is below this fraction of their
# median norm count as a single cluster. Honest updates disagree by a
# learning-rate-sized step, a small fraction of the weights' own magnitude;
# poisoned updates sit orders of magnitude outside it.
DEGENERATE_REL = 0.5
# A WCSS that has collapsed below this fraction of the single-cluster cost is
# numerical noise at the curve's own scale and counts as zero for the elbow.
TERMINAL_RATIO = 1e-3
_COST_SLACK = 1e-9  # float tolerance when checking Lloyd's monotone cost


@dataclass(frozen=True, eq=False)
class PointSet:
    """Client ids paired with their flattened update vectors (one row each)."""

    client_ids: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] == 0:
            raise ParameterError("point matrix must be 2-D and non-empty")
        if not np.all(np.isfinite(matrix)):
            raise ParameterError("points contain non-finite values")
        ids = tuple(int(c) for c in self.client_ids)
        if len(ids) != matrix.shape[0]:
            raise ParameterError("client_ids length must equal the point count")
        if len(set(ids)) != len(ids):
            raise ParameterError("client_ids must be unique")
        matrix.setflags(write=False)
        object.__setattr__(self, "client_ids", ids)
        object.__setattr__(self, "matrix", matrix)

    @property
    def n_points(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def from_updates(cls, updates: dict[int, ParameterVector]) -> "PointSet":
        if not updates:
            raise ParameterError("no updates to cluster")
        ids = tuple(sorted(updates))
        return cls(ids, np.stack([updates[c].values for c in ids]))


@dataclass(frozen=True)
class Clustering:
    """Result of one k-means run.

    ``assignments`` maps client_id -> cluster index in [0, k); post
    convergence every client's assigned centroid is its nearest one, and
    ``wcss`` equals the recomputable sum of squared distances to assigned
    centroids. ``j_history`` records that cost after each Lloyd iteration.
    """

    k: int
    centroids: np.ndarray
    assignments: dict[int, int]
    wcss: float
    iterations: int
    j_history: tuple[float, ...]


@dataclass(frozen=True)
class ClusterVerdict:
    """Benign/adversary split of one round's submitted clients.

    ``dissimilarity`` is the largest squared centroid gap between the benign
    cluster and any adversary cluster (0 when nobody is flagged).
    """

    benign_cluster: int
    adversary_clusters: frozenset[int]
    benign_ids: frozenset[int]
    adversary_ids: frozenset[int]
    dissimilarity: float


def _pairwise_sq(matrix: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((matrix[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def assign_points(points: PointSet, centroids: np.ndarray) -> np.ndarray:
    """Nearest-centroid index for every point; ties go to the lowest index."""
    c = np.asarray(centroids, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] < 1:
        raise ParameterError("need at least one centroid")
    if c.shape[1] != points.dim:
        raise ShapeError(
            f"centroid dimension {c.shape[1]} does not match point dimension {points.dim}"
        )
    return _pairwise_sq(points.matrix, c).argmin(axis=1)


def update_centroids(
    points: PointSet,
    assignments: np.ndarray,
    k: int,
    previous: np.ndarray | None = None,
) -> np.ndarray:
    """Each centroid moves to the mean of its assigned points.

    A cluster that lost all its points keeps its previous centroid, which
    requires ``previous``; without it an empty cluster is an error.
    """
    assign = np.asarray(assignments, dtype=np.int64)
    if assign.shape != (points.n_points,):
        raise ParameterError("assignments must give one cluster index per point")
    if assign.size and (assign.min() < 0 or assign.max() >= k):
        raise ParameterError("assignment indices must lie in [0, k)")
    centroids = np.empty((k, points.dim), dtype=np.float64)
    for j in range(k):
        members = points.matrix[assign == j]
        if len(members):
            centroids[j] = members.mean(axis=0)
        elif previous is not None:
            centroids[j] = previous[j]
        else:
            raise ParameterError(f"cluster {j} is empty and no previous centroid was given")
    return centroids


def wcss(points: PointSet, clustering: Clustering) -> float:
    """Recompute the sum of squared distances to assigned centroids."""
    total = 0.0
    for i, cid in enumerate(points.client_ids):
        j = clustering.assignments[cid]
        diff = points.matrix[i] - clustering.centroids[j]
        total += float(diff @ diff)
    return total


def _partition_cost(matrix: np.ndarray, centroids: np.ndarray) -> float:
    return float(_pairwise_sq(matrix, centroids).min(axis=1).sum())


def _farthest_point_init(matrix: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen = [int(rng.integers(matrix.shape[0]))]
    min_sq = ((matrix - matrix[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(min_sq))
        chosen.append(nxt)
        min_sq = np.minimum(min_sq, ((matrix - matrix[nxt]) ** 2).sum(axis=1))
    return matrix[chosen].copy()


def lloyd(
    points: PointSet,
    initial_centroids: np.ndarray,
    max_iter: int = 100,
    tol: float = 1e-9,
) -> Clustering:
    """One Lloyd run from explicit initial centroids.

    Iterates (update means, reassign to nearest) until assignments stop
    changing, the largest centroid shift falls below ``tol``, or ``max_iter``
    is hit. The recorded cost is checked to be non-increasing.
    """
    centroids = np.array(initial_centroids, dtype=np.float64)
    k = centroids.shape[0]
    assignments = assign_points(points, centroids)
    history: list[float] = []
    for _ in range(max_iter):
        new_centroids = update_centroids(points, assignments, k, previous=centroids)
        new_assignments = assign_points(points, new_centroids)
        cost = _partition_cost(points.matrix, new_centroids)
        if history and cost > history[-1] + _COST_SLACK * max(1.0, history[-1]):
            raise RuntimeError("k-means cost increased between iterations")
        history.append(cost)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        stable = bool(np.array_equal(new_assignments, assignments))
        assignments = new_assignments
        if stable or shift < tol:
            break
    return Clustering(
        k=k,
        centroids=centroids,
        assignments={cid: int(a) for cid, a in zip(points.client_ids, assignments)},
        wcss=history[-1],
        iterations=len(history),
        j_history=tuple(history),
    )


def kmeans(
    points: PointSet,
    k: int,
    seed: int,
    max_iter: int = 100,
    tol: float = 1e-9,
    n_restarts: int = N_RESTARTS,
) -> Clustering:
    """Best-of-restarts Lloyd clustering, deterministic for a fixed seed.

    Runs ``n_restarts`` seeded farthest-point initializations plus, for
    k > 1, one warm start built from the best (k-1)-clustering and the point
    farthest from its centroids. The warm start guarantees the cost never
    rises as k grows, which the elbow rule relies on. Ties keep the earliest
    candidate.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if k > points.n_points:
        raise ParameterError(f"k={k} exceeds the number of points ({points.n_points})")
    candidates: list[Clustering] = []
    for restart in range(n_restarts):
        rng = np.random.default_rng([seed, k, restart])
        init = _farthest_point_init(points.matrix, k, rng)
        candidates.append(lloyd(points, init, max_iter=max_iter, tol=tol))
    if k > 1:
        prev = kmeans(points, k - 1, seed, max_iter=max_iter, tol=tol, n_restarts=n_restarts)
        min_sq = _pairwise_sq(points.matrix, prev.centroids).min(axis=1)
        extra = points.matrix[int(np.argmax(min_sq))]
        init = np.vstack([prev.centroids, extra])
        candidates.append(lloyd(points, init, max_iter=max_iter, tol=tol))
    best = candidates[0]
    for cand in candidates[1:]:
        if cand.wcss < best.wcss:
            best = cand
    return best


def wcss_curve(
    points: PointSet, k_max: int, seed: int, n_restarts: int = N_RESTARTS
) -> list[float]:
    """Best WCSS for k = 1..min(k_max, n_points); non-increasing in k."""
    if k_max < 1:
        raise ParameterError("k_max must be >= 1")
    top = min(k_max, points.n_points)
    return [kmeans(points, k, seed, n_restarts=n_restarts).wcss for k in range(1, top + 1)]


def _elbow(curve: list[float], elbow_ratio: float, terminal_ratio: float) -> int:
    start = curve[0]
    if start <= 0.0:
        return 1
    for i in range(len(curve) - 1):
        if curve[i] <= terminal_ratio * start:
            return i + 1
        if (curve[i] - curve[i + 1]) / curve[i] < elbow_ratio:
            return i + 1
    return len(curve)


def select_cluster_count(
    points: PointSet,
    k_max: int,
    elbow_ratio: float,
    seed: int,
    degenerate_tol: float = DEGENERATE_TOL,
    degenerate_rel: float = DEGENERATE_REL,
    terminal_ratio: float = TERMINAL_RATIO,
) -> int:
    """Elbow rule over the WCSS curve.

    Returns the smallest k whose relative drop (J_k - J_{k+1}) / J_k falls
    below ``elbow_ratio``. A J_k of zero is terminal; since float costs of a
    near-identical cluster never reach exactly zero, "zero" means collapsed
    below ``terminal_ratio`` of the k=1 cost.

    Near-identical point sets short-circuit to 1: "near-identical" means the
    max pairwise distance is below ``degenerate_tol`` absolutely, or below
    ``degenerate_rel`` of the points' median norm. The relative form is what
    makes one cluster the steady answer for honest rounds, whose updates
    agree to within a learning-rate-sized step, while noised updates land
    orders of magnitude apart.
    """
    if not 0 < elbow_ratio < 1:
        raise ParameterError("elbow_ratio must be in (0, 1)")
    if points.n_points == 1:
        return 1
    scale = float(np.median(np.sqrt((points.matrix**2).sum(axis=1))))
    if _max_pairwise_distance(points) < max(degenerate_tol, degenerate_rel * scale):
        return 1
    return _elbow(wcss_curve(points, k_max, seed), elbow_ratio, terminal_ratio)


def _max_pairwise_distance(points: PointSet) -> float:
    m = points.matrix
    best = 0.0
    for i in range(len(m) - 1):
        d = ((m[i + 1 :] - m[i]) ** 2).sum(axis=1).max()
        best = max(best, float(d))
    return float(np.sqrt(best))


def label_clusters(
    points: PointSet, clustering: Clustering, prev_global: ParameterVector
) -> ClusterVerdict:
    """Split submitted clients into benign and adversaries.

    With one cluster everyone is benign. Otherwise the benign cluster is the
    non-empty one whose centroid sits nearest ``prev_global`` (ties prefer
    the larger cluster, then the lower index); members of every other
    cluster are flagged.
    """
    if prev_global.dim != points.dim:
        raise ShapeError(
            f"previous global dimension {prev_global.dim} does not match "
            f"point dimension {points.dim}"
        )
    members: dict[int, list[int]] = {j: [] for j in range(clustering.k)}
    for cid in points.client_ids:
        members[clustering.assignments[cid]].append(cid)
    if clustering.k == 1:
        return ClusterVerdict(
            benign_cluster=0,
            adversary_clusters=frozenset(),
            benign_ids=frozenset(points.client_ids),
            adversary_ids=frozenset(),
            dissimilarity=0.0,
        )
    occupied = [j for j in range(clustering.k) if members[j]]
    gaps = ((clustering.centroids - prev_global.values) ** 2).sum(axis=1)
    benign = min(occupied, key=lambda j: (gaps[j], -len(members[j]), j))
    adversary_clusters = frozenset(j for j in occupied if j != benign)
    benign_rows = points.matrix[[points.client_ids.index(c) for c in members[benign]]]
    worst = 0.0
    for j in adversary_clusters:
        rows = points.matrix[[points.client_ids.index(c) for c in members[j]]]
        worst = max(worst, dissimilarity(benign_rows, rows))
    return ClusterVerdict(
        benign_cluster=benign,
        adversary_clusters=adversary_clusters,
        benign_ids=frozenset(members[benign]),
        adversary_ids=frozenset(c for j in adversary_clusters for c in members[j]),
        dissimilarity=worst,
    )


def dissimilarity(cluster_a: np.ndarray, cluster_b: np.ndarray) -> float:
    """Sum over coordinates of squared centroid differences.

    Equals the squared Euclidean distance between the two cluster centroids;
    it explodes when one cluster holds heavily noised updates.
    """
    a = np.asarray(cluster_a, dtype=np.float64)
    b = np.asarray(cluster_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] == 0 or b.shape[0] == 0:
        raise ParameterError("both clusters must be non-empty 2-D point arrays")
    if a.shape[1] != b.shape[1]:
        raise ShapeError("cluster point dimensions differ")
    gap = a.mean(axis=0) - b.mean(axis=0)
    return float(gap @ gap)
