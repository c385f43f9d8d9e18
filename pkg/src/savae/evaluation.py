"""Evaluation protocols over exported document representations: retrieval
precision-recall, internal clustering indices, word-embedding neighbor
inspection and a logistic-regression linear probe.

All distances are cosine distances; clusters are given by gold labels, no
clustering algorithm is run.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateCentroids,
    DegenerateClusters,
    DegenerateLabels,
    UnknownToken,
)
from .numerics import RngStream, sigmoid
from .training import TrainConfig, AdamState, adam_step

__all__ = [
    "ClusterMetrics",
    "DEFAULT_RECALL_GRID",
    "PrCurve",
    "ProbeConfig",
    "cosine_distance",
    "davies_bouldin",
    "dunn",
    "embedding_spaces",
    "linear_probe",
    "nearest_words",
    "retrieval_pr",
    "silhouette",
]

DEFAULT_RECALL_GRID = (
    0.0001,
    0.0005,
    0.001,
    0.005,
    0.01,
    0.05,
    0.1,
    0.2,
    0.3,
    0.4,
    0.5,
    0.6,
    0.7,
    0.8,
    0.9,
    1.0,
)


def cosine_distance(a, b):
    """1 - cos(a, b); 1 if either vector has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 1.0
    return 1.0 - float(a @ b) / (na * nb)


def _cosine_distance_rows(A, B):
    """Pairwise cosine distances between rows; zero-norm rows give 1."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    dots = A @ B.T
    denom = np.outer(na, nb)
    out = np.ones_like(dots)
    ok = denom > 0
    out[ok] = 1.0 - dots[ok] / denom[ok]
    return out


@dataclass
class PrCurve:
    recall: tuple
    precision: np.ndarray
    n_queries: int
    skipped: int

    def to_csv(self):
        lines = ["recall,precision"]
        for r, p in zip(self.recall, self.precision):
            lines.append(f"{r},{p:.6f}")
        return "\n".join(lines) + "\n"


@dataclass
class ClusterMetrics:
    davies_bouldin: tuple
    dunn: float
    silhouette: tuple

    def report(self):
        db_m, db_s = self.davies_bouldin
        sil_m, sil_s = self.silhouette
        return (
            f"davies_bouldin_mean={db_m:.6f}\n"
            f"davies_bouldin_std={db_s:.6f}\n"
            f"dunn={self.dunn:.6f}\n"
            f"silhouette_mean={sil_m:.6f}\n"
            f"silhouette_std={sil_s:.6f}\n"
        )


def retrieval_pr(
    query_reps,
    query_labels,
    index_reps,
    index_labels,
    relevance="exact",
    grid=DEFAULT_RECALL_GRID,
):
    """Average per-query precision at fixed recall levels.

    Index documents are ranked per query by descending cosine similarity
    (ties by index order). In ``exact`` mode a ranked document counts as a
    hit when its label set intersects the query's, and the precision at
    recall level rho is the hit fraction among the top ceil(rho * R) where
    R is the number of relevant index documents. In ``jaccard`` mode each
    ranked document contributes a graded gain Jaccard(query labels, doc
    labels); precision at rank r is cumulative gain / r and recall is
    cumulative gain over the total achievable gain.

    Queries with no relevant document (R = 0, or zero total gain) are
    skipped and counted in ``skipped``.
    """
    if relevance not in ("exact", "jaccard"):
        raise ValueError(f"unknown relevance mode: {relevance}")
    query_reps = np.asarray(query_reps, dtype=np.float64)
    index_reps = np.asarray(index_reps, dtype=np.float64)
    if len(query_reps) == 0 or len(index_reps) == 0:
        raise ValueError("queries and index must be non-empty")
    grid = tuple(grid)
    if any(not (0 < g <= 1) for g in grid) or list(grid) != sorted(set(grid)):
        raise ValueError("recall grid must be strictly ascending in (0, 1]")
    dists = _cosine_distance_rows(query_reps, index_reps)
    n_index = len(index_reps)
    index_sets = [frozenset(ls) for ls in index_labels]
    acc = np.zeros(len(grid))
    used = 0
    skipped = 0
    for qi, qlabels in enumerate(query_labels):
        qset = frozenset(qlabels)
        order = np.argsort(dists[qi], kind="stable")
        if relevance == "exact":
            rel = np.array([bool(qset & index_sets[j]) for j in order], dtype=np.float64)
            R = int(rel.sum())
            if R == 0:
                skipped += 1
                continue
            cum = np.cumsum(rel)
            ranks = np.minimum(np.ceil(np.array(grid) * R).astype(int), n_index)
            ranks = np.maximum(ranks, 1)
            acc += cum[ranks - 1] / ranks
        else:
            gains = np.array(
                [
                    len(qset & index_sets[j]) / len(qset | index_sets[j])
                    if (qset | index_sets[j])
                    else 0.0
                    for j in order
                ]
            )
            total = gains.sum()
            if total == 0.0:
                skipped += 1
                continue
            cum = np.cumsum(gains)
            recall = cum / total
            # slack absorbs round-off when a rational recall sits exactly on
            # a grid level (e.g. 0.5 computed as 0.49999999999999994)
            ranks = np.searchsorted(recall, np.array(grid) - 1e-9, side="left")
            ranks = np.minimum(ranks, n_index - 1)
            acc += cum[ranks] / (ranks + 1)
        used += 1
    if used == 0:
        raise DegenerateLabels("every query was skipped (no relevant documents)")
    return PrCurve(recall=grid, precision=acc / used, n_queries=used, skipped=skipped)


def _clusters(reps, labels):
    reps = np.asarray(reps, dtype=np.float64)
    if len(reps) != len(labels):
        raise ValueError("representation/label count mismatch")
    order = sorted(set(labels), key=str)
    members = {lab: np.flatnonzero([l == lab for l in labels]) for lab in order}
    if len(order) < 2:
        raise DegenerateClusters("need at least 2 clusters")
    centroids = np.stack([reps[members[lab]].mean(axis=0) for lab in order])
    return reps, order, members, centroids


def _dispersions(reps, order, members, centroids):
    """Mean cosine distance of each cluster's members to its centroid."""
    return np.array(
        [
            _cosine_distance_rows(reps[members[lab]], centroids[i : i + 1]).mean()
            for i, lab in enumerate(order)
        ]
    )


def davies_bouldin(reps, labels):
    """(mean, std over clusters) of the Davies-Bouldin per-cluster scores."""
    reps, order, members, centroids = _clusters(reps, labels)
    pi = _dispersions(reps, order, members, centroids)
    cd = _cosine_distance_rows(centroids, centroids)
    n = len(order)
    off = ~np.eye(n, dtype=bool)
    if np.any(cd[off] == 0.0):
        raise DegenerateCentroids("coincident cluster centroids")
    scores = np.array(
        [max((pi[i] + pi[j]) / cd[i, j] for j in range(n) if j != i) for i in range(n)]
    )
    return float(scores.mean()), float(scores.std())


def dunn(reps, labels):
    """Smallest centroid separation over largest cluster dispersion."""
    reps, order, members, centroids = _clusters(reps, labels)
    pi = _dispersions(reps, order, members, centroids)
    if pi.max() == 0.0:
        raise DegenerateClusters("all clusters have zero dispersion")
    cd = _cosine_distance_rows(centroids, centroids)
    n = len(order)
    min_sep = min(cd[i, j] for i in range(n) for j in range(i + 1, n))
    return float(min_sep / pi.max())


def silhouette(reps, labels):
    """(mean, std over clusters) of cluster-balanced silhouette scores.

    Per point: (distance to closest wrong centroid - distance to own
    centroid) / max of the two; points coinciding with both centroids
    score 0. Per-cluster scores are the means over members.
    """
    reps, order, members, centroids = _clusters(reps, labels)
    d = _cosine_distance_rows(reps, centroids)  # (n_points, n_clusters)
    cluster_scores = []
    for i, lab in enumerate(order):
        idx = members[lab]
        a = d[idx, i]
        others = np.delete(d[idx], i, axis=1)
        bmin = others.min(axis=1)
        denom = np.maximum(a, bmin)
        s = np.where(denom > 0, (bmin - a) / np.where(denom > 0, denom, 1.0), 0.0)
        cluster_scores.append(s.mean())
    cluster_scores = np.asarray(cluster_scores)
    return float(cluster_scores.mean()), float(cluster_scores.std())


def embedding_spaces(params, config):
    """Word-embedding matrices available for neighbor inspection."""
    spaces = {"global": params.X}
    if config.mode == "savae":
        spaces["local"] = params.V_local
    return spaces


def nearest_words(query, vocab, embeddings, n=5):
    """``n`` nearest vocabulary tokens to ``query`` by cosine distance.

    The query itself is excluded; ties break by vocabulary id.
    """
    if query not in vocab:
        raise UnknownToken(f"token not in vocabulary: {query!r}")
    qid = vocab.index[query]
    dists = _cosine_distance_rows(embeddings[qid : qid + 1], embeddings)[0]
    order = np.argsort(dists, kind="stable")
    out = []
    for j in order:
        if j == qid:
            continue
        out.append(vocab.tokens[j])
        if len(out) == n:
            break
    return out


@dataclass
class ProbeConfig:
    learning_rate: float = 0.001
    epochs: int = 100
    batch_size: int = 256
    seed: int = 0


def linear_probe(train_reps, train_labels, test_reps, test_labels, config=None):
    """Logistic-regression probe on frozen representations; test accuracy.

    Trained by Adam on the mean log-likelihood of binary labels.
    """
    if config is None:
        config = ProbeConfig()
    X = np.asarray(train_reps, dtype=np.float64)
    y = np.asarray(train_labels, dtype=np.float64)
    Xt = np.asarray(test_reps, dtype=np.float64)
    yt = np.asarray(test_labels, dtype=np.float64)
    classes = set(np.unique(y))
    if not classes <= {0.0, 1.0}:
        raise DegenerateLabels(f"labels must be binary 0/1, got {sorted(classes)}")
    if len(classes) < 2:
        raise DegenerateLabels("training set contains a single class")
    params = {"w": np.zeros(X.shape[1]), "b": np.zeros(1)}
    state = AdamState.for_params(params)
    adam_cfg = TrainConfig(
        learning_rate=config.learning_rate,
        epochs=config.epochs,
        batch_size=config.batch_size,
        seed=config.seed,
    )
    rng = RngStream(config.seed)
    n = len(X)
    for epoch in range(config.epochs):
        perm = rng.substream(epoch).permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            xb, yb = X[idx], y[idx]
            p = sigmoid(xb @ params["w"] + params["b"][0])
            resid = yb - p
            grads = {
                "w": xb.T @ resid / len(idx),
                "b": np.array([resid.mean()]),
            }
            adam_step(params, grads, state, adam_cfg)
    pred = sigmoid(Xt @ params["w"] + params["b"][0]) >= 0.5
    return float(np.mean(pred == (yt >= 0.5)))
