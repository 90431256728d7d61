"""Tile grouping: Pearson correlation distances and agglomerative Ward linkage.

Each resulting cluster is treated as one base station.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .traffic import TraceSet


class UndefinedCorrelationError(ValueError):
    """Pearson correlation is undefined because a series has zero variance."""


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64)
        n = len(self.labels)
        if v.shape != (n, n):
            raise ValueError(f"distance matrix shape {v.shape} does not match {n} labels")
        if not np.array_equal(v, v.T):
            raise ValueError("distance matrix must be exactly symmetric")
        if np.any(np.diag(v) != 0) or np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("distances must be finite, non-negative, with a zero diagonal")
        v.setflags(write=False)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    distance: float
    new_size: int


@dataclass(frozen=True)
class ClusterAssignment:
    """Flat clustering of tiles.

    ``merge_history`` uses the usual dendrogram numbering: leaves are
    ``0..n-1`` and the cluster created by step ``s`` gets id ``n + s``.
    Cluster labels in ``labels`` are ``0..k-1``, ordered by each cluster's
    lowest tile position.
    """

    labels: Mapping[str, int]
    k: int
    merge_history: tuple[Merge, ...] = ()

    def members(self) -> list[list[str]]:
        out: list[list[str]] = [[] for _ in range(self.k)]
        for tile, c in self.labels.items():
            out[c].append(tile)
        return out


def pearson_corr(a: Sequence[float], b: Sequence[float]) -> float:
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("series must be 1-D, of equal length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant series")
    return float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def corr_distance_matrix(ts: TraceSet) -> DistanceMatrix:
    """``1 - rho`` between service-summed tile series; constant tiles sit at distance 1 from everyone."""
    n = len(ts.tiles)
    if n < 2:
        raise ValueError("need at least 2 tiles to cluster")
    series = ts.demand.sum(axis=1)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            try:
                d = 1.0 - pearson_corr(series[i], series[j])
            except UndefinedCorrelationError:
                d = 1.0
            values[i, j] = values[j, i] = d
    return DistanceMatrix(ts.tiles, values)


def ward_cluster(dm: DistanceMatrix, k: int) -> ClusterAssignment:
    """Agglomerative Ward linkage via the Lance-Williams update, cut at ``k`` clusters.

    O(n^3); fine for the few hundred tiles of a city-scale trace. Ties on the
    minimum distance go to the lexicographically smallest (left, right) pair
    of current cluster ids.
    """
    n = dm.n
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")

    d = dm.values.copy()
    size = {i: 1 for i in range(n)}
    members = {i: [i] for i in range(n)}
    # row/column of the working matrix currently holding each active cluster id
    slot = {i: i for i in range(n)}
    history: list[Merge] = []

    next_id = n
    while len(size) > k:
        active = sorted(size)
        best = None
        for a_pos, a in enumerate(active):
            row = d[slot[a]]
            for b in active[a_pos + 1 :]:
                dist = row[slot[b]]
                if best is None or dist < best[0]:
                    best = (dist, a, b)
        dist, a, b = best
        na, nb = size[a], size[b]
        sa, sb = slot[a], slot[b]
        for m in active:
            if m in (a, b):
                continue
            nm = size[m]
            sm = slot[m]
            sq = ((na + nm) * d[sa, sm] ** 2 + (nb + nm) * d[sb, sm] ** 2 - nm * dist**2) / (
                na + nb + nm
            )
            new = float(np.sqrt(max(sq, 0.0)))
            d[sa, sm] = d[sm, sa] = new
        # the merged cluster reuses a's slot
        slot[next_id] = sa
        size[next_id] = na + nb
        members[next_id] = members.pop(a) + members.pop(b)
        for old in (a, b):
            del size[old], slot[old]
        history.append(Merge(a, b, float(dist), na + nb))
        next_id += 1

    groups = sorted((sorted(m) for m in members.values()), key=lambda g: g[0])
    labels = {dm.labels[i]: c for c, g in enumerate(groups) for i in g}
    return ClusterAssignment(labels=labels, k=k, merge_history=tuple(history))


def cluster_name(c: int) -> str:
    return f"bs{c:02d}"


def aggregate_clusters(ts: TraceSet, ca: ClusterAssignment) -> TraceSet:
    """Sum member-tile demand per cluster; the output's tiles are ``bs00, bs01, ...``."""
    unknown = set(ca.labels) - set(ts.tiles)
    if unknown:
        raise KeyError(f"assignment names tiles absent from the traces: {sorted(unknown)[:5]}")
    uncovered = [t for t in ts.tiles if t not in ca.labels]
    if uncovered:
        raise KeyError(f"tiles without a cluster: {uncovered[:5]}")
    out = np.zeros((ca.k, len(ts.services), ts.n_ticks))
    for i, tile in enumerate(ts.tiles):
        out[ca.labels[tile]] += ts.demand[i]
    return TraceSet(ts.tick_seconds, tuple(cluster_name(c) for c in range(ca.k)), ts.services, out)


def save_assignment(ca: ClusterAssignment, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("tile_id", "cluster_id"))
        for tile, c in ca.labels.items():
            w.writerow((tile, c))


def save_merge_history(ca: ClusterAssignment, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("step", "left", "right", "distance", "new_size"))
        for step, m in enumerate(ca.merge_history):
            w.writerow((step, m.left, m.right, repr(m.distance), m.new_size))


def load_assignment(path: str | Path) -> ClusterAssignment:
    labels: dict[str, int] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            labels[row["tile_id"]] = int(row["cluster_id"])
    k = len(set(labels.values()))
    if set(labels.values()) != set(range(k)):
        raise ValueError("cluster ids must be 0..k-1")
    return ClusterAssignment(labels=labels, k=k)
