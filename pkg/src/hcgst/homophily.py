"""Soft-label homophily estimation and binned homophily-ratio distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph


@dataclass(frozen=True)
class HomophilyDistribution:
    """Per-bin node counts (or selection-weighted masses) over N even homophily intervals."""

    n_bins: int
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.float64)
        object.__setattr__(self, "counts", counts)
        if counts.shape != (self.n_bins,):
            raise ValueError(f"counts must have shape ({self.n_bins},), got {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("bin counts must be non-negative")

    @property
    def total(self) -> float:
        return float(self.counts.sum())


@dataclass(frozen=True)
class TargetDistribution:
    """Per-bin pseudo-node quotas for the current stage (entries clamped at 0)."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.float64)
        object.__setattr__(self, "counts", counts)
        if np.any(counts < 0):
            raise ValueError("target entries must be non-negative")

    @property
    def n_bins(self) -> int:
        return self.counts.shape[0]


def bin_index(ratios, n_bins: int) -> np.ndarray:
    """Map ratios in [0, 1] to 0-based bin indices over N even intervals.

    Intervals are [(i-1)/N, i/N) except the last, which is closed so that a
    ratio of exactly 1.0 lands in bin N.
    """
    ratios = np.atleast_1d(np.asarray(ratios, dtype=np.float64))
    if n_bins < 1:
        raise ValueError(f"bin count must be >= 1, got {n_bins}")
    if ratios.size and (ratios.min() < 0.0 or ratios.max() > 1.0):
        bad = ratios[(ratios < 0.0) | (ratios > 1.0)][0]
        raise ValueError(f"homophily ratio {bad} outside [0, 1]")
    edges = np.arange(1, n_bins, dtype=np.float64) / n_bins
    return np.searchsorted(edges, ratios, side="right")


def bin_distribution(ratios, n_bins: int) -> HomophilyDistribution:
    """Histogram of homophily ratios over N even-width bins."""
    idx = bin_index(ratios, n_bins)
    counts = np.bincount(idx, minlength=n_bins).astype(np.float64)
    return HomophilyDistribution(n_bins=n_bins, counts=counts)


def _normalized_rows(soft_labels: np.ndarray) -> np.ndarray:
    soft = np.asarray(soft_labels, dtype=np.float64)
    if np.any(soft < 0):
        raise ValueError("soft labels must be non-negative")
    norms = np.linalg.norm(soft, axis=1)
    zero = np.nonzero(norms == 0)[0]
    if zero.size:
        raise ValueError(f"soft-label row for node {int(zero[0])} has zero norm")
    return soft / norms[:, None]


def estimate_node_homophily(soft_labels, graph: Graph, node: int) -> float:
    """Mean cosine similarity between a node's soft label and its neighbors'.

    Non-negative vectors keep the result in [0, 1]; isolated nodes are 0 by
    convention.
    """
    nb = graph.neighbors[node]
    if nb.size == 0:
        return 0.0
    unit = _normalized_rows(soft_labels)
    sims = unit[nb] @ unit[node]
    return float(np.clip(np.mean(sims), 0.0, 1.0))


def estimate_homophily_profile(soft_labels, graph: Graph, label_override=None) -> np.ndarray:
    """Estimated homophily ratio for every node in one pass.

    ``label_override`` maps node id -> class id; those rows are replaced by
    one-hot vectors before estimation, both as sources and as neighbors. Used
    to pin (pseudo-)labeled nodes to their known labels.
    """
    soft = np.array(soft_labels, dtype=np.float64, copy=True)
    if label_override:
        c = soft.shape[1]
        nodes = np.fromiter(label_override.keys(), dtype=np.int64)
        labs = np.fromiter((label_override[int(v)] for v in nodes), dtype=np.int64)
        if np.any((labs < 0) | (labs >= c)):
            raise ValueError("override label outside [0, c)")
        soft[nodes] = 0.0
        soft[nodes, labs] = 1.0
    unit = _normalized_rows(soft)
    out = np.zeros(graph.n, dtype=np.float64)
    for v in range(graph.n):
        nb = graph.neighbors[v]
        if nb.size:
            out[v] = np.clip(np.mean(unit[nb] @ unit[v]), 0.0, 1.0)
    return out


def estimate_distribution(soft_labels, graph: Graph, node_set, n_bins: int,
                          label_override=None) -> HomophilyDistribution:
    """Binned estimated homophily ratios for the given node set."""
    node_set = np.asarray(node_set, dtype=np.int64)
    if node_set.size == 0:
        return HomophilyDistribution(n_bins=n_bins, counts=np.zeros(n_bins))
    profile = estimate_homophily_profile(soft_labels, graph, label_override)
    return bin_distribution(profile[node_set], n_bins)


def write_distribution_csv(dist, path) -> None:
    """Serialize a binned distribution as ``bin_index,count`` rows."""
    counts = np.asarray(getattr(dist, "counts", dist), dtype=np.float64)
    with open(path, "w", newline="\n") as f:
        f.write("bin_index,count\n")
        for i, count in enumerate(counts):
            f.write(f"{i},{float(count)!r}\n")


def target_distribution(global_dist: HomophilyDistribution, local_counts, k: int) -> TargetDistribution:
    """Per-bin number of new pseudo-nodes needed to pull the local distribution
    toward the global one after adding k nodes.

    target_i = max(ceil(fr_i * (k + |local|) - local_i), 0) with fr_i the
    global bin frequency.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    g = np.asarray(getattr(global_dist, "counts", global_dist), dtype=np.float64)
    local = np.asarray(getattr(local_counts, "counts", local_counts), dtype=np.float64)
    if g.shape != local.shape:
        raise ValueError(f"global and local bin counts differ in length: {g.shape} vs {local.shape}")
    total_g = g.sum()
    if total_g <= 0:
        raise ValueError("global distribution has zero total count")
    fr = g / total_g
    budget = k + local.sum()
    raw = np.ceil(fr * budget - local)
    return TargetDistribution(counts=np.maximum(raw, 0.0))
