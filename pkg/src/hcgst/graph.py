"""Immutable graph container, k-hop adjacency views, and label-based homophily ratios."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Graph:
    """Undirected attributed graph with optional ground-truth labels.

    Edges are stored once per unordered pair with the smaller endpoint first;
    self-loops never appear. ``c`` is 0 when no labels are attached.
    """

    n: int
    edges: np.ndarray               # (m, 2) int64, row[0] < row[1]
    features: np.ndarray            # (n, d) float64
    labels: np.ndarray | None       # (n,) int64 or None
    c: int
    d: int
    degrees: np.ndarray = field(repr=False)
    neighbors: tuple = field(repr=False)  # per-node sorted int64 arrays

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def has_labels(self) -> bool:
        return self.labels is not None


def build_graph(edge_pairs, features, labels=None, n_classes=None) -> Graph:
    """Construct a :class:`Graph` from raw edge pairs and a feature matrix.

    Duplicate pairs (in either orientation) collapse to a single undirected
    edge and self-loops are dropped. The node count is the feature row count.

    Raises ValueError naming the offending record index for out-of-range
    endpoints or a label-length mismatch.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a 2-d matrix (n rows, d columns)")
    n, d = features.shape

    pairs = np.asarray(list(edge_pairs), dtype=np.int64).reshape(-1, 2)
    bad = np.nonzero((pairs < 0) | (pairs >= n))[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"edge record {i} = {tuple(pairs[i])} has endpoint outside [0, {n})")

    keep = pairs[:, 0] != pairs[:, 1]
    pairs = pairs[keep]
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    edges = np.unique(np.stack([lo, hi], axis=1), axis=0) if pairs.size else np.empty((0, 2), dtype=np.int64)

    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ValueError(f"labels has {labels.shape[0] if labels.ndim == 1 else labels.shape} entries, expected {n}")
        c = int(n_classes) if n_classes is not None else (int(labels.max()) + 1 if n else 0)
        bad_lab = np.nonzero((labels < 0) | (labels >= c))[0]
        if bad_lab.size:
            i = int(bad_lab[0])
            raise ValueError(f"label record {i} = {labels[i]} outside [0, {c})")
    else:
        c = int(n_classes) if n_classes is not None else 0

    neighbors = _neighbor_lists(n, edges)
    degrees = np.array([len(nb) for nb in neighbors], dtype=np.int64)
    return Graph(n=n, edges=edges, features=features, labels=labels, c=c, d=d,
                 degrees=degrees, neighbors=neighbors)


def _neighbor_lists(n, edges) -> tuple:
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    return tuple(np.array(sorted(nb), dtype=np.int64) for nb in adj)


@dataclass(frozen=True)
class AdjacencyView:
    """Neighbor structure at a fixed hop count.

    ``neighbors`` is the raw 0/1 structure (no self-connections), used for
    homophily computations. ``norm`` is the symmetric-degree-normalized
    matrix with self-loops added, used for message passing.
    """

    hop: int
    n: int
    neighbors: tuple = field(repr=False)
    norm: sp.csr_matrix = field(repr=False)

    def binary_matrix(self) -> sp.csr_matrix:
        rows, cols = [], []
        for i, nb in enumerate(self.neighbors):
            rows.extend([i] * len(nb))
            cols.extend(nb.tolist())
        data = np.ones(len(rows), dtype=np.float64)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))


def _binary_adjacency(graph: Graph) -> sp.csr_matrix:
    m = graph.edges.shape[0]
    rows = np.concatenate([graph.edges[:, 0], graph.edges[:, 1]]) if m else np.empty(0, dtype=np.int64)
    cols = np.concatenate([graph.edges[:, 1], graph.edges[:, 0]]) if m else np.empty(0, dtype=np.int64)
    data = np.ones(2 * m, dtype=np.float64)
    return sp.csr_matrix((data, (rows, cols)), shape=(graph.n, graph.n))


def _sym_normalize(binary: sp.csr_matrix) -> sp.csr_matrix:
    # A_hat = D^{-1/2} (B + I) D^{-1/2} with D the degree of B + I
    with_loops = (binary + sp.identity(binary.shape[0], format="csr")).tocsr()
    deg = np.asarray(with_loops.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    d_mat = sp.diags(inv_sqrt)
    return (d_mat @ with_loops @ d_mat).tocsr()


def k_hop_adjacency(graph: Graph, k: int) -> AdjacencyView:
    """Binarized k-th adjacency power with zeroed diagonal.

    k=1 returns the raw adjacency structure exactly.
    """
    if k < 1:
        raise ValueError(f"hop count must be >= 1, got {k}")
    binary = _binary_adjacency(graph)
    if k == 1:
        power = binary
    else:
        power = binary
        for _ in range(k - 1):
            power = power @ binary
        power = power.tocsr()
        power.setdiag(0)
        power.eliminate_zeros()
        power.data = np.ones_like(power.data)

    neighbors = []
    indptr, indices = power.indptr, power.indices
    for i in range(graph.n):
        neighbors.append(np.sort(indices[indptr[i]:indptr[i + 1]]).astype(np.int64))
    return AdjacencyView(hop=k, n=graph.n, neighbors=tuple(neighbors), norm=_sym_normalize(power))


def true_node_homophily(graph: Graph, node: int) -> float:
    """Fraction of a node's 1-hop neighbors sharing its label; 0 for isolated nodes."""
    if graph.labels is None:
        raise ValueError("graph has no labels; node homophily is undefined")
    nb = graph.neighbors[node]
    if nb.size == 0:
        return 0.0
    return float(np.mean(graph.labels[nb] == graph.labels[node]))


def true_homophily_profile(graph: Graph) -> np.ndarray:
    """Per-node homophily ratios over the whole graph (isolated nodes contribute 0)."""
    if graph.labels is None:
        raise ValueError("graph has no labels; homophily profile is undefined")
    out = np.zeros(graph.n, dtype=np.float64)
    for v in range(graph.n):
        nb = graph.neighbors[v]
        if nb.size:
            out[v] = np.mean(graph.labels[nb] == graph.labels[v])
    return out


def graph_homophily(graph: Graph) -> float:
    """Unweighted mean of node homophily ratios across all nodes."""
    return float(np.mean(true_homophily_profile(graph)))


@dataclass
class NodePartition:
    """Disjoint labeled / validation / unlabeled / pseudo node sets.

    Pseudo nodes move out of the unlabeled pool as stages select them; the
    pseudo set only grows and keeps per-node stage provenance.
    """

    labeled: np.ndarray
    validation: np.ndarray
    unlabeled: np.ndarray
    pseudo: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    pseudo_stage: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        self.labeled = np.asarray(self.labeled, dtype=np.int64)
        self.validation = np.asarray(self.validation, dtype=np.int64)
        self.unlabeled = np.asarray(self.unlabeled, dtype=np.int64)
        self.pseudo = np.asarray(self.pseudo, dtype=np.int64)
        self.pseudo_stage = np.asarray(self.pseudo_stage, dtype=np.int64)
        sets = [set(self.labeled), set(self.validation), set(self.unlabeled), set(self.pseudo)]
        total = sum(len(s) for s in sets)
        if len(set().union(*sets)) != total:
            raise ValueError("labeled/validation/unlabeled/pseudo sets must be pairwise disjoint")

    def add_pseudo(self, nodes, stage: int) -> None:
        nodes = np.asarray(nodes, dtype=np.int64)
        if not set(nodes).issubset(set(self.unlabeled)):
            raise ValueError("pseudo nodes must come from the unlabeled pool")
        self.unlabeled = np.setdiff1d(self.unlabeled, nodes)
        self.pseudo = np.concatenate([self.pseudo, nodes])
        self.pseudo_stage = np.concatenate([self.pseudo_stage, np.full(nodes.size, stage, dtype=np.int64)])

    def train_pool(self) -> np.ndarray:
        """Labeled plus pseudo nodes, in selection order."""
        return np.concatenate([self.labeled, self.pseudo])


def make_partition(n: int, labeled, validation) -> NodePartition:
    labeled = np.asarray(labeled, dtype=np.int64)
    validation = np.asarray(validation, dtype=np.int64)
    rest = np.setdiff1d(np.arange(n, dtype=np.int64), np.concatenate([labeled, validation]))
    return NodePartition(labeled=labeled, validation=validation, unlabeled=rest)


# --- directory format: edges.csv (header src,dst), features.csv, labels.csv ---

def save_graph_dir(graph: Graph, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "edges.csv", "w", newline="\n") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["src", "dst"])
        for a, b in graph.edges:
            w.writerow([int(a), int(b)])
    with open(path / "features.csv", "w", newline="\n") as f:
        w = csv.writer(f, lineterminator="\n")
        for row in graph.features:
            w.writerow([repr(float(x)) for x in row])
    if graph.labels is not None:
        with open(path / "labels.csv", "w", newline="\n") as f:
            w = csv.writer(f, lineterminator="\n")
            for y in graph.labels:
                w.writerow([int(y)])


def load_graph_dir(path) -> Graph:
    """Load a graph directory; directed inputs are symmetrized."""
    path = Path(path)
    feat_file = path / "features.csv"
    if not feat_file.exists():
        raise ValueError(f"missing features.csv under {path}")
    features = np.loadtxt(feat_file, delimiter=",", dtype=np.float64, ndmin=2)

    edges = []
    with open(path / "edges.csv", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["src", "dst"]:
            raise ValueError("edges.csv must start with header 'src,dst'")
        for row in reader:
            if not row:
                continue
            edges.append((int(row[0]), int(row[1])))

    labels = None
    lab_file = path / "labels.csv"
    if lab_file.exists():
        labels = np.loadtxt(lab_file, delimiter=",", dtype=np.int64, ndmin=1)
    return build_graph(edges, features, labels)
