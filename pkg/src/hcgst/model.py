"""Dual-head message-passing classifier.

Two rounds of symmetric-normalized aggregation form the feature extractor;
a main head produces the classification logits and an auxiliary pseudo head
(used only during training) shares the extractor. Gradients are computed by
hand and training is full-batch Adam, so runs are bit-reproducible from a
seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

_ADAM_B1 = 0.9
_ADAM_B2 = 0.999
_ADAM_EPS = 1e-8
_CKPT_MAGIC = b"HCGSTCKP"
_CKPT_VERSION = 1


@dataclass
class ModelParams:
    w1: np.ndarray        # (d, hidden)
    w2: np.ndarray        # (hidden, hidden)
    w_main: np.ndarray    # (hidden, c)
    w_pseudo: np.ndarray  # (hidden, c)
    hidden: int
    seed: int

    def copy(self) -> "ModelParams":
        return ModelParams(self.w1.copy(), self.w2.copy(), self.w_main.copy(),
                           self.w_pseudo.copy(), self.hidden, self.seed)

    def matrices(self):
        return {"w1": self.w1, "w2": self.w2, "w_main": self.w_main, "w_pseudo": self.w_pseudo}


@dataclass(frozen=True)
class ForwardOutput:
    hidden: np.ndarray         # (n, hidden) extractor output
    logits: np.ndarray         # (n, c) main-head logits
    soft: np.ndarray           # (n, c) row softmax of logits
    pseudo_logits: np.ndarray  # (n, c) pseudo-head logits, training only


@dataclass
class TrainConfig:
    epochs: int = 300
    learning_rate: float = 0.001
    lambda_dual: float = 0.09
    weight_decay: float = 5e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.lambda_dual < 0:
            raise ValueError(f"lambda_dual must be >= 0, got {self.lambda_dual}")


def init_params(d: int, hidden: int, c: int, seed: int) -> ModelParams:
    """Deterministic scaled-uniform initialization; same seed gives identical params."""
    if min(d, hidden, c) < 1:
        raise ValueError(f"all dimensions must be >= 1, got d={d} hidden={hidden} c={c}")
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return ModelParams(w1=glorot(d, hidden), w2=glorot(hidden, hidden),
                       w_main=glorot(hidden, c), w_pseudo=glorot(hidden, c),
                       hidden=hidden, seed=seed)


def softmax_rows(logits) -> np.ndarray:
    """Row-wise softmax with max-subtraction stabilization."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("logits contain non-finite entries")
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def soft_labels(output) -> np.ndarray:
    """Row-stochastic class probabilities from a forward output (or raw logits)."""
    if isinstance(output, ForwardOutput):
        return output.soft
    return softmax_rows(output)


def forward(params: ModelParams, view, features) -> ForwardOutput:
    """Two aggregation rounds with a ramp nonlinearity after the first layer."""
    x = np.asarray(features, dtype=np.float64)
    if view.n != x.shape[0]:
        raise ValueError(f"adjacency view has {view.n} nodes but features have {x.shape[0]} rows")
    if x.shape[1] != params.w1.shape[0]:
        raise ValueError(f"feature dim {x.shape[1]} does not match model input dim {params.w1.shape[0]}")
    a_hat = view.norm
    act1 = np.maximum(a_hat @ x @ params.w1, 0.0)
    h = (a_hat @ act1) @ params.w2
    logits = h @ params.w_main
    return ForwardOutput(hidden=h, logits=logits, soft=softmax_rows(logits),
                         pseudo_logits=h @ params.w_pseudo)


def predict(params: ModelParams, view, features) -> np.ndarray:
    """Argmax over main-head logits; ties resolve to the lowest class index."""
    return np.argmax(forward(params, view, features).logits, axis=1)


def _cross_entropy_rows(logits_rows, y):
    shifted = logits_rows - logits_rows.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    losses = log_z - shifted[np.arange(len(y)), y]
    grad_rows = softmax_rows(logits_rows)
    grad_rows[np.arange(len(y)), y] -= 1.0
    return float(losses.mean()), grad_rows / len(y)


def dual_loss_and_grads(params: ModelParams, view, features, main_idx, main_y,
                        pseudo_idx, pseudo_y, lambda_dual: float, weight_decay: float):
    """Training loss and parameter gradients.

    Loss = CE_main + lambda_dual * CE_pseudo + (wd/2) * (|w1|^2 + |w2|^2 + |w_main|^2).
    Weight decay deliberately skips the pseudo head so that lambda_dual = 0
    leaves it untouched. Returns (loss, grads dict, main logits).
    """
    x = np.asarray(features, dtype=np.float64)
    a_hat = view.norm
    x1 = a_hat @ x
    pre1 = x1 @ params.w1
    act1 = np.maximum(pre1, 0.0)
    x2 = a_hat @ act1
    h = x2 @ params.w2
    zm = h @ params.w_main

    n, c = zm.shape
    loss_main, d_rows = _cross_entropy_rows(zm[main_idx], main_y)
    dzm = np.zeros((n, c))
    dzm[main_idx] = d_rows

    loss = loss_main
    d_wp = np.zeros_like(params.w_pseudo)
    dh = dzm @ params.w_main.T
    if len(pseudo_idx):
        zp = h @ params.w_pseudo
        loss_pseudo, d_rows_p = _cross_entropy_rows(zp[pseudo_idx], pseudo_y)
        loss += lambda_dual * loss_pseudo
        dzp = np.zeros((n, c))
        dzp[pseudo_idx] = lambda_dual * d_rows_p
        d_wp = h.T @ dzp
        dh = dh + dzp @ params.w_pseudo.T

    d_wm = h.T @ dzm + weight_decay * params.w_main
    d_w2 = x2.T @ dh + weight_decay * params.w2
    dact1 = a_hat @ (dh @ params.w2.T)
    dpre1 = dact1 * (pre1 > 0)
    d_w1 = x1.T @ dpre1 + weight_decay * params.w1

    loss += 0.5 * weight_decay * (np.sum(params.w1**2) + np.sum(params.w2**2) + np.sum(params.w_main**2))
    grads = {"w1": d_w1, "w2": d_w2, "w_main": d_wm, "w_pseudo": d_wp}
    return loss, grads, zm


def _check_label_sets(name, nodes, labels, c):
    nodes = np.asarray(nodes, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if nodes.shape != labels.shape:
        raise ValueError(f"{name}: nodes and labels must be co-indexed")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"{name}: label outside [0, {c})")
    return nodes, labels


def train_dual(params: ModelParams, graph, view, clean_with_labels, pseudo_with_labels,
               leftover_with_labels, cfg: TrainConfig, validation=None) -> ModelParams:
    """Full-batch Adam on the dual-head objective.

    The main head trains on clean plus distribution-consistent pseudo-nodes;
    the pseudo head trains on the leftover candidates with weight
    ``lambda_dual``, feeding gradients into the shared extractor. When a
    validation (nodes, labels) pair is given the parameters with the best
    validation accuracy seen during training are returned, otherwise the
    final-epoch parameters.
    """
    c = params.w_main.shape[1]
    clean_idx, clean_y = _check_label_sets("clean set", *clean_with_labels, c=c)
    cons_idx, cons_y = _check_label_sets("consistent pseudo set", *pseudo_with_labels, c=c)
    left_idx, left_y = _check_label_sets("leftover set", *leftover_with_labels, c=c)
    if clean_idx.size == 0:
        raise ValueError("clean training set must be non-empty")
    all_train = np.concatenate([clean_idx, cons_idx, left_idx])
    if len(np.unique(all_train)) != all_train.size:
        raise ValueError("clean, consistent and leftover sets must be disjoint")

    main_idx = np.concatenate([clean_idx, cons_idx])
    main_y = np.concatenate([clean_y, cons_y])

    x = np.asarray(graph.features, dtype=np.float64)
    cur = params.copy()
    state_m = {k: np.zeros_like(v) for k, v in cur.matrices().items()}
    state_v = {k: np.zeros_like(v) for k, v in cur.matrices().items()}

    val_idx = val_y = None
    if validation is not None:
        val_idx, val_y = _check_label_sets("validation set", *validation, c=c)
    best = None  # (acc, params copy)

    for epoch in range(cfg.epochs):
        loss, grads, zm = dual_loss_and_grads(cur, view, x, main_idx, main_y,
                                              left_idx, left_y, cfg.lambda_dual, cfg.weight_decay)
        if not np.isfinite(loss):
            raise RuntimeError(f"non-finite training loss at epoch {epoch}")
        if val_idx is not None:
            acc = float(np.mean(np.argmax(zm[val_idx], axis=1) == val_y))
            if best is None or acc >= best[0]:  # ties prefer the later, better-fitted epoch
                best = (acc, cur.copy())
        t = epoch + 1
        mats = cur.matrices()
        for key, g in grads.items():
            state_m[key] = _ADAM_B1 * state_m[key] + (1 - _ADAM_B1) * g
            state_v[key] = _ADAM_B2 * state_v[key] + (1 - _ADAM_B2) * g * g
            m_hat = state_m[key] / (1 - _ADAM_B1**t)
            v_hat = state_v[key] / (1 - _ADAM_B2**t)
            mats[key] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)

    if val_idx is not None:
        zm = forward(cur, view, x).logits
        acc = float(np.mean(np.argmax(zm[val_idx], axis=1) == val_y))
        if best is None or acc >= best[0]:
            best = (acc, cur.copy())
        return best[1]
    return cur


def gradient_check(params: ModelParams, tiny_graph, cfg: TrainConfig, view=None, h: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central finite differences.

    Runs on a tiny instance; node labels come from the graph when present,
    otherwise from the config seed. Even nodes form the main set and odd
    nodes the leftover pseudo set.
    """
    from .graph import k_hop_adjacency

    if view is None:
        view = k_hop_adjacency(tiny_graph, 1)
    n = tiny_graph.n
    c = params.w_main.shape[1]
    if tiny_graph.labels is not None:
        y = tiny_graph.labels
    else:
        y = np.random.default_rng(cfg.seed).integers(0, c, size=n)
    nodes = np.arange(n)
    main_idx, main_y = nodes[0::2], y[0::2]
    pseudo_idx, pseudo_y = nodes[1::2], y[1::2]
    x = tiny_graph.features

    _, grads, _ = dual_loss_and_grads(params, view, x, main_idx, main_y,
                                      pseudo_idx, pseudo_y, cfg.lambda_dual, cfg.weight_decay)

    def loss_at(p):
        val, _, _ = dual_loss_and_grads(p, view, x, main_idx, main_y,
                                        pseudo_idx, pseudo_y, cfg.lambda_dual, cfg.weight_decay)
        return val

    worst = 0.0
    for key, mat in params.matrices().items():
        fd = np.zeros_like(mat)
        for idx in np.ndindex(mat.shape):
            probe = params.copy()
            probe.matrices()[key][idx] = mat[idx] + h
            up = loss_at(probe)
            probe.matrices()[key][idx] = mat[idx] - h
            down = loss_at(probe)
            fd[idx] = (up - down) / (2 * h)
        denom = np.maximum(np.maximum(np.abs(fd), np.abs(grads[key])), 1e-8)
        worst = max(worst, float(np.max(np.abs(fd - grads[key]) / denom)))
    return worst


def save_params(params: ModelParams, path) -> None:
    """Flat binary checkpoint: header (version, dims, seed) then row-major float64 matrices."""
    d, hidden = params.w1.shape
    c = params.w_main.shape[1]
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<Iqqqq", _CKPT_VERSION, d, hidden, c, params.seed))
        for key in ("w1", "w2", "w_main", "w_pseudo"):
            f.write(np.ascontiguousarray(params.matrices()[key], dtype=np.float64).tobytes())


def load_params(path) -> ModelParams:
    with open(path, "rb") as f:
        magic = f.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise ValueError(f"not a parameter checkpoint: bad magic {magic!r}")
        version, d, hidden, c, seed = struct.unpack("<Iqqqq", f.read(4 + 8 * 4))
        if version != _CKPT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")

        def mat(rows, cols):
            buf = f.read(8 * rows * cols)
            return np.frombuffer(buf, dtype=np.float64).reshape(rows, cols).copy()

        return ModelParams(w1=mat(d, hidden), w2=mat(hidden, hidden),
                           w_main=mat(hidden, c), w_pseudo=mat(hidden, c),
                           hidden=int(hidden), seed=int(seed))
