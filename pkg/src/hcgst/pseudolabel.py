"""Multi-hop output mixing and pseudo-label assignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MixedOutput:
    """Per-node output rows routed between one-hop and multi-hop model passes.

    ``from_multi_hop[i]`` is True exactly when the node's estimated homophily
    fell below the heterophily threshold.
    """

    rows: np.ndarray
    from_multi_hop: np.ndarray


def mix_outputs(z_one_hop, h_multi_hop, est_homophily, delta_h: float) -> MixedOutput:
    """Route nodes with estimated homophily below delta_h to the multi-hop output."""
    z1 = np.asarray(z_one_hop, dtype=np.float64)
    hk = np.asarray(h_multi_hop, dtype=np.float64)
    hh = np.asarray(est_homophily, dtype=np.float64)
    if z1.shape != hk.shape:
        raise ValueError(f"output shape mismatch: {z1.shape} vs {hk.shape}")
    if hh.shape[0] != z1.shape[0]:
        raise ValueError("homophily estimates must be co-indexed with output rows")
    mask = hh < delta_h
    return MixedOutput(rows=np.where(mask[:, None], hk, z1), from_multi_hop=mask)


def assign_pseudo_labels(mixed: MixedOutput, pseudo_nodes) -> np.ndarray:
    """Argmax label per pseudo-node from the mixed rows; ties take the lowest class."""
    nodes = np.asarray(pseudo_nodes, dtype=np.int64)
    if nodes.size == 0:
        return np.empty(0, dtype=np.int64)
    if nodes.min() < 0 or nodes.max() >= mixed.rows.shape[0]:
        raise ValueError("pseudo node id outside [0, n)")
    return np.argmax(mixed.rows[nodes], axis=1).astype(np.int64)
