"""Self-training stage loop, baseline/ablation variants, and training-bias metrics.

One run: train a backbone on the clean labels, then repeat select -> label ->
retrain stages. Each stage forms a high-confidence candidate set, estimates
the homophily-ratio distributions, optimizes the selection vector against the
global distribution, pseudo-labels the chosen nodes through the multi-hop
mixing rule, and retrains the dual-head model. The model with the best
validation accuracy across stages is the final one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import Graph, NodePartition, k_hop_adjacency, true_homophily_profile
from .homophily import bin_distribution, estimate_homophily_profile, target_distribution
from .metrics import CmdConfig, cmd, kl_divergence
from .model import TrainConfig, forward, init_params, train_dual
from .pseudolabel import mix_outputs, assign_pseudo_labels
from .selection import (PgdConfig, SelectionProblem, candidate_set, optimize_selection, top_k)

logger = logging.getLogger(__name__)

VARIANTS = ("hcgst", "st_confidence", "no_selection", "no_multihop",
            "no_dualhead", "backbone_only", "cmd_only")


@dataclass
class RunConfig:
    stages: int = 10
    k_per_stage: int | None = None  # None: match the labeled-set size
    delta_c: float = 0.65
    delta_h: float = 0.4
    lambda_s: float = 2.0
    lambda_d: float = 0.09
    n_bins: int = 10
    hop: int = 2
    variant: str = "hcgst"
    seed: int = 0
    hidden: int = 32
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.stages < 1:
            raise ValueError(f"stages must be >= 1, got {self.stages}")
        if self.k_per_stage is not None and self.k_per_stage < 1:
            raise ValueError(f"k_per_stage must be >= 1, got {self.k_per_stage}")
        if not 0 < self.delta_c < 1:
            raise ValueError(f"delta_c must lie in (0, 1), got {self.delta_c}")
        if self.delta_h < 0:
            raise ValueError(f"delta_h must be >= 0, got {self.delta_h}")
        if self.lambda_s < 0 or self.lambda_d < 0:
            raise ValueError("lambda_s and lambda_d must be >= 0")
        if self.n_bins < 1 or self.hop < 1:
            raise ValueError("n_bins and hop must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    def to_dict(self) -> dict:
        return {
            "stages": self.stages, "k_per_stage": self.k_per_stage,
            "delta_c": self.delta_c, "delta_h": self.delta_h,
            "lambda_s": self.lambda_s, "lambda_d": self.lambda_d,
            "n_bins": self.n_bins, "hop": self.hop, "variant": self.variant,
            "seed": self.seed, "hidden": self.hidden,
            "train": {"epochs": self.train.epochs, "learning_rate": self.train.learning_rate,
                      "weight_decay": self.train.weight_decay},
        }


@dataclass
class StageReport:
    stage: int
    selected: list
    assigned_labels: list
    selected_multi_hop: list   # per selected node: labeled from the multi-hop output?
    selected_confidence: list  # per selected node: max softmax at selection time
    n_candidates: int
    n_multi_hop: int
    pseudo_mean_est_h: float
    pseudo_mean_true_h: float
    global_mean_est_h: float
    kl_local_global_true: float
    kl_local_global_est: float
    cmd_global_local: float
    val_acc: float
    test_acc: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class BinReport:
    bin_acc_backbone: list   # per-bin accuracy, None where the bin has no test nodes
    bin_acc_st: list
    deltas: list             # self-trained minus backbone over non-empty bins
    tpv: float
    npv: float
    ppv: float
    acc_backbone: float
    acc_st: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class RunReport:
    variant: str
    seed: int
    config: dict
    stage_reports: list
    best_stage: int
    val_acc: float
    test_acc: float
    bin_report: BinReport
    final_pseudo_count: int
    final_kl_true: float
    final_kl_est: float
    pseudo_mean_est_h: float
    global_mean_est_h: float
    pseudo_mean_true_h: float
    global_mean_true_h: float
    params: object = field(default=None, repr=False)  # model state, excluded from to_dict

    def to_dict(self) -> dict:
        return {
            "variant": self.variant, "seed": self.seed, "config": self.config,
            "stages": [s.to_dict() for s in self.stage_reports],
            "best_stage": self.best_stage, "val_acc": self.val_acc, "test_acc": self.test_acc,
            "bin_report": self.bin_report.to_dict(),
            "final_pseudo_count": self.final_pseudo_count,
            "final_kl_true": self.final_kl_true, "final_kl_est": self.final_kl_est,
            "pseudo_mean_est_h": self.pseudo_mean_est_h, "global_mean_est_h": self.global_mean_est_h,
            "pseudo_mean_true_h": self.pseudo_mean_true_h, "global_mean_true_h": self.global_mean_true_h,
        }


def per_bin_accuracy(predictions, truth, true_homophily, n_bins: int, test_set) -> np.ndarray:
    """Accuracy among test nodes per true-homophily bin; NaN flags empty bins."""
    from .homophily import bin_index

    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    test_set = np.asarray(test_set, dtype=np.int64)
    idx = bin_index(np.asarray(true_homophily)[test_set], n_bins)
    correct = predictions[test_set] == truth[test_set]
    out = np.full(n_bins, np.nan)
    for b in range(n_bins):
        members = idx == b
        if members.any():
            out[b] = float(np.mean(correct[members]))
    return out


def bias_metrics(acc_st_bins, acc_backbone_bins):
    """(TPV, NPV, PPV): mean per-bin accuracy change overall, over worsened bins,
    and over improved bins. Bins flagged NaN on either side are excluded; an
    empty worsened (improved) set gives NPV (PPV) of 0."""
    st = np.asarray(acc_st_bins, dtype=np.float64)
    back = np.asarray(acc_backbone_bins, dtype=np.float64)
    if st.shape != back.shape:
        raise ValueError("bin accuracy vectors must be co-indexed")
    keep = ~(np.isnan(st) | np.isnan(back))
    deltas = st[keep] - back[keep]
    if deltas.size == 0:
        return 0.0, 0.0, 0.0
    tpv = float(np.mean(deltas))
    neg = deltas[deltas < 0]
    pos = deltas[deltas > 0]
    npv = float(np.mean(neg)) if neg.size else 0.0
    ppv = float(np.mean(pos)) if pos.size else 0.0
    return tpv, npv, ppv


@dataclass(frozen=True)
class _Knobs:
    optimized_selection: bool
    lambda_s: float
    delta_h: float
    dual_head: bool
    stages: int


def _variant_knobs(cfg: RunConfig) -> _Knobs:
    v = cfg.variant
    return _Knobs(
        optimized_selection=v in ("hcgst", "cmd_only", "no_multihop", "no_dualhead"),
        lambda_s=0.0 if v == "cmd_only" else cfg.lambda_s,
        delta_h=0.0 if v in ("st_confidence", "no_multihop") else cfg.delta_h,
        dual_head=v in ("hcgst", "cmd_only", "no_selection", "no_multihop"),
        stages=0 if v == "backbone_only" else cfg.stages,
    )


def _accuracy(predictions, truth, idx) -> float:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        return float("nan")
    return float(np.mean(np.asarray(predictions)[idx] == np.asarray(truth)[idx]))


def run_variant(graph: Graph, partition: NodePartition, cfg: RunConfig) -> RunReport:
    """Dispatch a run for cfg.variant (rejects unknown variants)."""
    if cfg.variant not in VARIANTS:
        raise ValueError(f"unknown variant {cfg.variant!r}; expected one of {VARIANTS}")
    return run_self_training(graph, partition, cfg)


def run_self_training(graph: Graph, partition: NodePartition, cfg: RunConfig) -> RunReport:
    """Execute the full self-training workflow and report per-stage and per-bin results.

    The partition is copied, never mutated. Stages stop early when validation
    accuracy fails to improve for two consecutive stages; with an empty
    validation set every stage runs and the last model wins.
    """
    if graph.labels is None:
        raise ValueError("self-training requires ground-truth labels for the labeled set")
    if partition.labeled.size == 0:
        raise ValueError("labeled set must be non-empty")

    knobs = _variant_knobs(cfg)
    part = NodePartition(labeled=partition.labeled.copy(), validation=partition.validation.copy(),
                         unlabeled=partition.unlabeled.copy(), pseudo=partition.pseudo.copy(),
                         pseudo_stage=partition.pseudo_stage.copy())
    y_true = graph.labels
    x = graph.features
    n_bins = cfg.n_bins
    k_stage = cfg.k_per_stage if cfg.k_per_stage is not None else int(part.labeled.size)
    train_cfg = replace(cfg.train, lambda_dual=cfg.lambda_d if knobs.dual_head else 0.0, seed=cfg.seed)

    view1 = k_hop_adjacency(graph, 1)
    view_k = None
    test_set = part.unlabeled.copy()  # evaluation set is fixed before pseudo-labeling
    have_val = part.validation.size > 0
    val_pair = (part.validation, y_true[part.validation]) if have_val else None

    empty = (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))

    def fresh_params():
        return init_params(graph.d, cfg.hidden, graph.c, cfg.seed)

    params = train_dual(fresh_params(), graph, view1, (part.labeled, y_true[part.labeled]),
                        empty, empty, train_cfg, validation=val_pair)
    out = forward(params, view1, x)
    backbone_preds = np.argmax(out.logits, axis=1)
    val_acc = _accuracy(backbone_preds, y_true, part.validation)
    test_acc = _accuracy(backbone_preds, y_true, test_set)

    true_profile = true_homophily_profile(graph)
    global_true = bin_distribution(true_profile, n_bins)

    best_val, best_stage, best_params, best_preds = val_acc, 0, params, backbone_preds
    patience = 0
    pseudo_label_of = {}
    stage_reports = []
    est_h = np.zeros(graph.n)

    for s in range(1, knobs.stages + 1):
        out = forward(params, view1, x)
        soft = out.soft
        conf = soft.max(axis=1)

        override = {int(v): int(y_true[v]) for v in part.labeled}
        override.update({int(v): int(pseudo_label_of[int(v)]) for v in part.pseudo})
        est_h = estimate_homophily_profile(soft, graph, override)

        cands = candidate_set(soft, part.pseudo, part.labeled, part.validation, cfg.delta_c)
        if cands.size == 0:
            logger.warning("stage %d: empty candidate set, skipping", s)
            cur_preds = np.argmax(out.logits, axis=1)
            stage_reports.append(_stage_report(s, np.empty(0, np.int64), np.empty(0, np.int64),
                                               np.empty(0, bool), np.empty(0), 0, 0,
                                               part, est_h, true_profile, global_true,
                                               out.logits, n_bins,
                                               _accuracy(cur_preds, y_true, part.validation),
                                               _accuracy(cur_preds, y_true, test_set)))
            patience += 1
            if have_val and patience >= 2:
                break
            continue

        global_est = bin_distribution(est_h, n_bins)
        local_est = bin_distribution(est_h[part.train_pool()], n_bins)
        target = target_distribution(global_est, local_est, k_stage)

        if knobs.optimized_selection:
            problem = SelectionProblem(candidates=cands, cand_repr=out.logits[cands],
                                       global_repr=out.logits, cand_homophily=est_h[cands],
                                       target=target, k=k_stage, lambda_s=knobs.lambda_s,
                                       n_bins=n_bins)
            q = optimize_selection(problem, PgdConfig())
            selected = top_k(q.q, k_stage, cands, conf[cands])
        else:
            order = np.lexsort((cands, -conf[cands]))
            selected = cands[order[:k_stage]]

        if knobs.delta_h > 0:
            if view_k is None:
                view_k = k_hop_adjacency(graph, cfg.hop)
            multi_logits = forward(params, view_k, x).logits
        else:
            multi_logits = out.logits
        mixed = mix_outputs(out.logits, multi_logits, est_h, knobs.delta_h)

        new_labels = assign_pseudo_labels(mixed, selected)
        part.add_pseudo(selected, s)
        for v, lab in zip(selected, new_labels):
            pseudo_label_of[int(v)] = int(lab)

        leftovers = np.setdiff1d(cands, selected)
        if knobs.dual_head and leftovers.size:
            leftover_pair = (leftovers, assign_pseudo_labels(mixed, leftovers))
        else:
            leftover_pair = empty

        pseudo_y = np.array([pseudo_label_of[int(v)] for v in part.pseudo], dtype=np.int64)
        try:
            # retraining always uses the one-hop view; multi-hop outputs only label
            params = train_dual(fresh_params(), graph, view1, (part.labeled, y_true[part.labeled]),
                                (part.pseudo, pseudo_y), leftover_pair, train_cfg, validation=val_pair)
        except RuntimeError as err:
            raise RuntimeError(f"training diverged at stage {s}: {err}") from err

        new_logits = forward(params, view1, x).logits
        preds = np.argmax(new_logits, axis=1)
        val_acc = _accuracy(preds, y_true, part.validation)
        test_acc = _accuracy(preds, y_true, test_set)
        stage_reports.append(_stage_report(s, selected, new_labels,
                                           mixed.from_multi_hop[selected], conf[selected],
                                           cands.size, int(mixed.from_multi_hop[selected].sum()),
                                           part, est_h, true_profile, global_true,
                                           new_logits, n_bins, val_acc, test_acc))

        if not have_val or val_acc > best_val:
            best_val, best_stage, best_params, best_preds = val_acc, s, params, preds
            patience = 0
        else:
            patience += 1
        if have_val and patience >= 2:
            break

    bins_backbone = per_bin_accuracy(backbone_preds, y_true, true_profile, n_bins, test_set)
    bins_st = per_bin_accuracy(best_preds, y_true, true_profile, n_bins, test_set)
    tpv, npv, ppv = bias_metrics(bins_st, bins_backbone)
    keep = ~(np.isnan(bins_st) | np.isnan(bins_backbone))
    bin_report = BinReport(
        bin_acc_backbone=[None if np.isnan(v) else float(v) for v in bins_backbone],
        bin_acc_st=[None if np.isnan(v) else float(v) for v in bins_st],
        deltas=(bins_st[keep] - bins_backbone[keep]).tolist(),
        tpv=tpv, npv=npv, ppv=ppv,
        acc_backbone=_accuracy(backbone_preds, y_true, test_set),
        acc_st=_accuracy(best_preds, y_true, test_set),
    )

    local = part.train_pool()
    final_kl_true = kl_divergence(bin_distribution(true_profile[local], n_bins), global_true)
    final_kl_est = (kl_divergence(bin_distribution(est_h[local], n_bins),
                                  bin_distribution(est_h, n_bins))
                    if knobs.stages > 0 else float("nan"))
    return RunReport(
        variant=cfg.variant, seed=cfg.seed, config=cfg.to_dict(),
        stage_reports=stage_reports, best_stage=best_stage,
        val_acc=best_val, test_acc=bin_report.acc_st, bin_report=bin_report,
        final_pseudo_count=int(part.pseudo.size),
        final_kl_true=float(final_kl_true), final_kl_est=float(final_kl_est),
        pseudo_mean_est_h=float(np.mean(est_h[part.pseudo])) if part.pseudo.size else float("nan"),
        global_mean_est_h=float(np.mean(est_h)) if knobs.stages > 0 else float("nan"),
        pseudo_mean_true_h=float(np.mean(true_profile[part.pseudo])) if part.pseudo.size else float("nan"),
        global_mean_true_h=float(np.mean(true_profile)),
        params=best_params,
    )


def _stage_report(stage, selected, labels, multi_flags, confidences, n_cands, n_multi,
                  part, est_h, true_profile, global_true, logits, n_bins,
                  val_acc, test_acc) -> StageReport:
    local = part.train_pool()
    local_true = bin_distribution(true_profile[local], n_bins)
    local_est = bin_distribution(est_h[local], n_bins)
    global_est = bin_distribution(est_h, n_bins)
    has_pseudo = part.pseudo.size > 0
    return StageReport(
        stage=stage,
        selected=[int(v) for v in selected],
        assigned_labels=[int(v) for v in labels],
        selected_multi_hop=[bool(v) for v in multi_flags],
        selected_confidence=[float(v) for v in confidences],
        n_candidates=int(n_cands),
        n_multi_hop=int(n_multi),
        pseudo_mean_est_h=float(np.mean(est_h[part.pseudo])) if has_pseudo else float("nan"),
        pseudo_mean_true_h=float(np.mean(true_profile[part.pseudo])) if has_pseudo else float("nan"),
        global_mean_est_h=float(np.mean(est_h)),
        kl_local_global_true=float(kl_divergence(local_true, global_true)),
        kl_local_global_est=float(kl_divergence(local_est, global_est)),
        cmd_global_local=float(cmd(logits, logits[local], CmdConfig())),
        val_acc=float(val_acc),
        test_acc=float(test_acc),
    )


def stage_csv_rows(report: RunReport):
    """Flat rows (one per stage) for stages.csv emission."""
    header = ["variant", "seed", "stage", "n_selected", "n_candidates", "n_multi_hop",
              "pseudo_mean_est_h", "pseudo_mean_true_h", "global_mean_est_h",
              "kl_local_global_true", "kl_local_global_est", "cmd_global_local",
              "val_acc", "test_acc"]
    rows = []
    for s in report.stage_reports:
        rows.append([report.variant, report.seed, s.stage, len(s.selected), s.n_candidates,
                     s.n_multi_hop, s.pseudo_mean_est_h, s.pseudo_mean_true_h,
                     s.global_mean_est_h, s.kl_local_global_true, s.kl_local_global_est,
                     s.cmd_global_local, s.val_acc, s.test_acc])
    return header, rows


def bin_csv_rows(report: RunReport):
    """Flat rows (one per homophily bin) for bins.csv emission."""
    header = ["variant", "seed", "bin", "acc_backbone", "acc_self_trained", "delta"]
    rows = []
    br = report.bin_report
    for i, (b, s) in enumerate(zip(br.bin_acc_backbone, br.bin_acc_st)):
        delta = None if b is None or s is None else s - b
        rows.append([report.variant, report.seed, i, b, s, delta])
    return header, rows
