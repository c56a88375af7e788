import numpy as np
import pytest

from hcgst.homophily import TargetDistribution, bin_distribution
from hcgst.selection import (PgdConfig, SelectionProblem, candidate_set,
                             optimize_selection, selection_bin_mass,
                             selection_loss_and_grad, top_k)


def _random_problem(seed, m=8, k=3, r=3, lambda_s=1.0, n_bins=5):
    rng = np.random.default_rng(seed)
    cand_repr = rng.standard_normal((m, r))
    global_repr = rng.standard_normal((4 * m, r))
    hh = rng.random(m)
    target = TargetDistribution(rng.integers(0, k + 1, size=n_bins).astype(float))
    return SelectionProblem(candidates=np.arange(m, dtype=np.int64), cand_repr=cand_repr,
                            global_repr=global_repr, cand_homophily=hh, target=target,
                            k=k, lambda_s=lambda_s, n_bins=n_bins)


def test_candidate_set_uniform_soft_is_empty():
    soft = np.full((6, 4), 0.25)
    out = candidate_set(soft, [], [], [], delta_c=0.65)
    assert out.size == 0


def test_candidate_set_single_confident_node():
    soft = np.full((5, 2), 0.5)
    soft[3] = [0.9, 0.1]
    out = candidate_set(soft, [], [], [], delta_c=0.65)
    assert out.tolist() == [3]


def test_candidate_set_excludes_prior_pseudo_labeled_validation():
    soft = np.tile([0.9, 0.1], (6, 1))
    out = candidate_set(soft, prior_pseudo=[1], labeled=[2], validation=[3], delta_c=0.65)
    assert out.tolist() == [0, 4, 5]


def test_candidate_set_rejects_bad_threshold():
    with pytest.raises(ValueError):
        candidate_set(np.ones((2, 2)), [], [], [], delta_c=1.5)


def test_bin_mass_all_ones_matches_integer_binning():
    rng = np.random.default_rng(2)
    hh = rng.random(40)
    mass = selection_bin_mass(np.ones(40), hh, 10)
    assert mass.counts.tolist() == bin_distribution(hh, 10).counts.tolist()


def test_bin_mass_zeros():
    assert selection_bin_mass(np.zeros(5), np.linspace(0, 1, 5), 10).total == 0.0


def test_bin_mass_hand_fixture():
    mass = selection_bin_mass([0.3, 0.7], [0.05, 0.95], 10)
    expected = [0.3, 0, 0, 0, 0, 0, 0, 0, 0, 0.7]
    assert mass.counts.tolist() == expected


def test_bin_mass_linear_in_q():
    rng = np.random.default_rng(6)
    hh = rng.random(20)
    q = rng.random(20)
    base = selection_bin_mass(q, hh, 8).counts
    scaled = selection_bin_mass(0.25 * q, hh, 8).counts
    assert np.allclose(scaled, 0.25 * base, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_loss_gradient_matches_finite_differences(seed):
    problem = _random_problem(seed)
    rng = np.random.default_rng(100 + seed)
    q = rng.uniform(0.05, 0.95, size=8)
    _, grad, _ = selection_loss_and_grad(problem, q)
    fd = np.zeros_like(q)
    h = 1e-5
    for i in range(q.size):
        up, down = q.copy(), q.copy()
        up[i] += h
        down[i] -= h
        fd[i] = (selection_loss_and_grad(problem, up)[0] -
                 selection_loss_and_grad(problem, down)[0]) / (2 * h)
    denom = np.maximum(np.maximum(np.abs(grad), np.abs(fd)), 1e-8)
    assert np.max(np.abs(grad - fd) / denom) <= 1e-4


def test_optimize_full_selection_when_target_consistent():
    # |C| = K, target equal to the candidates' own bins, global sample equal to
    # the candidate rows: the all-ones q zeroes every term
    rng = np.random.default_rng(3)
    cand_repr = rng.standard_normal((5, 2))
    hh = rng.random(5)
    target = TargetDistribution(bin_distribution(hh, 5).counts)
    problem = SelectionProblem(candidates=np.arange(5), cand_repr=cand_repr,
                               global_repr=cand_repr, cand_homophily=hh,
                               target=target, k=5, lambda_s=2.0, n_bins=5)
    q = optimize_selection(problem).q
    assert q.sum() >= 0.9 * 5


def test_lambda_zero_removes_kl_gradient():
    base = _random_problem(4, lambda_s=0.0)
    other_target = TargetDistribution(np.arange(5, dtype=float))
    swapped = SelectionProblem(candidates=base.candidates, cand_repr=base.cand_repr,
                               global_repr=base.global_repr, cand_homophily=base.cand_homophily,
                               target=other_target, k=base.k, lambda_s=0.0, n_bins=5)
    q = np.full(8, 0.4)
    _, g1, _ = selection_loss_and_grad(base, q)
    _, g2, _ = selection_loss_and_grad(swapped, q)
    assert np.array_equal(g1, g2)


def test_single_candidate_projection_keeps_penalty_inactive():
    problem = _random_problem(5, m=1, k=1)
    q = optimize_selection(problem).q
    assert 0.0 <= q[0] <= 1.0


@pytest.mark.parametrize("seed", range(8))
def test_optimizer_box_and_descent_invariants(seed):
    problem = _random_problem(seed, m=10, k=4)
    q = optimize_selection(problem).q
    assert np.all(q >= 0.0) and np.all(q <= 1.0)
    q0 = np.full(10, min(4 / 10, 1.0))
    loss_q, _, _ = selection_loss_and_grad(problem, q)
    loss_q0, _, _ = selection_loss_and_grad(problem, q0)
    assert loss_q <= loss_q0 + 1e-12


def test_optimizer_deterministic():
    problem = _random_problem(9)
    a = optimize_selection(problem).q
    b = optimize_selection(problem).q
    assert np.array_equal(a, b)


def test_optimizer_trace_csv(tmp_path):
    problem = _random_problem(1, m=4, k=2)
    path = tmp_path / "trace.csv"
    optimize_selection(problem, PgdConfig(iterations=10), trace_path=path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "iteration,loss,cmd,kl,penalty,q_l1"
    assert len(lines) == 12  # header + 10 iterates + final point


def test_top_k_ranks_by_q():
    out = top_k([0.9, 0.1, 0.5], 2, [10, 20, 30], [0.8, 0.8, 0.8])
    assert out.tolist() == [10, 30]


def test_top_k_tie_breaks_by_confidence():
    out = top_k([0.5, 0.5, 0.5], 1, [10, 20, 30], [0.7, 0.9, 0.8])
    assert out.tolist() == [20]


def test_top_k_tie_breaks_by_node_id_last():
    out = top_k([0.5, 0.5], 1, [42, 7], [0.9, 0.9])
    assert out.tolist() == [7]


def test_top_k_more_than_available_returns_all():
    out = top_k([0.2, 0.8], 5, [1, 2], [0.5, 0.5])
    assert sorted(out.tolist()) == [1, 2]


def test_top_k_empty_candidates():
    assert top_k([], 3, [], []).size == 0


@pytest.mark.parametrize("seed", range(10))
def test_binary_top_k_beats_random_subsets(seed):
    # small-instance oracle: exhaustively score random K-subsets
    m, k = 10, 3
    problem = _random_problem(seed, m=m, k=k, lambda_s=1.5)
    qv = optimize_selection(problem).q
    conf = np.full(m, 0.5)
    chosen = top_k(qv, k, problem.candidates, conf)
    binary = np.zeros(m)
    binary[np.isin(problem.candidates, chosen)] = 1.0
    loss_sel, _, _ = selection_loss_and_grad(problem, binary)

    rng = np.random.default_rng(1000 + seed)
    losses = []
    for _ in range(100):
        subset = rng.choice(m, size=k, replace=False)
        ind = np.zeros(m)
        ind[subset] = 1.0
        losses.append(selection_loss_and_grad(problem, ind)[0])
    assert loss_sel <= np.median(losses)
