import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_jsscc.errors import ConfigError
from adaptive_jsscc.sampling import (
    ScanningNetwork,
    align,
    allocate,
    build_ratio_map,
    init_base_matrix,
    load_ratio_map,
    measure,
    row_mask,
    sample_block,
    save_ratio_map,
    uniform_saliency,
)


@pytest.mark.parametrize("n", [1, 4, 16, 64])
def test_base_matrix_rows_orthonormal(n):
    A = init_base_matrix(n, seed=3).numpy()
    for q in range(1, n + 1):
        gram = A[:q] @ A[:q].T
        assert np.max(np.abs(gram - np.eye(q))) < 1e-6


def test_one_dimensional_base_matrix():
    assert abs(abs(init_base_matrix(1, 0).item()) - 1.0) < 1e-12


def test_base_matrix_rows_follow_singular_order():
    n, seed = 8, 5
    g = np.random.default_rng(seed).standard_normal((n, n))
    A = init_base_matrix(n, seed).numpy()
    s = np.linalg.svd(g, compute_uv=False)
    # |g a_j| equals the j-th singular value for right-singular vector a_j
    np.testing.assert_allclose(np.linalg.norm(g @ A.T, axis=0), s, rtol=1e-10)
    assert np.all(np.diff(s) <= 0)


def test_full_rank_projection_is_identity():
    A = init_base_matrix(16, 0)
    s = torch.randn(16, dtype=torch.float64)
    _, x = sample_block(s, A, 16)
    assert torch.allclose(x, s, atol=1e-5)


def test_coordinate_projection_stub():
    y, x = sample_block(torch.tensor([1.0, 2.0, 3.0, 4.0]), torch.eye(4), 2)
    assert y.tolist() == [1.0, 2.0]
    assert x.tolist() == [1.0, 2.0, 0.0, 0.0]


@pytest.mark.parametrize("q", [1, 5, 17, 32])
def test_projection_properties(q):
    A = init_base_matrix(32, 1)
    s = torch.randn(32, dtype=torch.float64)
    y, x = sample_block(s, A, q)
    assert x.norm() <= s.norm() + 1e-12
    assert torch.allclose(A[:q] @ x, y, atol=1e-5)


def test_proxy_error_non_increasing_in_q():
    A = init_base_matrix(64, 2)
    s = torch.randn(64, dtype=torch.float64)
    errs = [(s - sample_block(s, A, q)[1]).norm().item() for q in range(1, 65)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_sample_block_rejects_bad_q():
    with pytest.raises(ConfigError):
        sample_block(torch.zeros(4), torch.eye(4), 0)


def test_masked_batch_matches_per_block_sampling():
    A = init_base_matrix(16, 0)
    blocks = torch.randn(2, 1, 3, 16, dtype=torch.float64)
    q = torch.tensor([[1, 7, 16], [4, 4, 9]])
    x = align(measure(blocks, A, row_mask(q, 16)), A)
    for b in range(2):
        for i in range(3):
            _, xi = sample_block(blocks[b, 0, i], A, int(q[b, i]))
            assert torch.allclose(x[b, 0, i], xi, atol=1e-12)


def test_straight_through_mask_forward_is_hard():
    q = torch.tensor([[3, 5]])
    soft = torch.tensor([[2.6, 5.4]], requires_grad=True)
    m = row_mask(q, 8, soft)
    assert torch.equal(m.detach(), row_mask(q, 8).to(m.dtype))
    m.sum().backward()
    assert torch.all(soft.grad > 0)


# -------------------------------------------------------------------- allocation


def test_uniform_allocation():
    plan = allocate(uniform_saliency((4, 4)), 0.5, 1024)
    assert np.all(plan.q == 512)


def test_concentrated_saliency_clamps():
    m = np.zeros(16)
    m[5] = 1.0
    plan = allocate(m, 1 / 16, 1024)
    q = plan.q.reshape(-1)
    assert q.sum() == 1024
    assert q[5] == 1024 - 15
    assert np.all(np.delete(q, 5) == 1)


def test_concentrated_saliency_above_ceiling():
    m = np.zeros(16)
    m[0] = 1.0
    plan = allocate(m, 0.25, 256)
    q = plan.q.reshape(-1)
    assert q[0] == 256
    assert q.sum() == round(0.25 * 256 * 16)


@settings(max_examples=1000, deadline=None)
@given(
    weights=st.lists(st.floats(0.0, 1.0), min_size=16, max_size=16),
    q_total=st.integers(16, 256 * 16),
)
def test_allocation_budget_exact(weights, q_total):
    m = np.asarray(weights) + 1e-9
    m = m / m.sum()
    r = q_total / (256 * 16)
    plan = allocate(m, r, 256)
    assert plan.q.sum() == round(r * 256 * 16)
    assert plan.q.min() >= 1 and plan.q.max() <= 256
    np.testing.assert_array_equal(build_ratio_map(plan), plan.q / 256)


def test_allocation_deterministic(rng):
    m = rng.dirichlet(np.ones(16))
    a, b = allocate(m, 0.3, 256), allocate(m.copy(), 0.3, 256)
    np.testing.assert_array_equal(a.q, b.q)


def test_allocation_tie_break_lowest_index():
    # four blocks, Q = 6 with N = 2: rounding gives 2 each (sum 8), two decrements needed
    plan = allocate(np.full(4, 0.25), 0.75, 2)
    assert plan.q.reshape(-1).tolist() == [1, 1, 2, 2]


@pytest.mark.parametrize("r", [0.0, -0.1, 1.5, 1 / (256 * 16)])
def test_allocation_rejects_out_of_range(r):
    with pytest.raises(ConfigError):
        allocate(uniform_saliency((4, 4)), r, 256)


def test_lowest_table_ratio_still_feasible():
    plan = allocate(uniform_saliency((4, 4)), 0.01, 256)
    assert plan.q.min() >= 1


# -------------------------------------------------------------------- ratio map


def test_ratio_map_uniform():
    assert np.all(build_ratio_map(allocate(uniform_saliency((4, 4)), 0.5, 1024)) == 0.5)


def test_ratio_map_file_round_trip(tmp_path, rng):
    plan = allocate(rng.dirichlet(np.ones(16)).reshape(4, 4), 0.37, 256)
    grid = build_ratio_map(plan)
    save_ratio_map(tmp_path / "R.txt", grid, 256)
    back, n = load_ratio_map(tmp_path / "R.txt")
    assert n == 256
    assert back.tobytes() == grid.tobytes()


# -------------------------------------------------------------------- scanning network


def test_saliency_normalized_and_nonnegative():
    torch.manual_seed(0)
    net = ScanningNetwork(1, width=8)
    m = net(torch.rand(3, 1, 32, 32), 10.0, 8)
    assert m.shape == (3, 4, 4)
    assert torch.all(m >= 0)
    assert torch.allclose(m.sum(dim=(1, 2)), torch.ones(3), atol=1e-6)


def test_constant_image_gives_uniform_map():
    torch.manual_seed(0)
    net = ScanningNetwork(1, width=8)
    m = net(torch.full((1, 1, 32, 32), 0.4), 7.0, 8)
    assert torch.max(torch.abs(m - m.flatten()[0])) < 1e-5


def test_saliency_depends_on_snr():
    torch.manual_seed(0)
    net = ScanningNetwork(1, width=8)
    x = torch.rand(1, 1, 32, 32)
    diff = (net(x, 0.0, 8) - net(x, 20.0, 8)).abs().max()
    assert diff > 0
