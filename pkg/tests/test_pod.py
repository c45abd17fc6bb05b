import numpy as np
import pytest

from tgapod.pod import (
    PodBasis,
    SnapshotMatrix,
    lift,
    pod_mode,
    pod_step,
    reduce_system,
    restrict,
    select_mode_count,
    thin_svd,
    update_pod_mode,
)

import scipy.sparse as sp


def _unit(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def _projector(modes):
    return modes @ modes.T


# ---------------------------------------------------------------- thin_svd


def test_svd_single_unit_column():
    R, S, V = thin_svd(_unit(6, 0)[:, None])
    assert S.shape == (1,)
    assert S[0] == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(np.abs(R[:, 0]), _unit(6, 0), atol=1e-14)


def test_svd_duplicate_columns_rank_one():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(12)
    R, S, V = thin_svd(np.column_stack([v, v]))
    assert S.shape == (1,)
    direction = v / np.linalg.norm(v)
    assert min(np.linalg.norm(R[:, 0] - direction), np.linalg.norm(R[:, 0] + direction)) <= 1e-12


def test_svd_random_matches_dense_oracle():
    rng = np.random.default_rng(1)
    U = rng.standard_normal((30, 7))
    R, S, V = thin_svd(U)
    S_oracle = np.linalg.svd(U, compute_uv=False)
    assert np.abs(S - S_oracle).max() <= 1e-10 * S_oracle[0]
    assert np.linalg.norm(U - (R * S) @ V.T) <= 1e-10 * np.linalg.norm(U)
    assert np.abs(R.T @ R - np.eye(7)).max() <= 1e-12
    assert np.abs(V.T @ V - np.eye(7)).max() <= 1e-12


def test_svd_zero_matrix_empty_factors():
    R, S, V = thin_svd(np.zeros((9, 4)))
    assert R.shape == (9, 0) and S.shape == (0,) and V.shape == (4, 0)


def test_svd_accepts_snapshot_matrix():
    data = np.eye(5)[:, :3]
    snaps = SnapshotMatrix(data, np.arange(3.0))
    R, S, V = thin_svd(snaps)
    assert S.shape == (3,)


def test_svd_deterministic():
    rng = np.random.default_rng(2)
    U = rng.standard_normal((25, 6))
    R1, S1, V1 = thin_svd(U)
    R2, S2, V2 = thin_svd(U)
    assert np.array_equal(R1, R2) and np.array_equal(S1, S2) and np.array_equal(V1, V2)


# ---------------------------------------------------------------- mode count


def test_mode_count_examples():
    S = np.array([4.0, 3.0, 2.0, 1.0])
    assert select_mode_count(S, 0.6) == 2
    assert select_mode_count(S, 0.9) == 4  # 9 is not strictly above 9
    assert select_mode_count(np.array([1.0, 1e-9]), 0.999) == 1


def test_mode_count_empty():
    assert select_mode_count(np.zeros(0), 0.5) == 0


def test_mode_count_gamma_validation():
    with pytest.raises(ValueError):
        select_mode_count(np.array([1.0]), 0.0)
    with pytest.raises(ValueError):
        select_mode_count(np.array([1.0]), 1.0)


def test_mode_count_monotone_in_gamma():
    rng = np.random.default_rng(3)
    S = np.sort(rng.uniform(0.1, 5.0, size=12))[::-1]
    gammas = np.linspace(0.05, 0.999, 40)
    counts = [select_mode_count(S, g) for g in gammas]
    assert all(a <= b for a, b in zip(counts, counts[1:]))


# ---------------------------------------------------------------- pod_mode


def test_pod_mode_orthogonal_scaled_columns():
    U = np.column_stack([3.0 * _unit(6, 0), 2.0 * _unit(6, 1), _unit(6, 2)])
    basis = pod_mode(U, 0.8)  # sums: 3 <= 4.8 < 5 -> two modes
    assert basis.m == 2
    assert np.abs(np.abs(basis.modes[:2, :2]) - np.eye(2)).max() <= 1e-12
    S_oracle = np.linalg.svd(U, compute_uv=False)
    assert np.allclose(basis.singular_values, S_oracle, atol=1e-12)


def test_pod_mode_single_column():
    rng = np.random.default_rng(4)
    v = rng.standard_normal(9)
    basis = pod_mode(v[:, None], 0.5)
    assert basis.m == 1
    direction = v / np.linalg.norm(v)
    assert min(np.linalg.norm(basis.modes[:, 0] - direction), np.linalg.norm(basis.modes[:, 0] + direction)) <= 1e-12


def test_pod_mode_constant_snapshots_single_mode():
    v = np.full(20, 1.3)
    U = np.tile(v[:, None], (1, 61))
    basis = pod_mode(U, 0.999)
    assert basis.m == 1


def test_pod_mode_rejects_zero_snapshots():
    with pytest.raises(ValueError):
        pod_mode(np.zeros((8, 3)), 0.9)


# ---------------------------------------------------------------- update


def test_update_no_new_information_preserves_span():
    rng = np.random.default_rng(5)
    old_modes, _ = np.linalg.qr(rng.standard_normal((15, 3)))
    old = PodBasis(old_modes, np.array([3.0, 2.0, 1.0]))
    W1 = old_modes @ rng.standard_normal((3, 5))  # window inside the old span
    new = update_pod_mode(W1, 0.999, 1.0 - 1e-12, old)
    assert np.abs(_projector(new.modes) - _projector(old_modes)).max() <= 1e-8


def test_update_absorbs_new_direction():
    old = PodBasis(_unit(4, 0)[:, None], np.array([1.0]))
    new = update_pod_mode(_unit(4, 1)[:, None], 0.999, 1.0 - 1e-9, old)
    assert new.m == 2
    target = _projector(np.column_stack([_unit(4, 0), _unit(4, 1)]))
    assert np.abs(_projector(new.modes) - target).max() <= 1e-10


def test_update_small_gamma3_truncates():
    old = PodBasis(_unit(4, 0)[:, None], np.array([1.0]))
    # both concatenated directions carry singular value 1; gamma below the
    # half-energy point keeps one, the boundary value keeps both (strict >)
    truncated = update_pod_mode(_unit(4, 1)[:, None], 0.999, 0.49, old)
    assert truncated.m == 1
    boundary = update_pod_mode(_unit(4, 1)[:, None], 0.999, 0.5, old)
    assert boundary.m == 2


def test_update_nesting_when_rank_is_kept():
    rng = np.random.default_rng(6)
    old_modes, _ = np.linalg.qr(rng.standard_normal((20, 4)))
    old = PodBasis(old_modes, np.array([4.0, 3.0, 2.0, 1.0]))
    W1 = rng.standard_normal((20, 6))
    new = update_pod_mode(W1, 0.999, 1.0 - 1e-12, old)
    p_new, p_old = _projector(new.modes), _projector(old_modes)
    assert np.abs(p_new @ p_old - p_old).max() <= 1e-8


def test_update_rejects_length_mismatch():
    old = PodBasis(_unit(4, 0)[:, None], np.array([1.0]))
    with pytest.raises(ValueError):
        update_pod_mode(np.zeros((5, 2)), 0.9, 0.9, old)


# ---------------------------------------------------------------- reduction


def _random_system(n, seed):
    rng = np.random.default_rng(seed)
    A = sp.csr_matrix(rng.standard_normal((n, n)) + n * np.eye(n))
    C = sp.csr_matrix(rng.standard_normal((n, n)))
    b = rng.standard_normal(n)
    return A, b, C


def test_reduce_identity_basis_densifies():
    A, b, C = _random_system(6, 7)
    basis = PodBasis(np.eye(6), np.ones(6))
    red = reduce_system(A, b, C, basis)
    assert np.abs(red.matrix - A.toarray()).max() <= 1e-14
    assert np.abs(red.mass - C.toarray()).max() <= 1e-14
    assert np.array_equal(red.rhs_load, b)


def test_reduce_single_mode_scalar():
    A, b, C = _random_system(5, 8)
    rng = np.random.default_rng(9)
    v = rng.standard_normal(5)
    v /= np.linalg.norm(v)
    red = reduce_system(A, b, C, PodBasis(v[:, None], np.ones(1)))
    assert red.matrix.shape == (1, 1)
    assert red.matrix[0, 0] == pytest.approx(v @ (A @ v), rel=1e-12)


def test_reduce_matches_dense_triple_product():
    A, b, C = _random_system(20, 10)
    rng = np.random.default_rng(11)
    modes, _ = np.linalg.qr(rng.standard_normal((20, 4)))
    red = reduce_system(A, b, C, PodBasis(modes, np.arange(4, 0, -1.0)))
    oracle = modes.T @ A.toarray() @ modes
    assert np.abs(red.matrix - oracle).max() <= 1e-12 * np.abs(oracle).max()
    oracle_c = modes.T @ C.toarray() @ modes
    assert np.abs(red.mass - oracle_c).max() <= 1e-12 * np.abs(oracle_c).max()
    assert np.allclose(red.rhs_load, modes.T @ b, atol=1e-13)


def test_reduce_rejects_mismatch():
    A, b, C = _random_system(6, 12)
    basis = PodBasis(np.eye(5), np.ones(5))
    with pytest.raises(ValueError):
        reduce_system(A, b, C, basis)


def test_pod_step_matches_dense_oracle():
    rng = np.random.default_rng(13)
    matrix = rng.standard_normal((4, 4)) + 5 * np.eye(4)
    mass = rng.standard_normal((4, 4))
    load = rng.standard_normal(4)
    prev = rng.standard_normal(4)
    basis = PodBasis(np.eye(4), np.ones(4))
    from tgapod.pod import ReducedSystem

    red = ReducedSystem(matrix, load, mass, basis)
    expected = np.linalg.solve(matrix, load + mass @ prev)
    assert np.allclose(pod_step(prev, red), expected, atol=1e-12)


def test_pod_step_zero_rhs():
    basis = PodBasis(np.eye(3), np.ones(3))
    from tgapod.pod import ReducedSystem

    red = ReducedSystem(np.eye(3), np.zeros(3), np.zeros((3, 3)), basis)
    assert np.array_equal(pod_step(np.ones(3), red), np.zeros(3))


def test_pod_step_singular_matrix():
    basis = PodBasis(np.eye(2), np.ones(2))
    from tgapod.pod import ReducedSystem

    red = ReducedSystem(np.zeros((2, 2)), np.ones(2), np.eye(2), basis)
    with pytest.raises(RuntimeError):
        pod_step(np.ones(2), red)


def test_galerkin_orthogonality():
    A, b, C = _random_system(30, 14)
    rng = np.random.default_rng(15)
    modes, _ = np.linalg.qr(rng.standard_normal((30, 5)))
    basis = PodBasis(modes, np.arange(5, 0, -1.0))
    red = reduce_system(A, b, C, basis)
    prev = rng.standard_normal(5)
    new = pod_step(prev, red)
    residual = A @ lift(basis, new) - b - C @ lift(basis, prev)
    rhs_norm = np.linalg.norm(b + C @ lift(basis, prev))
    assert np.linalg.norm(modes.T @ residual) <= 1e-9 * rhs_norm


# ---------------------------------------------------------------- restrict / lift


def test_restrict_lift_identities():
    rng = np.random.default_rng(16)
    modes, _ = np.linalg.qr(rng.standard_normal((12, 4)))
    basis = PodBasis(modes, np.arange(4, 0, -1.0))
    inside = modes @ rng.standard_normal(4)
    assert np.linalg.norm(lift(basis, restrict(basis, inside)) - inside) <= 1e-10
    coeffs = rng.standard_normal(4)
    assert np.linalg.norm(restrict(basis, lift(basis, coeffs)) - coeffs) <= 1e-12
    outside = rng.standard_normal(12)
    outside -= modes @ (modes.T @ outside)
    assert np.linalg.norm(restrict(basis, outside)) <= 1e-12


def test_restrict_shape_check():
    basis = PodBasis(np.eye(3), np.ones(3))
    with pytest.raises(ValueError):
        restrict(basis, np.zeros(4))
    with pytest.raises(ValueError):
        lift(basis, np.zeros(4))


# ---------------------------------------------------------------- types & io


def test_basis_validation():
    with pytest.raises(ValueError):
        PodBasis(np.ones((4, 2)), np.array([2.0, 1.0]))  # not orthonormal
    with pytest.raises(ValueError):
        PodBasis(np.eye(3), np.array([1.0, 2.0, 3.0]))  # increasing sigmas
    with pytest.raises(ValueError):
        PodBasis(np.eye(3), np.array([1.0]))  # fewer sigmas than modes


def test_snapshot_matrix_validation():
    with pytest.raises(ValueError):
        SnapshotMatrix(np.zeros((4, 0)), np.zeros(0))
    with pytest.raises(ValueError):
        SnapshotMatrix(np.zeros((4, 2)), np.zeros(3))


def test_basis_dump_roundtrip(tmp_path):
    rng = np.random.default_rng(17)
    modes, _ = np.linalg.qr(rng.standard_normal((10, 3)))
    basis = PodBasis(modes, np.array([5.0, 2.0, 0.5]))
    path = tmp_path / "basis.txt"
    basis.dump(str(path))
    loaded = PodBasis.load(str(path))
    assert loaded.n == 10 and loaded.m == 3
    assert np.array_equal(loaded.modes, modes)
