"""
Unit tests for the index-level building blocks: interleaving, circulant
factorizations, blockwise transposes and permutations, Kronecker helpers.
"""
import numpy as np
import pytest

from src.exceptions import DimensionError, SizeGuardError
from src.numerics import structure
from src.numerics.structure import InterleavePerm


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_interleave_with_d_one_is_identity():
    """Test that P^(1,5) leaves a vector unchanged."""
    v = np.arange(1, 6)
    assert np.array_equal(structure.apply_interleave(InterleavePerm(1, 5), v), v)


def test_interleave_small_case_by_hand():
    """Test that P^(2,2) maps (a, b, c, d) to (a, c, b, d)."""
    v = np.array(['a', 'b', 'c', 'd'])
    assert list(InterleavePerm(2, 2).apply(v)) == ['a', 'c', 'b', 'd']


def test_interleave_inverse(rng):
    """Test that P^(d,N) undoes P^(N,d) for every small pair."""
    for d in range(1, 9):
        for N in range(1, 9):
            product = InterleavePerm(d, N).matrix() @ InterleavePerm(N, d).matrix()
            assert np.array_equal(product, np.eye(d * N))
    v = _crandn(rng, 12)
    assert np.array_equal(InterleavePerm(3, 4).apply(InterleavePerm(4, 3).apply(v)), v)
    assert InterleavePerm(3, 4).inverse() == InterleavePerm(4, 3)


def test_interleave_swaps_kronecker_factors(rng):
    """Test that P^(d,N) (a (x) b) = b (x) a for a of length N and b of length d."""
    a, b = _crandn(rng, 4), _crandn(rng, 3)
    assert np.allclose(InterleavePerm(3, 4).apply(np.kron(a, b)), np.kron(b, a), atol=1e-12)


def test_interleave_swaps_matrix_kronecker_factors(rng):
    """Test that the row and column interleaves turn V (x) A into A (x) V."""
    V, A = _crandn(rng, 3, 2), _crandn(rng, 2, 2)
    lhs = InterleavePerm(2, 3).matrix() @ np.kron(V, A) @ InterleavePerm(2, 2).matrix().T
    assert np.allclose(lhs, np.kron(A, V), atol=1e-12)


def test_interleave_rejects_wrong_length():
    """Test that a length mismatch raises DimensionError."""
    with pytest.raises(DimensionError):
        InterleavePerm(2, 3).apply(np.ones(5))


def test_shift_moves_entries_down():
    """Test that S e_1 = e_2 and S wraps the last entry to the front."""
    assert np.array_equal(structure.shift(np.array([1, 0, 0])), np.array([0, 1, 0]))
    assert np.array_equal(structure.shift(np.array([1, 2, 3]), 2), np.array([2, 3, 1]))


def test_dft_plan_round_trip_and_columns(rng):
    """Test that the unitary DFT inverts through its adjoint and has columns w^{jk}/sqrt(d)."""
    v = _crandn(rng, 7)
    plan = structure.DftPlan(7)
    assert np.linalg.norm(plan.adjoint().apply(plan.apply(v)) - v) <= 1e-12 * np.linalg.norm(v)
    F = structure.dft_matrix(7)
    assert np.allclose(F @ v, plan.apply(v), atol=1e-12)
    j, k = 2, 5
    assert F[k, j] == pytest.approx(np.exp(2j * np.pi * j * k / 7) / np.sqrt(7))
    assert np.allclose(F.conj().T @ F, np.eye(7), atol=1e-12)


def test_circ_small_cases():
    """Test that circ(e_1) is the identity and circ(1) the all-ones matrix."""
    assert np.array_equal(structure.circ(np.array([1.0, 0.0, 0.0])), np.eye(3))
    assert np.array_equal(structure.circ(np.ones(3)), np.ones((3, 3)))


def test_circ_columns_are_shifts(rng):
    """Test that column k of circ(v) is S^k v."""
    v = _crandn(rng, 5)
    C = structure.circ(v)
    for k in range(5):
        assert np.array_equal(C[:, k], structure.shift(v, k))


def test_circ_eigenvalues():
    """Test that circ((2, 1, 0, 1)) has eigenvalues {4, 2, 0, 2}."""
    values = np.linalg.eigvalsh(structure.circ(np.array([2.0, 1.0, 0.0, 1.0])))
    assert np.allclose(np.sort(values), [0, 2, 2, 4], atol=1e-12)


@pytest.mark.parametrize('d', [3, 8, 17, 64])
def test_circ_dft_diagonalization(rng, d):
    """Test that circ(v) = F diag(sqrt(d) F^* v) F^*."""
    v = _crandn(rng, d)
    F = structure.dft_matrix(d)
    rebuilt = F @ np.diag(np.sqrt(d) * F.conj().T @ v) @ F.conj().T
    assert np.linalg.norm(structure.circ(v) - rebuilt) <= 1e-10 * np.linalg.norm(v) * d


def test_circ_size_guard():
    """Test that dense circulants above the guard are refused."""
    with pytest.raises(SizeGuardError):
        structure.circ(np.ones(8), limit=4)


def test_circ_block_with_unit_stride_is_circ(rng):
    """Test that circ^1(v) = circ(v)."""
    v = _crandn(rng, 6)
    assert np.array_equal(structure.circ_block(v, 1), structure.circ(v))


def test_circ_block_shape_and_divisibility(rng):
    """Test that circ^N(V) has l*N rows and l*m columns and rejects a bad stride."""
    V = _crandn(rng, 6, 2)
    assert structure.circ_block(V, 2).shape == (6, 6)
    assert structure.CircBlockSpec.for_matrix(V, 3).shape == (6, 4)
    with pytest.raises(DimensionError):
        structure.circ_block(V, 4)


@pytest.mark.parametrize('rows,cols,N', [(4, 1, 2), (6, 2, 2), (6, 2, 3)])
def test_circ_block_factorization(rng, rows, cols, N):
    """Test that circ^N(V) = (F_l (x) I_N) diag(M_j) (F_l (x) I_m)^*."""
    V = _crandn(rng, rows, cols)
    ell = rows // N
    M = structure.circ_block_factors(V, N)
    left = np.kron(structure.dft_matrix(ell), np.eye(N))
    right = np.kron(structure.dft_matrix(ell), np.eye(cols))
    rebuilt = left @ structure.block_diag(list(M)) @ right.conj().T
    assert np.allclose(rebuilt, structure.circ_block(V, N), atol=1e-12)


def test_circ_block_adjoint_is_block_circulant(rng):
    """Test that circ^N(V)^* = circ^m((R_l (x) I_m) T_N(V))."""
    V = _crandn(rng, 6, 2)
    W = structure.block_reversal(structure.block_transpose(V, 2), 2)
    assert np.allclose(structure.circ_block(V, 2).conj().T, structure.circ_block(W, 2), atol=1e-12)


def test_circ_block_concatenation(rng):
    """Test that side-by-side block circulants regroup into the circulant of the side-by-side generators."""
    k, N1, N2, m = 3, 2, 2, 2
    Vs = [_crandn(rng, k * N1, m) for _ in range(N2)]
    joined = np.hstack([structure.circ_block(V, N1) for V in Vs])
    perm = np.kron(InterleavePerm(k, N2).matrix(), np.eye(m))
    assert np.allclose(joined @ perm.T, structure.circ_block(np.hstack(Vs), N1), atol=1e-12)


def test_block_transpose(rng):
    """Test the single-block, two-block and round-trip cases of the blockwise transpose."""
    V = _crandn(rng, 2, 3)
    assert np.array_equal(structure.block_transpose(V, 2), V.conj().T)
    V1, V2 = _crandn(rng, 2, 3), _crandn(rng, 2, 3)
    stacked = structure.block_transpose(np.vstack([V1, V2]), 2)
    assert np.array_equal(stacked, np.vstack([V1.conj().T, V2.conj().T]))
    V = _crandn(rng, 6, 3)
    assert np.array_equal(structure.block_transpose(structure.block_transpose(V, 2), 3), V)


def test_reversal():
    """Test that R maps (1, 2, 3, 4) to (1, 4, 3, 2), fixes e_1 and is an involution."""
    v = np.array([1, 2, 3, 4])
    assert list(structure.reversal(v)) == [1, 4, 3, 2]
    assert list(structure.reversal(structure.reversal(v))) == [1, 2, 3, 4]
    assert list(structure.reversal(np.array([1, 0, 0]))) == [1, 0, 0]


def test_block_perm():
    """Test identity and swap block permutations and the size check."""
    v = np.arange(4)
    assert np.array_equal(structure.block_perm([0, 1], [2, 2], v), v)
    assert list(structure.block_perm([1, 0], [2, 2], v)) == [2, 3, 0, 1]
    with pytest.raises(DimensionError):
        structure.block_perm([1, 0], [2, 3], v)
    with pytest.raises(DimensionError):
        structure.block_perm([0, 0], [2, 2], v)


def test_diag_kron_perms(rng):
    """Test that diag(I_k (x) V_j) = P_1 (I_k (x) diag(V_j)) P_2^*."""
    V1, V2 = _crandn(rng, 1, 1), _crandn(rng, 2, 2)
    p1, p2 = structure.diag_kron_perms([1, 2], [1, 2], 2)
    lhs = structure.block_diag([V1, V1, V2, V2])
    rhs = p1 @ np.kron(np.eye(2), structure.block_diag([V1, V2])) @ p2.T
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_kron_vec(rng):
    """Test vec(A B C) = (C^T (x) A) vec(B) and vec(a b^*) = conj(b) (x) a."""
    A, B, C = _crandn(rng, 2, 3), _crandn(rng, 3, 4), _crandn(rng, 4, 2)
    assert np.allclose(structure.kron_vec(A, B, C), np.kron(C.T, A) @ structure.vec(B), atol=1e-12)
    assert np.allclose(structure.kron_vec(np.eye(3), B, np.eye(4)), structure.vec(B))
    a, b = _crandn(rng, 2), _crandn(rng, 2)
    outer = structure.kron_vec(a[:, None], np.ones((1, 1)), b.conj()[None, :])
    assert np.allclose(outer, np.kron(b.conj(), a), atol=1e-12)
    with pytest.raises(DimensionError):
        structure.kron_vec(A, A, C)
