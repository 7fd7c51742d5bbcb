"""
Unit tests for the inverse plans: round trips, agreement with dense solves,
linearity, single-diagonal recovery, noise variance and the timing harness.
"""
import numpy as np
import pytest

from src.exceptions import DimensionError, NonSpanningError, SizeGuardError, ValidationError
from src.numerics.banded import BandedHermitian, BandSpec, band_frobenius_distance, project_band
from src.numerics.conditioning import build_ptycho_basis
from src.numerics.inversion import (
    BLOCK_PINV,
    FAST_FOURIER,
    fitted_exponent,
    hermitian_part,
    invert,
    invert_benchmark,
    invert_with_diagnostics,
    plan_inverse,
)
from src.numerics.masks import constant_mask, local_fourier_family, near_flat_mask, random_gaussian_family
from src.numerics.operator import MeasurementGrid, assemble_dense_A, forward


def _signal(rng, d):
    return (0.3 + rng.random(d)) * np.exp(2j * np.pi * rng.random(d))


def _random_band(rng, spec):
    G = rng.standard_normal((spec.d, spec.d)) + 1j * rng.standard_normal((spec.d, spec.d))
    return project_band(G + G.conj().T, spec)


def _family(d, delta, s):
    if s == 1:
        return local_fourier_family(near_flat_mask(d, delta), kind='flat')
    return random_gaussian_family(d, delta, seed=11, s=s)


def test_plan_modes():
    """Test that fast-fourier is chosen only for s = 1 Fourier families with K = D = 2 delta - 1."""
    assert plan_inverse(_family(16, 3, 1)).mode == FAST_FOURIER
    assert plan_inverse(_family(12, 4, 2), 2).mode == BLOCK_PINV
    assert plan_inverse(local_fourier_family(near_flat_mask(16, 3), K=7), 1).mode == BLOCK_PINV
    assert plan_inverse(random_gaussian_family(12, 3, seed=1)).mode == BLOCK_PINV


def test_non_spanning_family_is_refused():
    """Test that a rank-deficient family raises NonSpanningError carrying a witness frequency."""
    with pytest.raises(NonSpanningError) as excinfo:
        plan_inverse(local_fourier_family(constant_mask(6, 3)))
    assert excinfo.value.witness is not None
    with pytest.raises(NonSpanningError):
        plan_inverse(random_gaussian_family(12, 4, D=6, seed=0, s=2), 2)


@pytest.mark.parametrize('s', [1, 2])
def test_round_trip_from_signal(rng, s):
    """Test that inverting A(T_{delta,s}(x x^*)) returns T_{delta,s}(x x^*) at d = 24, delta = 4."""
    family = _family(24, 4, s)
    spec = BandSpec(24, 4, s)
    plan = plan_inverse(family, s)
    for _ in range(5):
        x = _signal(rng, 24)
        X0 = BandedHermitian.from_rank_one(x, spec)
        X = invert(plan, forward(family, x, s))
        assert band_frobenius_distance(X, X0) <= 1e-8 * X0.frobenius_norm()


def test_fast_inverse_matches_dense_solve(rng):
    """Test that the fast plan equals A^{-1} y on 20 random right-hand sides at (16, 3)."""
    family = _family(16, 3, 1)
    plan = plan_inverse(family)
    A = assemble_dense_A(family, 1)
    assert A.shape == (80, 80)
    for _ in range(20):
        y = MeasurementGrid(16, 5, rng.standard_normal((16, 5)))
        expected = np.linalg.solve(A, y.flatten())
        raw = plan.raw_diagonals(y).ravel()
        assert np.linalg.norm(raw - expected) <= 1e-9 * np.linalg.norm(expected)


def test_fast_inverse_of_real_data_is_hermitian(rng):
    """Test that real measurements invert to a Hermitian banded matrix in the square case."""
    plan = plan_inverse(_family(16, 3, 1))
    y = MeasurementGrid(16, 5, rng.standard_normal((16, 5)))
    result = invert_with_diagnostics(plan, y)
    assert result.asymmetry <= 1e-9 * result.estimate.frobenius_norm()


def test_block_pinv_matches_least_squares(rng):
    """Test that the block plan equals the least-squares solution of the dense system on Col(N)."""
    family = random_gaussian_family(12, 4, D=15, seed=3, s=2)
    spec = BandSpec(12, 4, 2)
    plan = plan_inverse(family, 2)
    A = assemble_dense_A(family, 2)
    basis = build_ptycho_basis(spec)
    for _ in range(5):
        y = MeasurementGrid(6, 15, rng.standard_normal((6, 15)))
        expected, *_ = np.linalg.lstsq(A[:, basis.active_indices], y.flatten(), rcond=None)
        raw = plan.raw_diagonals(y).ravel()
        assert np.linalg.norm(basis.restrict(raw) - expected) <= 1e-9 * np.linalg.norm(expected)
        inactive = np.ones(raw.size, dtype=bool)
        inactive[basis.active_indices] = False
        assert np.all(raw[inactive] == 0)


def test_zero_measurements_invert_to_zero():
    """Test that y = 0 returns the zero matrix."""
    plan = plan_inverse(_family(16, 3, 1))
    X = invert(plan, MeasurementGrid(16, 5, np.zeros((16, 5))))
    assert X.frobenius_norm() == 0


@pytest.mark.parametrize('s', [1, 2])
def test_inverse_is_linear(rng, s):
    """Test that invert(a y1 + b y2) = a invert(y1) + b invert(y2)."""
    family = _family(12, 4, s)
    plan = plan_inverse(family, s)
    shape = (12 // s, family.D)
    y1 = MeasurementGrid(*shape, rng.standard_normal(shape))
    y2 = MeasurementGrid(*shape, rng.standard_normal(shape))
    lhs = invert(plan, y1.combine(2.0, y2, -0.5))
    rhs = invert(plan, y1).scaled(2.0) + invert(plan, y2).scaled(-0.5)
    assert band_frobenius_distance(lhs, rhs) <= 1e-10 * rhs.frobenius_norm()


@pytest.mark.parametrize('d,delta,s', [(16, 3, 1), (12, 4, 2), (24, 6, 3)])
def test_forward_after_inverse_reproduces_range_data(rng, d, delta, s):
    """Test that A(invert(y)) = y for y in the range of A."""
    family = _family(d, delta, s)
    plan = plan_inverse(family, s)
    y = forward(family, _random_band(rng, BandSpec(d, delta, s)), s)
    again = forward(family, invert(plan, y), s)
    assert np.linalg.norm(again.values - y.values) <= 1e-9 * y.norm()


def test_recover_single_diagonal(rng):
    """Test that one diagonal alone matches the full solution in both modes."""
    for family, s in ((_family(16, 3, 1), 1), (_family(12, 4, 2), 2)):
        plan = plan_inverse(family, s)
        y = MeasurementGrid(plan.d_bar, family.D, rng.standard_normal((plan.d_bar, family.D)))
        full = plan.raw_diagonals(y)
        for m in range(1 - family.delta, family.delta):
            assert np.allclose(plan.recover_diagonal(y, m), full[m + family.delta - 1], atol=1e-10)
        with pytest.raises(DimensionError):
            plan.recover_diagonal(y, family.delta)


def test_grid_shape_is_checked():
    """Test that a grid of the wrong shape is refused."""
    plan = plan_inverse(_family(16, 3, 1))
    with pytest.raises(DimensionError):
        invert(plan, MeasurementGrid(8, 5, np.zeros((8, 5))))


def test_noise_variance_matches_dense_inverse():
    """Test the per-diagonal noise variance against row norms of the dense pseudoinverse."""
    for family, s in ((_family(16, 3, 1), 1), (random_gaussian_family(12, 4, D=15, seed=3, s=2), 2)):
        plan = plan_inverse(family, s)
        basis = build_ptycho_basis(plan.spec)
        L = np.linalg.pinv(assemble_dense_A(family, s)[:, basis.active_indices])
        row_energy = np.sum(np.abs(L) ** 2, axis=1)
        d = family.d
        per_entry = np.zeros((2 * family.delta - 1) * d)
        per_entry[basis.active_indices] = row_energy
        active = np.zeros(per_entry.size, dtype=bool)
        active[basis.active_indices] = True
        expected = [per_entry[i * d:(i + 1) * d][active[i * d:(i + 1) * d]].mean() for i in range(2 * family.delta - 1)]
        assert np.allclose(plan.diagonal_noise_variance(), expected, rtol=1e-8)


def test_hermitian_part_reports_asymmetry():
    """Test that an anti-Hermitian perturbation is removed and reported."""
    spec = BandSpec(8, 2)
    chi = np.zeros((3, 8), dtype=complex)
    chi[2, 0] = 1.0
    result = hermitian_part(chi, spec)
    assert result.estimate.diagonal(1)[0] == pytest.approx(0.5)
    assert result.estimate.diagonal(-1)[1] == pytest.approx(0.5)
    assert result.asymmetry == pytest.approx(np.sqrt(2))


def test_large_dimension_runs_without_dense_matrices(rng):
    """Test the fast plan at d = 2^14, where any dense assembly is refused."""
    family = _family(2 ** 14, 8, 1)
    with pytest.raises(SizeGuardError):
        assemble_dense_A(family, 1)
    x = _signal(rng, 2 ** 14)
    X0 = BandedHermitian.from_rank_one(x, BandSpec(2 ** 14, 8))
    X = invert(plan_inverse(family), forward(family, x, 1))
    assert band_frobenius_distance(X, X0) <= 1e-8 * X0.frobenius_norm()


def test_fitted_exponent():
    """Test that t = 3 x^1.5 fits an exponent of 1.5."""
    x = np.array([1.0, 2.0, 4.0, 8.0])
    assert fitted_exponent(x, 3 * x ** 1.5) == pytest.approx(1.5)


def test_invert_benchmark_small():
    """Test that the benchmark reports one row per size and finite exponents."""
    result = invert_benchmark(2, [64, 128, 256], repeats=1)
    assert [row['d'] for row in result.rows] == [64, 128, 256]
    assert all(row['mode'] == FAST_FOURIER and row['median_ms'] > 0 for row in result.rows)
    assert np.isfinite(result.exponent) and np.isfinite(result.exponent_dlogd)
    assert set(result.to_dict()) == {'rows', 'exponent', 'exponent_dlogd'}


def test_invert_benchmark_validation():
    """Test that zero repeats and a single size are refused."""
    with pytest.raises(ValidationError):
        invert_benchmark(2, [64, 128], repeats=0)
    with pytest.raises(ValidationError):
        invert_benchmark(2, [64])
