"""
Unit tests for the sweeps and the self-test used by the CLI.
"""
import math

import pytest

from src.exceptions import ValidationError
from src.numerics.experiments import (
    SELFTEST_CHECKS,
    condition_sweep,
    magnitude_comparison,
    parameter_grid,
    selftest,
    snr_sweep,
    tau_sweep,
)
from src.numerics.masks import family_from_descriptor


def test_parameter_grid_order():
    """Test lexicographic order over (d, delta, s)."""
    assert parameter_grid([16, 8], [2, 3], [1]) == [(16, 2, 1), (16, 3, 1), (8, 2, 1), (8, 3, 1)]


def test_condition_sweep_threads_keep_order():
    """Test that a worker pool returns the same rows in the same order as a serial run."""
    points = parameter_grid([12, 16, 24], [3, 4], [1, 2])
    masks = ['flat', 'rand:seed=0']
    serial = condition_sweep(points, masks, threads=1)
    pooled = condition_sweep(points, masks, threads=4)
    assert serial == pooled
    assert [(r['d'], r['delta'], r['s']) for r in serial[:2]] == [(12, 3, 1), (12, 3, 1)]


def test_condition_sweep_skips_invalid_masks():
    """Test that a mask refused at one grid point drops only that row."""
    rows = condition_sweep([(12, 4, 1)], ['flat', 'flat:a=1'])
    assert len(rows) == 1 and rows[0]['mask'] == 'flat'


def test_snr_sweep_is_deterministic():
    """Test that the same seed yields identical rows, serially or pooled, and that error falls with SNR."""
    family = family_from_descriptor('rand:seed=0', 12, 4, 2)
    a = snr_sweep(family, 2, [1e3, 1e5], trials=3, seed=7)
    b = snr_sweep(family, 2, [1e3, 1e5], trials=3, seed=7, threads=3)
    assert a.rows == b.rows
    assert a.rows[0]['aligned_rel_error'] > a.rows[1]['aligned_rel_error'] > 0
    assert a.slope is not None
    with pytest.raises(ValidationError):
        snr_sweep(family, 2, [1e3], trials=0)


def test_snr_sweep_noiseless_has_no_slope():
    """Test that an infinite SNR alone gives near-zero error and no fitted slope."""
    family = family_from_descriptor('flat', 16, 4)
    result = snr_sweep(family, 1, [math.inf], trials=2)
    assert result.slope is None
    assert result.rows[0]['aligned_rel_error'] <= 1e-8


def test_magnitude_comparison_rows():
    """Test one row per SNR and covering, with the bound above the error."""
    rows = magnitude_comparison(12, 4, 2, [1e2, 1e4], trials=2)
    assert len(rows) == 6
    assert {r['covering'] for r in rows} == {'singleton', 'interval:4', 'partition:2'}
    assert all(r['mag_error'] <= r['bound'] for r in rows)


def test_tau_sweep():
    """Test that tau is reported per point with the degree range."""
    rows = tau_sweep(parameter_grid([12, 24], [4], [1, 2]))
    assert len(rows) == 4
    assert all(r['tau'] > 0 for r in rows)
    assert rows[1]['degree_min'] == rows[1]['degree_max'] == 6


def test_selftest_passes():
    """Test that every self-test check passes and that each module is represented."""
    results = selftest(threads=2)
    assert len(results) == len(SELFTEST_CHECKS)
    assert all(r.passed for r in results), [r.to_dict() for r in results if not r.passed]
    assert {r.module for r in results} == {'structure', 'banded', 'operator', 'conditioning', 'inversion', 'recovery'}
