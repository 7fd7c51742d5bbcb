"""
Sweeps and the self-test behind the CLI commands.

Every function returns plain row dictionaries in grid order so the command
layer only has to format them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from src.exceptions import PtychoError, ValidationError
from src.extensions import ordered_map
from src.numerics import structure
from src.numerics.banded import (
    BandedHermitian,
    BandSpec,
    diag_devectorize,
    diag_vectorize,
    hermitian_band_perturbation,
    make_interval_covering,
    make_partition_covering,
    make_singleton_covering,
)
from src.numerics.conditioning import block_spectrum, dense_singular_values
from src.numerics.inversion import fitted_exponent, invert, plan_inverse
from src.numerics.masks import MaskFamily, constant_mask, family_from_descriptor, local_fourier_family, near_flat_mask
from src.numerics.operator import NoiseSpec, add_noise, assemble_dense_A, forward
from src.numerics.recovery import (
    RecoveryConfig,
    aligned_error,
    blk_mag,
    blk_mag_error_bound,
    recover,
    signum,
    singleton_error_bound,
    spectral_gap_tau,
)

logger = logging.getLogger(__name__)

GridPoint = Tuple[int, int, int]


def random_signal(d: int, rng: np.random.Generator, floor: float = 0.3) -> np.ndarray:
    """Random phases with magnitudes in [floor, floor + 1)."""
    return (floor + rng.random(d)) * np.exp(2j * np.pi * rng.random(d))


def parameter_grid(d_list: Iterable[int], delta_list: Iterable[int], s_list: Iterable[int]) -> List[GridPoint]:
    """All valid (d, delta, s) combinations in lexicographic order; invalid ones are logged and skipped."""
    points = []
    for d in d_list:
        for delta in delta_list:
            for s in s_list:
                try:
                    BandSpec(int(d), int(delta), int(s))
                except ValidationError as e:
                    logger.warning("skipping grid point d=%s delta=%s s=%s: %s", d, delta, s, e)
                    continue
                points.append((int(d), int(delta), int(s)))
    return points


def _condition_row(point: GridPoint, mask: str, strict: bool = False) -> Dict[str, Any] | None:
    d, delta, s = point
    try:
        family = family_from_descriptor(mask, d, delta, s)
        spectrum = block_spectrum(family, s)
    except ValidationError as e:
        if strict:
            raise
        logger.warning("skipping d=%d delta=%d s=%d mask=%s: %s", d, delta, s, mask, e)
        return None
    return {
        'd': d,
        'delta': delta,
        's': s,
        'mask': mask,
        'kappa': spectrum.kappa,
        'sigma_min': spectrum.sigma_min,
        'sigma_max': spectrum.sigma_max,
        'spanning': spectrum.spanning,
    }


def condition_sweep(points: Sequence[GridPoint], masks: Sequence[str], threads: int = 1,
                    strict: bool = False) -> List[Dict[str, Any]]:
    """
    Condition numbers over a grid; one row per (point, mask) in grid order.

    Masks refused at a grid point are logged and skipped unless ``strict``.
    """
    jobs = [(point, mask) for point in points for mask in masks]
    rows = ordered_map(lambda job: _condition_row(*job, strict=strict), jobs, threads)
    return [row for row in rows if row is not None]


@dataclass
class SweepResult:
    rows: List[Dict[str, Any]]
    slope: float | None = None

    def to_dict(self) -> Dict[str, Any]:
        return {'rows': self.rows, 'slope': self.slope}


def _snr_trial(family: MaskFamily, s: int, snr: float, seed: int, config: RecoveryConfig, plan) -> Tuple[float, ...]:
    rng = np.random.Generator(np.random.Philox(seed))
    x0 = random_signal(family.d, rng)
    clean = forward(family, x0, s)
    noisy = add_noise(clean, NoiseSpec(snr, seed + 1))
    report = recover(noisy, family, s, config, plan, x0)
    scale = float(np.linalg.norm(x0))
    mag_error = float(np.linalg.norm(report.magnitudes - np.abs(x0))) / scale
    phase_error = aligned_error(report.phases, signum(x0)) / math.sqrt(family.d)
    return report.relative_error, mag_error, phase_error


def snr_sweep(family: MaskFamily, s: int, snrs: Sequence[float], trials: int = 32, seed: int = 0,
              config: RecoveryConfig | None = None, threads: int = 1) -> SweepResult:
    """
    Mean recovery errors per SNR over ``trials`` random signals.

    The slope is the fitted exponent of the aligned error against 1/SNR over
    the finite SNRs.
    """
    if trials < 1:
        raise ValidationError(f"trials must be positive, got {trials}")
    config = config or RecoveryConfig()
    plan = plan_inverse(family, s)
    rows = []
    for index, snr in enumerate(snrs):
        seeds = [seed + 1000 * index + 2 * t for t in range(trials)]
        errors = np.array(ordered_map(lambda sd: _snr_trial(family, s, snr, sd, config, plan), seeds, threads))
        rows.append({
            'snr': float(snr),
            'aligned_rel_error': float(errors[:, 0].mean()),
            'mag_error': float(errors[:, 1].mean()),
            'phase_error': float(errors[:, 2].mean()),
        })
        logger.info("snr-sweep SNR=%.3g: aligned relative error %.3g", snr, rows[-1]['aligned_rel_error'])
    finite = [r for r in rows if math.isfinite(r['snr']) and r['aligned_rel_error'] > 0]
    slope = None
    if len(finite) >= 2:
        slope = fitted_exponent([1 / r['snr'] for r in finite], [r['aligned_rel_error'] for r in finite])
    return SweepResult(rows, slope)


def magnitude_comparison(d: int, delta: int, s: int, snrs: Sequence[float], trials: int = 10,
                         seed: int = 0) -> List[Dict[str, Any]]:
    """
    Relative magnitude error of blk_mag for the singleton, delta-interval and
    partition coverings under Hermitian band perturbations, with the matching bound.
    """
    spec = BandSpec(d, delta, s)
    coverings = [make_singleton_covering(spec), make_interval_covering(spec, delta), make_partition_covering(spec)]
    rng = np.random.Generator(np.random.Philox(seed))
    rows = []
    for index, snr in enumerate(snrs):
        totals = {c.kind: [0.0, 0.0] for c in coverings}
        for t in range(trials):
            x0 = random_signal(d, rng)
            X0 = BandedHermitian.from_rank_one(x0, spec)
            X = X0 + hermitian_band_perturbation(X0, snr, seed + 1000 * index + t)
            scale = float(np.linalg.norm(x0))
            for covering in coverings:
                error = float(np.linalg.norm(blk_mag(X, covering) - np.abs(x0))) / scale
                if covering.kind == 'singleton':
                    bound = singleton_error_bound(X, X0, x0) / scale
                else:
                    bound = blk_mag_error_bound(x0, covering, (X - X0).frobenius_norm()) / scale
                totals[covering.kind][0] += error
                totals[covering.kind][1] += bound
        for kind, (error, bound) in totals.items():
            rows.append({'snr': float(snr), 'covering': kind, 'mag_error': error / trials, 'bound': bound / trials})
    return rows


def _tau_row(point: GridPoint) -> Dict[str, Any]:
    d, delta, s = point
    gap = spectral_gap_tau(BandSpec(d, delta, s))
    return {
        'd': d,
        'delta': delta,
        's': s,
        'tau': gap.tau,
        'degree_min': gap.degree_min,
        'degree_max': gap.degree_max,
        'in_regime': gap.in_regime,
    }


def tau_sweep(points: Sequence[GridPoint], threads: int = 1) -> List[Dict[str, Any]]:
    return ordered_map(_tau_row, points, threads)


@dataclass
class CheckResult:
    module: str
    name: str
    passed: bool
    detail: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return {'module': self.module, 'check': self.name, 'passed': self.passed, 'detail': self.detail}


@dataclass
class _Check:
    module: str
    name: str
    run: Callable[[], Tuple[bool, str]] = field(repr=False)


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300))


def _check_interleave() -> Tuple[bool, str]:
    v = np.random.default_rng(1).standard_normal(12)
    back = structure.InterleavePerm(3, 4).apply(structure.InterleavePerm(4, 3).apply(v))
    return bool(np.array_equal(back, v)), 'P(3,4) P(4,3) v = v'


def _check_circ() -> Tuple[bool, str]:
    v = np.random.default_rng(2).standard_normal(16) + 0j
    F = structure.dft_matrix(16)
    err = np.linalg.norm(structure.circ(v) - F @ np.diag(np.sqrt(16) * F.conj().T @ v) @ F.conj().T)
    return bool(err <= 1e-10 * np.linalg.norm(v) * 16), f'circ factorization error {err:.2e}'


def _check_band_roundtrip() -> Tuple[bool, str]:
    spec = BandSpec(8, 3)
    X = BandedHermitian.from_rank_one(random_signal(8, np.random.default_rng(3)), spec)
    err = _relative(diag_devectorize(diag_vectorize(X), spec).to_dense(), X.to_dense())
    return err <= 1e-14, f'round trip error {err:.2e}'


def _check_ptych_kronecker() -> Tuple[bool, str]:
    pattern = BandSpec(12, 4, 2).pattern()
    coarse = BandSpec(6, 2).pattern()
    ok = np.array_equal(pattern, np.kron(coarse, np.ones((2, 2), dtype=bool)))
    return bool(ok), 'T_{4,2}(11^*) = T_2(11^*) (x) 1_2 1_2^*'


def _random_family(d: int, delta: int, s: int, seed: int = 0) -> MaskFamily:
    return family_from_descriptor(f'rand:seed={seed},D={2 * s * (2 * delta - s)}', d, delta, s)


def _check_dense_forward() -> Tuple[bool, str]:
    family = _random_family(16, 4, 2)
    spec = BandSpec(16, 4, 2)
    X = hermitian_band_perturbation(BandedHermitian.from_rank_one(np.ones(16), spec), 1.0, 4)
    err = _relative(assemble_dense_A(family, 2) @ diag_vectorize(X), forward(family, X, 2).flatten())
    return err <= 1e-10, f'dense vs structured forward {err:.2e}'


def _check_block_oracle() -> Tuple[bool, str]:
    family = _random_family(12, 4, 2)
    fast = block_spectrum(family, 2).all_singular_values()
    dense = dense_singular_values(family, 2)[:fast.size]
    err = float(np.max(np.abs(fast - dense)) / dense[0])
    return err <= 1e-8, f'block vs dense singular values {err:.2e}'


def _check_constant_mask() -> Tuple[bool, str]:
    kappa = block_spectrum(local_fourier_family(constant_mask(3, 2)), 1).kappa
    return abs(kappa - 2.0) <= 1e-10 * 2.0, f'kappa(const, d=3, delta=2) = {kappa:.12g}'


def _check_fast_inverse() -> Tuple[bool, str]:
    family = local_fourier_family(near_flat_mask(16, 3))
    plan = plan_inverse(family, 1)
    X = BandedHermitian.from_rank_one(random_signal(16, np.random.default_rng(5)), BandSpec(16, 3))
    err = _relative(invert(plan, forward(family, X, 1)).to_dense(), X.to_dense())
    return err <= 1e-9 and plan.mode == 'fast-fourier', f'{plan.mode} round trip {err:.2e}'


def _check_recover() -> Tuple[bool, str]:
    family = _random_family(24, 4, 2)
    x0 = random_signal(24, np.random.default_rng(6))
    report = recover(forward(family, x0, 2), family, 2, x0=x0)
    return report.relative_error <= 1e-8, f'noiseless aligned relative error {report.relative_error:.2e}'


SELFTEST_CHECKS = [
    _Check('structure', 'interleave inverse', _check_interleave),
    _Check('structure', 'circulant diagonalization', _check_circ),
    _Check('banded', 'diagonal vectorization round trip', _check_band_roundtrip),
    _Check('banded', 'stride pattern Kronecker structure', _check_ptych_kronecker),
    _Check('operator', 'dense matrix agrees with forward', _check_dense_forward),
    _Check('conditioning', 'block spectrum matches dense SVD', _check_block_oracle),
    _Check('conditioning', 'constant mask closed form', _check_constant_mask),
    _Check('inversion', 'fast inverse round trip', _check_fast_inverse),
    _Check('recovery', 'noiseless recovery', _check_recover),
]


def selftest(threads: int = 1) -> List[CheckResult]:
    """Desk-scale oracle checks, one per module contract."""

    def run(check: _Check) -> CheckResult:
        try:
            passed, detail = check.run()
        except PtychoError as e:
            passed, detail = False, f'{type(e).__name__}: {e}'
        if not passed:
            logger.warning("selftest %s/%s failed: %s", check.module, check.name, detail)
        return CheckResult(check.module, check.name, bool(passed), detail)

    return ordered_map(run, SELFTEST_CHECKS, threads)
