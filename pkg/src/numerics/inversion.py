"""
Inverting the measurement operator on T_{delta,s}.

Two plans share one interface. ``fast-fourier`` applies to s = 1 local Fourier
families with K = D = 2 delta - 1: the mask index is undone with one K-point
FFT and every diagonal is then a single circular deconvolution, O(delta d log d)
overall. ``block-pinv`` covers everything else with the Moore-Penrose inverse
of each frequency block.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

import numpy as np
import scipy.fft
from sklearn.linear_model import LinearRegression

from config import Config
from src.exceptions import DimensionError, NonSpanningError, ValidationError
from src.numerics.banded import BandedHermitian, BandSpec
from src.numerics.conditioning import (
    DiagonalCorrelations,
    PtychoBasis,
    block_columns,
    block_spectrum,
    build_ptycho_basis,
)
from src.numerics.masks import MaskFamily, local_fourier_family, near_flat_mask
from src.numerics.operator import MeasurementGrid, forward, stride_spec

logger = logging.getLogger(__name__)

FAST_FOURIER = 'fast-fourier'
BLOCK_PINV = 'block-pinv'


@dataclass(frozen=True, eq=False)
class InversePlan:
    """
    Precomputed frequency-domain factors for one (family, s).

    fast-fourier: ``factors`` is conj of the DFT of every g_m, shape (2 delta - 1, d).
    block-pinv: ``factors`` is the stack of pinv(M_k), shape (d/s, C, D).
    """

    family: MaskFamily
    s: int
    mode: str
    spec: BandSpec
    factors: np.ndarray = field(repr=False)
    basis: PtychoBasis | None = None

    @property
    def d_bar(self) -> int:
        return self.spec.d_bar

    def _check_grid(self, y: MeasurementGrid) -> None:
        if (y.d_bar, y.D) != (self.d_bar, self.family.D):
            raise DimensionError(
                f"measurements have shape ({y.d_bar}, {y.D}), plan expects ({self.d_bar}, {self.family.D})"
            )

    def raw_diagonals(self, y: MeasurementGrid) -> np.ndarray:
        """Unsymmetrized solution chi_m for m = 1-delta..delta-1, shape (2 delta - 1, d)."""
        self._check_grid(y)
        if self.mode == FAST_FOURIER:
            K = self.family.modulation
            combined = scipy.fft.fft(y.values, axis=1)[:, self.spec.offsets % K] / K
            return scipy.fft.ifft(scipy.fft.fft(combined.T, axis=-1) / self.factors, axis=-1)
        spectrum = scipy.fft.fft(y.values, axis=0)
        coeffs = scipy.fft.ifft(np.einsum('kcj,kj->kc', self.factors, spectrum), axis=0)
        chi = np.zeros((2 * self.spec.delta - 1, self.spec.d), dtype=complex)
        for col, (m, r) in enumerate(block_columns(self.spec)):
            chi[m + self.spec.delta - 1, r::self.s] = coeffs[:, col]
        return chi

    def recover_diagonal(self, y: MeasurementGrid, m: int) -> np.ndarray:
        """chi_m alone; in fast mode this costs two length-d FFTs after the mask combination."""
        if abs(m) >= self.spec.delta:
            raise DimensionError(f"offset {m} is outside the band of width {self.spec.delta}")
        if self.mode != FAST_FOURIER:
            return self.raw_diagonals(y)[m + self.spec.delta - 1]
        self._check_grid(y)
        K = self.family.modulation
        weights = np.exp(-2j * np.pi * np.arange(K) * m / K) / K
        combined = y.values @ weights
        return scipy.fft.ifft(scipy.fft.fft(combined) / self.factors[m + self.spec.delta - 1])

    def diagonal_noise_variance(self) -> np.ndarray:
        """
        Per-entry variance of each unsymmetrized chi_m under unit white measurement noise.

        Averaged over the active entries of the diagonal. In fast mode this is
        (1/K)(1/d) sum_k |g_m^(k)|^-2.
        """
        if self.mode == FAST_FOURIER:
            K = self.family.modulation
            return np.mean(np.abs(self.factors) ** -2, axis=-1) / K
        row_energy = np.sum(np.abs(self.factors) ** 2, axis=(0, 2)) / self.d_bar
        out = np.zeros(2 * self.spec.delta - 1)
        counts = np.zeros(2 * self.spec.delta - 1)
        for col, (m, _) in enumerate(block_columns(self.spec)):
            out[m + self.spec.delta - 1] += row_energy[col]
            counts[m + self.spec.delta - 1] += 1
        return out / counts


@dataclass(frozen=True, eq=False)
class InversionResult:
    estimate: BandedHermitian
    asymmetry: float


def plan_inverse(family: MaskFamily, s: int = 1, rank_tol: float | None = None) -> InversePlan:
    """Build the plan; refuses non-spanning families with the weakest frequency as witness."""
    spec = stride_spec(family, s)
    rank_tol = Config.RANK_TOL if rank_tol is None else rank_tol
    fast = s == 1 and family.is_fourier and family.modulation == family.D == 2 * family.delta - 1
    if fast:
        factors = np.conj(DiagonalCorrelations.for_family(family).shared_spectrum())
        magnitudes = np.abs(factors)
        if magnitudes.min() <= rank_tol * magnitudes.max():
            witness = int(np.argmin(magnitudes.min(axis=0)))
            raise NonSpanningError(
                f"family {family.kind} does not span T_{family.delta} (d={family.d}): "
                f"frequency {witness} is rank deficient",
                witness,
            )
        logger.info("planned %s inverse for d=%d delta=%d", FAST_FOURIER, family.d, family.delta)
        return InversePlan(family, s, FAST_FOURIER, spec, factors)
    if family.is_fourier:
        logger.warning("family %s (K=%s, D=%d, s=%d) has no fast inverse; falling back to %s",
                       family.kind, family.modulation, family.D, s, BLOCK_PINV)
    spectrum = block_spectrum(family, s, method='svd', rank_tol=rank_tol)
    if not spectrum.spanning:
        raise NonSpanningError(
            f"family {family.kind} (D={family.D}) does not span T_{{{family.delta},{s}}} (d={family.d}): "
            f"frequency {spectrum.witness} is rank deficient",
            spectrum.witness,
        )
    factors = np.linalg.pinv(spectrum.blocks)
    logger.info("planned %s inverse for d=%d delta=%d s=%d (kappa=%.4g)", BLOCK_PINV, family.d, family.delta, s,
                spectrum.kappa)
    return InversePlan(family, s, BLOCK_PINV, spec, factors, build_ptycho_basis(spec))


def hermitian_part(chi: np.ndarray, spec: BandSpec) -> InversionResult:
    """Average the solution with its adjoint and report ||X - X^*||_F."""
    delta = spec.delta
    mirrored = np.stack([np.conj(np.roll(chi[delta - 1 - m], -m)) for m in range(1 - delta, delta)])
    asymmetry = float(np.linalg.norm(chi - mirrored))
    upper = (chi[delta - 1:] + mirrored[delta - 1:]) / 2
    return InversionResult(BandedHermitian(spec, upper), asymmetry)


def invert_with_diagnostics(plan: InversePlan, y: MeasurementGrid) -> InversionResult:
    result = hermitian_part(plan.raw_diagonals(y), plan.spec)
    scale = max(result.estimate.frobenius_norm(), np.finfo(float).tiny)
    if result.asymmetry > 1e-8 * scale:
        logger.debug("inverse image asymmetry %.3g (relative %.3g)", result.asymmetry, result.asymmetry / scale)
    return result


def invert(plan: InversePlan, y: MeasurementGrid) -> BandedHermitian:
    """X in T_{delta,s} with A(X) = y (least squares per block when y is outside the range)."""
    return invert_with_diagnostics(plan, y).estimate


@dataclass
class BenchmarkResult:
    rows: List[Dict[str, Any]]
    exponent: float
    exponent_dlogd: float

    def to_dict(self) -> Dict[str, Any]:
        return {'rows': self.rows, 'exponent': self.exponent, 'exponent_dlogd': self.exponent_dlogd}


def fitted_exponent(x: Sequence[float], t: Sequence[float]) -> float:
    """Slope of log t against log x."""
    model = LinearRegression().fit(np.log(np.asarray(x, dtype=float)).reshape(-1, 1), np.log(np.asarray(t, dtype=float)))
    return float(model.coef_[0])


def invert_benchmark(delta: int, sizes: Sequence[int], repeats: int = 5, seed: int = 0,
                     a: float | None = None) -> BenchmarkResult:
    """
    Median wall time of the fast inverse for each d in ``sizes`` at fixed delta.

    Each size gets its own near-flat Fourier family. The fitted exponents are
    reported against d and against d log d.
    """
    if repeats < 1:
        raise ValidationError(f"repeats must be positive, got {repeats}")
    if len(sizes) < 2:
        raise ValidationError("a benchmark needs at least two sizes")
    rng = np.random.Generator(np.random.Philox(seed))
    rows = []
    for d in sizes:
        family = local_fourier_family(near_flat_mask(int(d), delta, a), kind='flat')
        plan = plan_inverse(family, 1)
        x = rng.standard_normal(int(d)) + 1j * rng.standard_normal(int(d))
        y = forward(family, x, 1)
        times = []
        for _ in range(repeats):
            start = time.perf_counter()
            invert(plan, y)
            times.append(time.perf_counter() - start)
        median_ms = float(np.median(times) * 1e3)
        logger.info("bench-invert d=%d delta=%d: %.3f ms", d, delta, median_ms)
        rows.append({'d': int(d), 'delta': delta, 'mode': plan.mode, 'median_ms': median_ms})
    ds = np.array([r['d'] for r in rows], dtype=float)
    ts = np.array([r['median_ms'] for r in rows])
    return BenchmarkResult(rows, fitted_exponent(ds, ts), fitted_exponent(ds * np.log(ds), ts))
