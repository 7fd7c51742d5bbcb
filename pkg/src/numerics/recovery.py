"""
Signal recovery from an estimate of T_{delta,s}(x0 x0^*).

Magnitudes come from blockwise leading eigenvectors over a covering, phases
from the leading eigenvector of the entrywise sign of the band, and the two
are multiplied back together.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from config import Config
from src.exceptions import DimensionError, ValidationError
from src.numerics.banded import BandedHermitian, BandSpec, Covering, make_interval_covering
from src.numerics.inversion import InversePlan, invert_with_diagnostics, plan_inverse
from src.numerics.masks import MaskFamily
from src.numerics.operator import MeasurementGrid

logger = logging.getLogger(__name__)

EIG_SOLVERS = ('auto', 'dense', 'power')
SIGN_CLAMP = 1e-12


@dataclass(frozen=True)
class RecoveryConfig:
    """Covering and eigen-solver settings; ``covering=None`` means the delta-interval covering."""

    covering: Covering | None = None
    eig_solver: str = 'auto'
    tolerance: float = Config.POWER_TOL
    max_iter_factor: int = Config.POWER_MAX_ITER_FACTOR
    zero_phase_fill: complex = 1.0
    compute_gap: bool = False
    power_seed: int = 0

    def __post_init__(self):
        if self.eig_solver not in EIG_SOLVERS:
            raise ValidationError(f"unknown eigen-solver {self.eig_solver!r}; use one of {EIG_SOLVERS}")
        if not self.tolerance > 0 or self.max_iter_factor < 1:
            raise ValidationError("power iteration needs a positive tolerance and iteration factor")

    def covering_for(self, spec: BandSpec) -> Covering:
        if self.covering is None:
            return make_interval_covering(spec, spec.delta)
        if self.covering.spec != spec:
            raise ValidationError(f"covering was built for {self.covering.spec}, measurements use {spec}")
        return self.covering


@dataclass(frozen=True, eq=False)
class PhaseEstimate:
    phases: np.ndarray = field(repr=False)
    eigenvalue: float = 0.0
    gap: float = math.nan
    degenerate: bool = False
    solver: str = 'dense'


@dataclass(frozen=True, eq=False)
class RecoveryReport:
    """The recovered signal x = |x| o x~ plus diagnostics."""

    estimate: np.ndarray = field(repr=False)
    magnitudes: np.ndarray = field(repr=False)
    phases: np.ndarray = field(repr=False)
    aligned_error: float | None = None
    relative_error: float | None = None
    spectral_gap: float | None = None
    degenerate: bool = False
    asymmetry: float = 0.0
    mode: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return {
            'estimate': [[float(z.real), float(z.imag)] for z in self.estimate],
            'magnitudes': self.magnitudes.tolist(),
            'aligned_error': self.aligned_error,
            'relative_error': self.relative_error,
            'spectral_gap': self.spectral_gap,
            'degenerate': self.degenerate,
            'asymmetry': self.asymmetry,
            'mode': self.mode,
        }


def signum(z: np.ndarray, fill: complex = 1.0) -> np.ndarray:
    """z / |z| with zeros mapped to ``fill``."""
    z = np.asarray(z)
    mag = np.abs(z)
    return np.where(mag == 0, fill, z / np.where(mag == 0, 1.0, mag))


def _power_iteration(apply: Callable[[np.ndarray], np.ndarray], d: int, shift: float, tolerance: float,
                     max_iter: int, seed: int = 0, start: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """
    Leading eigenpair of a Hermitian operator made positive semidefinite by ``shift``.

    Starts from a seeded random complex vector unless ``start`` is given, and
    stops once the residual ||A v - lambda v|| drops below ``tolerance`` times
    max(|lambda|, 1).
    """
    if start is None:
        rng = np.random.Generator(np.random.Philox(seed))
        start = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v = np.asarray(start, dtype=complex)
    v = v / np.linalg.norm(v)
    value = 0.0
    for _ in range(max_iter):
        w = apply(v) + shift * v
        value = float(np.vdot(v, w).real)
        if np.linalg.norm(w - value * v) <= tolerance * max(abs(value), 1.0):
            return v, value - shift
        v = w / np.linalg.norm(w)
    logger.warning("power iteration stopped at the %d-iteration cap before reaching tolerance %.1e", max_iter, tolerance)
    return v, value - shift


def _leading_nonnegative(A: np.ndarray, config: RecoveryConfig) -> np.ndarray:
    """Unit leading eigenvector of an entrywise nonnegative Hermitian matrix."""
    if A.shape[0] <= Config.BLOCK_DENSE_LIMIT:
        _, V = scipy.linalg.eigh(A, subset_by_index=[A.shape[0] - 1, A.shape[0] - 1])
        return V[:, 0].real
    v, _ = _power_iteration(lambda u: A @ u, A.shape[0], float(np.abs(A).sum(axis=1).max()),
                            config.tolerance, config.max_iter_factor * A.shape[0], start=np.ones(A.shape[0]))
    return v.real


def blk_mag(X: BandedHermitian, covering: Covering, config: RecoveryConfig | None = None) -> np.ndarray:
    """
    Blockwise magnitude estimate.

    For each set J the leading eigenvector of |X[J, J]| is scaled to length
    sqrt(||X[J, J]||_2) and made nonnegative; the per-index average over the
    sets containing it is returned.
    """
    config = config or RecoveryConfig()
    if covering.spec.d != X.spec.d:
        raise DimensionError(f"covering is for d={covering.spec.d}, matrix has d={X.spec.d}")
    total = np.zeros(X.spec.d)
    for J in covering.sets:
        block = X.block(J)
        spectral = float(scipy.linalg.norm(block, 2)) if block.size else 0.0
        if spectral == 0:
            continue
        u = _leading_nonnegative(np.abs(block), config)
        u = u / np.linalg.norm(u)
        if u.sum() < 0:
            u = -u
        u[(u < 0) & (u >= -SIGN_CLAMP)] = 0.0
        u = u * np.sqrt(spectral)
        total[J] += u
    return total / covering.multiplicities


def blk_mag_error_bound(x0: np.ndarray, covering: Covering, perturbation_norm: float) -> float:
    """(max mu / min mu) (1 + 2 sqrt 2) / min_i ||x0 on J_i|| * ||X - X0||_F."""
    x0 = np.asarray(x0)
    mu = covering.multiplicities
    weakest = min(float(np.linalg.norm(x0[J])) for J in covering.sets)
    if weakest == 0:
        return math.inf
    return float(mu.max() / mu.min() * (1 + 2 * math.sqrt(2)) / weakest * perturbation_norm)


def singleton_error_bound(X: BandedHermitian, X0: BandedHermitian, x0: np.ndarray) -> float:
    """||diag(X - X0)|| / min_i |x0_i|."""
    floor = float(np.min(np.abs(x0)))
    if floor == 0:
        return math.inf
    return float(np.linalg.norm(X.diagonals[0] - X0.diagonals[0]) / floor)


def phase_estimate(X: BandedHermitian, config: RecoveryConfig | None = None) -> PhaseEstimate:
    """
    sgn of the leading eigenvector of sgn(X) on the band.

    Zero band entries and zero eigenvector entries both become
    ``config.zero_phase_fill``. Dense eigh for d up to the configured limit,
    shifted power iteration with O(delta d) products above it.
    """
    config = config or RecoveryConfig()
    d = X.spec.d
    signs = X.map_entries(lambda v: signum(v, config.zero_phase_fill))
    solver = config.eig_solver
    if solver == 'auto':
        solver = 'dense' if d <= Config.EIG_DENSE_LIMIT else 'power'
    if solver == 'dense':
        w, V = scipy.linalg.eigh(signs.to_dense())
        v, top = V[:, -1], float(w[-1])
        gap = float(w[-1] - w[-2]) if d > 1 else math.inf
    else:
        v, top = _power_iteration(signs.matvec, d, float(2 * X.spec.delta - 1),
                                  config.tolerance, config.max_iter_factor * d, seed=config.power_seed)
        gap = math.nan
    degenerate = bool(gap < Config.DEGENERACY_GAP * abs(top))
    if degenerate:
        logger.warning("leading eigenvalue of the sign matrix is degenerate (gap %.3g, lambda %.6g)", gap, top)
    return PhaseEstimate(signum(v, config.zero_phase_fill), top, gap, degenerate, solver)


@dataclass(frozen=True)
class SpectralGap:
    tau: float
    degree_min: int
    degree_max: int
    in_regime: bool


def spectral_gap_tau(spec: BandSpec) -> SpectralGap:
    """
    Second-smallest eigenvalue of I - D^{-1/2} W D^{-1/2} on the band graph.

    W is the band pattern without self loops. The reported degree counts the
    pattern row including its diagonal entry, which is 2 delta - s when s | delta
    and delta | d.
    """
    in_regime = spec.delta % spec.s == 0 and spec.d % spec.delta == 0
    if not in_regime:
        logger.warning("spectral gap for %s is outside the s | delta, delta | d regime", spec)
    degree = spec.degree()
    if int(degree.min()) <= 1:
        # an isolated vertex disconnects the graph
        logger.warning("band graph for %s has an isolated vertex; tau is 0", spec)
        return SpectralGap(0.0, int(degree.min()), int(degree.max()), in_regime)
    if spec.d <= Config.EIG_DENSE_LIMIT:
        W = spec.pattern().astype(float) - np.eye(spec.d)
        scale = 1 / np.sqrt(W.sum(axis=1))
        laplacian = np.eye(spec.d) - scale[:, None] * W * scale[None, :]
        tau = float(scipy.linalg.eigh(laplacian, eigvals_only=True, subset_by_index=[1, 1])[0])
    else:
        rows = np.repeat(np.arange(spec.d), 2 * spec.delta - 1)
        offs = np.tile(spec.offsets, spec.d)
        cols = (rows + offs) % spec.d
        keep = (offs != 0) & spec.contains(rows, cols)
        W = scipy.sparse.csr_matrix((np.ones(keep.sum()), (rows[keep], cols[keep])), shape=(spec.d, spec.d))
        scale = scipy.sparse.diags(1 / np.sqrt(np.asarray(W.sum(axis=1)).ravel()))
        top = scipy.sparse.linalg.eigsh(scale @ W @ scale, k=2, which='LA', return_eigenvectors=False)
        tau = float(1 - np.sort(top)[0])
    return SpectralGap(tau, int(degree.min()), int(degree.max()), in_regime)


def aligned_error(x: np.ndarray, x0: np.ndarray) -> float:
    """min over theta of ||x - e^{i theta} x0||, attained where e^{-i theta} <x, x0> is real and nonnegative."""
    x, x0 = np.asarray(x, dtype=complex), np.asarray(x0, dtype=complex)
    if x.shape != x0.shape:
        raise DimensionError(f"signals have different shapes {x.shape} and {x0.shape}")
    c = np.vdot(x0, x)
    phase = c / abs(c) if c != 0 else 1.0
    return float(np.linalg.norm(x - phase * x0))


def recover(y: MeasurementGrid, family: MaskFamily, s: int = 1, config: RecoveryConfig | None = None,
            plan: InversePlan | None = None, x0: np.ndarray | None = None) -> RecoveryReport:
    """Invert, estimate magnitudes and phases, recombine; errors are filled in when x0 is given."""
    config = config or RecoveryConfig()
    plan = plan_inverse(family, s) if plan is None else plan
    if plan.family is not family and (plan.s != s or plan.family.d != family.d or plan.family.D != family.D):
        raise ValidationError("inverse plan was built for a different family or stride")
    inverted = invert_with_diagnostics(plan, y)
    X = inverted.estimate
    magnitudes = blk_mag(X, config.covering_for(plan.spec), config)
    phase = phase_estimate(X, config)
    estimate = magnitudes * phase.phases
    aligned = relative = None
    if x0 is not None:
        aligned = aligned_error(estimate, x0)
        relative = aligned / float(np.linalg.norm(x0))
    gap = spectral_gap_tau(plan.spec).tau if config.compute_gap else None
    return RecoveryReport(estimate, magnitudes, phase.phases, aligned, relative, gap, phase.degenerate,
                          inverted.asymmetry, plan.mode)
