"""
Frequency-block diagonalization of the measurement operator.

After splitting each diagonal chi_m into its s polyphase components
chi_m[s q + r], the operator becomes a block convolution over the shift index.
A length-d/s FFT turns it into d/s independent D x C blocks M_k, one column per
active (offset, residue) pair, C = s(2 delta - s). The singular values of the
operator on T_{delta,s} are exactly the union of the singular values of the M_k.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import scipy.fft
import scipy.linalg

from config import Config
from src.exceptions import SizeGuardError, ValidationError
from src.numerics.banded import BandSpec
from src.numerics.masks import Mask, MaskFamily
from src.numerics.operator import assemble_dense_A, mask_correlations, stride_spec

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DiagonalCorrelations:
    """
    The correlation vectors g_m^j = diag(m_j m_j^*, m) of a family.

    ``per_mask`` has shape (D, 2 delta - 1, d). For local Fourier families
    ``shared`` holds g_m = gamma o S^{-m} gamma, from which every g_m^j follows
    by the phase factor w_K^{-j m}.
    """

    d: int
    delta: int
    per_mask: np.ndarray = field(repr=False)
    shared: np.ndarray | None = field(default=None, repr=False)
    modulation: int | None = None

    @classmethod
    def for_family(cls, family: MaskFamily) -> 'DiagonalCorrelations':
        per_mask = mask_correlations(family)
        shared = None
        if family.is_fourier:
            gamma = family.window.values
            shared = np.stack([gamma * np.conj(np.roll(gamma, -m)) for m in range(1 - family.delta, family.delta)])
        return cls(family.d, family.delta, per_mask, shared, family.modulation)

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(1 - self.delta, self.delta)

    def shared_spectrum(self) -> np.ndarray:
        """Unnormalized DFT of each g_m along the index axis, shape (2 delta - 1, d)."""
        if self.shared is None:
            raise ValidationError("shared correlations exist only for local Fourier families")
        return scipy.fft.fft(self.shared, axis=-1)

    def z_matrix(self) -> np.ndarray:
        """Z[m, l] = sqrt(dK) f_{-l}^* g_m, which equals the unnormalized DFT of g_m at frequency l."""
        return self.shared_spectrum()


@dataclass(frozen=True, eq=False)
class PtychoBasis:
    """Column selector N of the diagonal vectorization onto T_{delta,s}."""

    spec: BandSpec
    residues: Dict[int, np.ndarray] = field(repr=False)
    active_indices: np.ndarray = field(repr=False)

    @property
    def column_counts(self) -> Dict[int, int]:
        """Columns kept per s-block for each offset, min{s, delta - |m|}."""
        return {m: int(r.size) for m, r in self.residues.items()}

    @property
    def size(self) -> int:
        return int(self.active_indices.size)

    def matrix(self, limit: int | None = None) -> np.ndarray:
        rows = (2 * self.spec.delta - 1) * self.spec.d
        limit = Config.DENSE_SIZE_LIMIT if limit is None else limit
        if rows > limit:
            raise SizeGuardError('PtychoBasis.matrix', rows, limit)
        return np.eye(rows)[:, self.active_indices]

    def restrict(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v)[self.active_indices]


def build_ptycho_basis(spec: BandSpec) -> PtychoBasis:
    residues = {int(m): spec.active_residues(int(m)) for m in spec.offsets}
    masks = np.concatenate([spec.diagonal_mask(int(m)) for m in spec.offsets])
    return PtychoBasis(spec, residues, np.flatnonzero(masks))


def block_columns(spec: BandSpec) -> List[Tuple[int, int]]:
    """Active (offset m, residue r) pairs in column order."""
    return [(int(m), int(r)) for m in spec.offsets for r in spec.active_residues(int(m))]


def polyphase_blocks(family: MaskFamily, s: int = 1) -> np.ndarray:
    """
    The stacked frequency blocks, shape (d/s, D, C).

    M_k[j, (m, r)] = conj(sum_q g_m^j[s q + r] e^{-2 pi i k q / (d/s)}).
    """
    spec = stride_spec(family, s)
    g = mask_correlations(family)
    columns = [
        np.conj(scipy.fft.fft(g[:, m + family.delta - 1, r::s], axis=-1))
        for m, r in block_columns(spec)
    ]
    return np.stack(columns, axis=-1).transpose(1, 0, 2)


@dataclass(frozen=True, eq=False)
class BlockSpectrum:
    """Per-frequency blocks of the operator on T_{delta,s} and their singular values."""

    spec: BandSpec
    blocks: np.ndarray = field(repr=False)
    singular_values: np.ndarray = field(repr=False)
    method: str = 'svd'
    rank_tol: float = 1e-10

    @property
    def columns(self) -> List[Tuple[int, int]]:
        return block_columns(self.spec)

    @property
    def block_minima(self) -> np.ndarray:
        """sigma_min of each block; zero for wide blocks, which always have a kernel."""
        if self.blocks.shape[1] < self.blocks.shape[2]:
            return np.zeros(self.blocks.shape[0])
        return self.singular_values.min(axis=1)

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values.max())

    @property
    def sigma_min(self) -> float:
        return float(self.block_minima.min())

    @property
    def spanning(self) -> bool:
        return self.sigma_min > self.rank_tol * self.sigma_max

    @property
    def kappa(self) -> float:
        return self.sigma_max / self.sigma_min if self.spanning else math.inf

    @property
    def witness(self) -> int | None:
        """0-based frequency index of the weakest block when not spanning."""
        return None if self.spanning else int(np.argmin(self.block_minima))

    def all_singular_values(self) -> np.ndarray:
        return np.sort(self.singular_values.ravel())[::-1]

    def to_dict(self) -> Dict:
        return {
            **self.spec.to_dict(),
            'kappa': self.kappa,
            'sigma_min': self.sigma_min,
            'sigma_max': self.sigma_max,
            'spanning': self.spanning,
            'witness': self.witness,
            'method': self.method,
        }


def _fourier_closed_form(family: MaskFamily) -> bool:
    return family.is_fourier and family.modulation == family.D == 2 * family.delta - 1


def block_spectrum(family: MaskFamily, s: int = 1, method: str = 'auto', rank_tol: float | None = None) -> BlockSpectrum:
    """
    Singular values of every frequency block without assembling A.

    ``method='auto'`` reads them in closed form, sqrt(K) |g_m^(k)|, for s = 1
    local Fourier families with K = D = 2 delta - 1 and falls back to batched
    SVDs otherwise; ``method='svd'`` always runs the SVDs.
    """
    if method not in ('auto', 'svd'):
        raise ValidationError(f"unknown spectrum method {method!r}; use auto or svd")
    rank_tol = Config.RANK_TOL if rank_tol is None else rank_tol
    spec = stride_spec(family, s)
    blocks = polyphase_blocks(family, s)
    if method == 'auto' and s == 1 and _fourier_closed_form(family):
        spectrum = DiagonalCorrelations.for_family(family).shared_spectrum()
        sv = -np.sort(-np.sqrt(family.modulation) * np.abs(spectrum.T), axis=1)
        used = 'fourier'
    else:
        sv = np.linalg.svd(blocks, compute_uv=False)
        used = 'svd'
    result = BlockSpectrum(spec, blocks, sv, used, rank_tol)
    logger.debug("block spectrum d=%d delta=%d s=%d D=%d via %s: kappa=%.6g",
                 spec.d, spec.delta, s, family.D, used, result.kappa)
    return result


@dataclass(frozen=True)
class SpanningReport:
    spanning: bool
    witness: int | None
    kappa: float
    sigma_min: float
    sigma_max: float


def spanning_check(family: MaskFamily, s: int = 1, rank_tol: float | None = None) -> SpanningReport:
    """Full column rank of every frequency block, relative to the largest singular value overall."""
    spectrum = block_spectrum(family, s, rank_tol=rank_tol)
    if not spectrum.spanning:
        logger.warning("family %s (d=%d, delta=%d, D=%d) does not span T_{delta,s} for s=%d; weakest frequency %d",
                       family.kind, family.d, family.delta, family.D, s, spectrum.witness)
    return SpanningReport(spectrum.spanning, spectrum.witness, spectrum.kappa, spectrum.sigma_min, spectrum.sigma_max)


@dataclass(frozen=True, eq=False)
class FourierKappa:
    """Condition number of a local Fourier family: exact when K = D, an upper bound when K > D."""

    kappa: float
    sigma_min: float
    sigma_max: float
    per_frequency_minima: np.ndarray = field(repr=False)
    exact: bool = True
    modulation_kappa: float = 1.0
    witness: Tuple[int, int] | None = None

    @property
    def spanning(self) -> bool:
        return self.witness is None


def modulation_matrix(K: int, D: int) -> np.ndarray:
    """The D x D principal submatrix of the unitary DFT of size K."""
    j = np.arange(D)
    return np.exp(2j * np.pi * np.outer(j, j) / K) / np.sqrt(K)


def fourier_family_kappa(gamma: Mask, K: int | None = None, D: int | None = None,
                         rank_tol: float | None = None) -> FourierKappa:
    """
    kappa = ||gamma||^2 / min_{m,k} |g_m^(k)| for K = D = 2 delta - 1.

    g_m^(k) is the unnormalized DFT of gamma o S^{-m} gamma. For K > D the
    value is multiplied by kappa of the truncated K-point DFT and is only an
    upper bound. A vanishing g_m^(k) makes the family non-spanning and is
    reported as the witness (m, k), k 0-based.
    """
    delta = gamma.delta
    D = 2 * delta - 1 if D is None else int(D)
    K = D if K is None else int(K)
    if D != 2 * delta - 1:
        raise ValidationError(f"closed-form condition number needs D = 2*delta-1 = {2 * delta - 1}, got D={D}")
    if K < D:
        raise ValidationError(f"modulation index K={K} must be at least D={D}")
    if 2 * delta - 1 > gamma.d:
        raise ValidationError(f"band 2*delta-1={2 * delta - 1} does not fit in d={gamma.d}")
    rank_tol = Config.RANK_TOL if rank_tol is None else rank_tol
    family = MaskFamily(gamma.d, delta, gamma.values[None, :], window=gamma, modulation=K)
    magnitudes = np.abs(DiagonalCorrelations.for_family(family).shared_spectrum())
    peak = gamma.squared_norm
    floor = float(magnitudes.min())
    witness = None
    if floor <= rank_tol * peak:
        m_idx, k = np.unravel_index(np.argmin(magnitudes), magnitudes.shape)
        witness = (int(m_idx) - (delta - 1), int(k))
        logger.warning("window is not spanning: diagonal %d vanishes at frequency %d", witness[0], witness[1])
    modulation_kappa = 1.0
    exact = K == D
    if exact:
        smin_w = smax_w = np.sqrt(K)
    else:
        w_sv = scipy.linalg.svdvals(modulation_matrix(K, D) * np.sqrt(K))
        smax_w, smin_w = float(w_sv.max()), float(w_sv.min())
        modulation_kappa = smax_w / smin_w
    kappa = math.inf if witness else peak / floor * modulation_kappa
    return FourierKappa(
        kappa=kappa,
        sigma_min=float(smin_w * floor),
        sigma_max=float(smax_w * peak),
        per_frequency_minima=smin_w * magnitudes.min(axis=0),
        exact=exact,
        modulation_kappa=modulation_kappa,
        witness=witness,
    )


def is_strictly_rough(d: int, delta: int) -> bool:
    """True iff every divisor k > 1 of d exceeds delta."""
    if d < 1 or delta < 1:
        raise ValidationError(f"d and delta must be positive, got d={d}, delta={delta}")
    return all(d % k for k in range(2, delta + 1))


def adversarial_direction(spectrum: BlockSpectrum) -> np.ndarray:
    """
    Real (d/s, D) measurement pattern along the weakest frequency block.

    The left singular vector u of the smallest singular value of the weakest
    block M_k is placed at frequency k and mapped back to the shift domain;
    the real part is kept (the imaginary part when the real part vanishes).
    """
    k = int(np.argmin(spectrum.block_minima))
    U, _, _ = np.linalg.svd(spectrum.blocks[k], full_matrices=False)
    u = U[:, -1]
    d_bar = spectrum.blocks.shape[0]
    phases = np.exp(2j * np.pi * k * np.arange(d_bar) / d_bar)
    pattern = np.outer(phases, u)
    real = pattern.real
    if np.linalg.norm(real) <= 1e-12 * np.linalg.norm(pattern):
        real = pattern.imag
    return real / np.linalg.norm(real)


def exponential_kappa_bound(delta: int) -> float:
    return max(144 * math.e ** 2, (3 * math.e * (delta - 1) / 2) ** 2)


def near_flat_kappa_bound(delta: int, a: float | None = None) -> float:
    """(a^2 + 2a + delta) / (a - delta + 1); equals 4 delta + 1 - 1/delta at a = 2 delta - 1."""
    a = float(2 * delta - 1) if a is None else float(a)
    if a <= delta - 1:
        raise ValidationError(f"near-flat bound needs a > delta-1={delta - 1}, got a={a}")
    return (a * a + 2 * a + delta) / (a - delta + 1)


def constant_kappa_bound(d: int, delta: int) -> float:
    """delta d^2 / 8, valid for d > 4 strictly delta-rough."""
    if d <= 4 or not is_strictly_rough(d, delta):
        raise ValidationError(f"constant-mask bound needs d > 4 strictly {delta}-rough, got d={d}")
    return delta * d * d / 8


def dense_singular_values(family: MaskFamily, s: int = 1, limit: int | None = None) -> np.ndarray:
    """Singular values of the dense operator restricted to Col(N), descending. Oracle use only."""
    A = assemble_dense_A(family, s, limit)
    basis = build_ptycho_basis(stride_spec(family, s))
    return scipy.linalg.svdvals(A[:, basis.active_indices])
