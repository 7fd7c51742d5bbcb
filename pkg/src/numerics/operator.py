"""
The ptychographic measurement operator.

y[l, j] = |<x, S^{s l} m_j>|^2 for a signal, or <S^{s l} m_j m_j^* S^{-s l}, X>
for a banded Hermitian X. Grids are stored as (d/s, D) arrays; the flat
measurement vector uses row index j*d_bar + l, i.e. column-major order.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from config import Config
from src.exceptions import DimensionError, NumericalContractError, SizeGuardError, ValidationError
from src.numerics.banded import BandedHermitian, BandSpec
from src.numerics.masks import MaskFamily

logger = logging.getLogger(__name__)

NOISE_MODELS = ('gaussian', 'adversarial')


@dataclass(frozen=True, eq=False)
class MeasurementGrid:
    """Real measurements indexed by (shift l, mask j)."""

    d_bar: int
    D: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values)
        if np.iscomplexobj(values):
            raise ValidationError("measurements must be real")
        values = values.astype(float)
        if values.shape != (self.d_bar, self.D):
            raise DimensionError(f"expected a ({self.d_bar}, {self.D}) grid, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("measurement grid contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_vector(cls, v: np.ndarray, d_bar: int, D: int) -> 'MeasurementGrid':
        v = np.asarray(v)
        if v.shape != (d_bar * D,):
            raise DimensionError(f"expected {d_bar * D} measurements, got {v.shape}")
        return cls(d_bar, D, v.reshape((d_bar, D), order='F'))

    def flatten(self) -> np.ndarray:
        """Measurement vector in j*d_bar + l order."""
        return self.values.ravel(order='F')

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def __add__(self, other: 'MeasurementGrid') -> 'MeasurementGrid':
        self._check_shape(other)
        return MeasurementGrid(self.d_bar, self.D, self.values + other.values)

    def combine(self, alpha: float, other: 'MeasurementGrid', beta: float) -> 'MeasurementGrid':
        self._check_shape(other)
        return MeasurementGrid(self.d_bar, self.D, alpha * self.values + beta * other.values)

    def _check_shape(self, other: 'MeasurementGrid') -> None:
        if (self.d_bar, self.D) != (other.d_bar, other.D):
            raise DimensionError(f"grid shapes differ: {(self.d_bar, self.D)} vs {(other.d_bar, other.D)}")

    def to_records(self) -> List[Dict[str, Any]]:
        """CSV rows ``ell,j,value``: ell is 0-based, j is 1-based, in j-major order."""
        return [
            {'ell': ell, 'j': j + 1, 'value': float(self.values[ell, j])}
            for j in range(self.D)
            for ell in range(self.d_bar)
        ]

    @classmethod
    def from_records(cls, rows: List[Dict[str, Any]]) -> 'MeasurementGrid':
        try:
            triples = [(int(r['ell']), int(r['j']), float(r['value'])) for r in rows]
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"malformed measurement row: {e}") from e
        if not triples:
            raise ValidationError("measurement file holds no rows")
        d_bar = max(t[0] for t in triples) + 1
        D = max(t[1] for t in triples)
        if min(t[0] for t in triples) < 0 or min(t[1] for t in triples) < 1:
            raise ValidationError("measurement indices must satisfy ell >= 0 and j >= 1")
        if len(triples) != d_bar * D:
            raise ValidationError(f"expected {d_bar * D} rows for a ({d_bar}, {D}) grid, got {len(triples)}")
        values = np.full((d_bar, D), np.nan)
        for ell, j, value in triples:
            values[ell, j - 1] = value
        if np.isnan(values).any():
            raise ValidationError("measurement grid has duplicate or missing (ell, j) entries")
        return cls(d_bar, D, values)

    def to_dict(self) -> Dict[str, Any]:
        return {'d_bar': self.d_bar, 'D': self.D, 'values': self.values.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MeasurementGrid':
        try:
            return cls(int(data['d_bar']), int(data['D']), np.asarray(data['values'], dtype=float))
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"malformed measurement record: {e}") from e


@dataclass(frozen=True)
class NoiseSpec:
    """Additive measurement noise with ||reference|| / ||n|| = target_snr; inf means noiseless."""

    target_snr: float = math.inf
    seed: int = 0
    model: str = 'gaussian'

    def __post_init__(self):
        if not self.target_snr > 0:
            raise ValidationError(f"target SNR must be positive, got {self.target_snr}")
        if self.model not in NOISE_MODELS:
            raise ValidationError(f"unknown noise model {self.model!r}; use one of {NOISE_MODELS}")

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.target_snr)


def mask_correlations(family: MaskFamily) -> np.ndarray:
    """
    g[j, m + delta - 1] = diag(m_j m_j^*, m) for m = 1-delta..delta-1.

    Entry i is m_j[i] * conj(m_j[i + m]), indices mod d.
    """
    values = family.values
    return np.stack(
        [values * np.conj(np.roll(values, -m, axis=-1)) for m in range(1 - family.delta, family.delta)],
        axis=1,
    )


def stride_spec(family: MaskFamily, s: int) -> BandSpec:
    if s < 1 or family.d % s:
        raise DimensionError(f"stride s={s} does not divide d={family.d}")
    return BandSpec(family.d, family.delta, s)


def _window_indices(d: int, delta: int, s: int) -> np.ndarray:
    """(d/s, delta) array of the indices covered by each shifted window."""
    return (s * np.arange(d // s)[:, None] + np.arange(delta)[None, :]) % d


def forward(family: MaskFamily, X: BandedHermitian | np.ndarray, s: int = 1) -> MeasurementGrid:
    """
    Apply the measurement operator to a signal or a banded Hermitian matrix.

    Both paths work window by window: every measurement only touches the
    delta entries of x (or the delta x delta block of X) under its window.
    """
    spec = stride_spec(family, s)
    windows = family.windows
    index = _window_indices(family.d, family.delta, s)
    if isinstance(X, BandedHermitian):
        if X.spec.d != family.d or X.spec.delta != family.delta:
            raise DimensionError(f"matrix spec {X.spec} does not match family (d={family.d}, delta={family.delta})")
        diags = np.stack([X.diagonal(int(m)) for m in X.spec.offsets])
        t = np.arange(family.delta)
        offsets = t[None, :] - t[:, None] + family.delta - 1
        # blocks[l, t, u] = X[s*l + t, s*l + u]
        blocks = diags[offsets[None, :, :], index[:, :, None]]
        raw = np.einsum('jt,ltu,ju->lj', np.conj(windows), blocks, windows)
        scale = max(1.0, float(np.max(np.abs(raw)))) if raw.size else 1.0
        if np.max(np.abs(raw.imag), initial=0.0) > 1e-10 * scale:
            raise NumericalContractError("Hilbert-Schmidt pairing left a non-negligible imaginary part")
        return MeasurementGrid(spec.d_bar, family.D, raw.real)
    x = np.asarray(X, dtype=complex)
    if x.shape != (family.d,):
        raise DimensionError(f"signal length {x.shape} does not match d={family.d}")
    inner = x[index] @ np.conj(windows).T
    return MeasurementGrid(spec.d_bar, family.D, np.abs(inner) ** 2)


def assemble_dense_A(family: MaskFamily, s: int = 1, limit: int | None = None) -> np.ndarray:
    """
    Dense matrix taking the diagonal vectorization of X to the flat measurement vector.

    Row j*d_bar + l holds conj(S^{s l} g_m^j) in column block m + delta - 1.
    Oracle use only; refused above the dense-size guard.
    """
    spec = stride_spec(family, s)
    limit = Config.DENSE_SIZE_LIMIT if limit is None else limit
    rows, cols = spec.d_bar * family.D, (2 * family.delta - 1) * family.d
    if max(rows, cols) > limit:
        raise SizeGuardError('assemble_dense_A', max(rows, cols), limit)
    g = mask_correlations(family)
    blocks = np.stack(
        [np.conj(np.roll(g, s * ell, axis=-1)).reshape(family.D, cols) for ell in range(spec.d_bar)],
        axis=1,
    )
    return blocks.reshape(rows, cols)


def _scale_to_snr(direction: np.ndarray, reference: MeasurementGrid, snr: float) -> np.ndarray:
    ref_norm = reference.norm()
    if ref_norm == 0:
        raise ValidationError("reference measurements are all zero; a finite SNR is undefined")
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise NumericalContractError("noise direction vanished")
    return direction * (ref_norm / (snr * norm))


def add_noise(y: MeasurementGrid, ns: NoiseSpec, reference: MeasurementGrid | None = None,
              direction: np.ndarray | None = None) -> MeasurementGrid:
    """
    Return y + n with ||reference|| / ||n|| = ns.target_snr exactly.

    The adversarial model needs ``direction``, a (d_bar, D) real array,
    normally from ``conditioning.adversarial_direction``.
    """
    reference = y if reference is None else reference
    y._check_shape(reference)
    if ns.noiseless:
        return y
    if ns.model == 'gaussian':
        rng = np.random.Generator(np.random.Philox(ns.seed))
        raw = rng.standard_normal(y.values.shape)
    else:
        if direction is None:
            raise ValidationError("adversarial noise needs a direction from the weakest frequency block")
        raw = np.asarray(direction, dtype=float)
        if raw.shape != y.values.shape:
            raise DimensionError(f"noise direction shape {raw.shape} does not match grid {y.values.shape}")
    noise = _scale_to_snr(raw, reference, ns.target_snr)
    logger.debug("added %s noise at SNR %.3g (||n|| = %.3g)", ns.model, ns.target_snr, np.linalg.norm(noise))
    return MeasurementGrid(y.d_bar, y.D, y.values + noise)


def realized_snr(reference: MeasurementGrid, noisy: MeasurementGrid) -> float:
    noise = np.linalg.norm(noisy.values - reference.values)
    return math.inf if noise == 0 else reference.norm() / float(noise)
