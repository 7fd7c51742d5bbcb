"""
Banded Hermitian subspaces T_delta and T_{delta,s}.

Conventions (0-based): diag(X, m)_i = X[i, (i + m) mod d]. A pair (i, i + m)
lies in the index set J_{delta,s} iff some window [s*l, s*l + delta) contains
both ends, which depends on m and on i mod s only.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from src.exceptions import DimensionError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BandSpec:
    """Ambient dimension d, band half-width delta and shift stride s (s=1 gives T_delta)."""

    d: int
    delta: int
    s: int = 1

    def __post_init__(self):
        if self.d < 1 or self.delta < 1 or self.s < 1:
            raise ValidationError(f"d, delta and s must be positive, got {self}")
        if self.s > self.delta:
            raise ValidationError(f"stride s={self.s} exceeds band width delta={self.delta}")
        if self.d % self.s:
            raise DimensionError(f"stride s={self.s} does not divide d={self.d}")
        if 2 * self.delta - 1 > self.d:
            raise ValidationError(f"band 2*delta-1={2 * self.delta - 1} does not fit in d={self.d}")

    @property
    def d_bar(self) -> int:
        return self.d // self.s

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(1 - self.delta, self.delta)

    def active_residues(self, m: int) -> np.ndarray:
        """Residues r in [0, s) such that diag(X, m) is free at every i = r mod s."""
        lo, hi = max(0, -m), min(self.delta, self.delta - m)
        return np.unique(np.arange(lo, hi) % self.s)

    def diagonal_mask(self, m: int) -> np.ndarray:
        """Boolean d-vector: positions of diag(X, m) inside J_{delta,s}."""
        if abs(m) >= self.delta:
            return np.zeros(self.d, dtype=bool)
        return np.isin(np.arange(self.d) % self.s, self.active_residues(m))

    def offset_of(self, i: np.ndarray, k: np.ndarray) -> np.ndarray:
        """Signed offset of (i, k) mapped into (-d/2, d/2]."""
        o = (np.asarray(k) - np.asarray(i)) % self.d
        return np.where(o > self.d // 2, o - self.d, o)

    def contains(self, i: np.ndarray, k: np.ndarray) -> np.ndarray:
        i, k = np.broadcast_arrays(np.asarray(i), np.asarray(k))
        m = self.offset_of(i, k)
        inside = np.abs(m) < self.delta
        out = np.zeros(i.shape, dtype=bool)
        for off in np.unique(m[inside]):
            sel = m == off
            out[sel] = np.isin(i[sel] % self.s, self.active_residues(int(off)))
        return out

    def pattern(self) -> np.ndarray:
        """Dense boolean d x d pattern of J_{delta,s}."""
        rows, cols = np.indices((self.d, self.d))
        return self.contains(rows, cols)

    def degree(self) -> np.ndarray:
        """Per-row count of the band pattern, the row's own diagonal entry included."""
        return np.sum([self.diagonal_mask(int(m)) for m in self.offsets], axis=0)

    def dimension(self) -> int:
        return int(sum(self.diagonal_mask(int(m)).sum() for m in self.offsets))

    def to_dict(self) -> Dict[str, int]:
        return {'d': self.d, 'delta': self.delta, 's': self.s}


@dataclass(frozen=True, eq=False)
class BandedHermitian:
    """
    Hermitian d x d matrix in T_{delta,s}, stored by its nonnegative diagonals.

    ``diagonals[m]`` is diag(X, m) for m = 0..delta-1; negative offsets are
    materialized by conjugate symmetry.
    """

    spec: BandSpec
    diagonals: np.ndarray = field(repr=False)

    def __post_init__(self):
        diagonals = np.array(self.diagonals, dtype=complex)
        if diagonals.shape != (self.spec.delta, self.spec.d):
            raise DimensionError(f"expected diagonals of shape {(self.spec.delta, self.spec.d)}, got {diagonals.shape}")
        for m in range(self.spec.delta):
            diagonals[m, ~self.spec.diagonal_mask(m)] = 0.0
        diagonals[0] = diagonals[0].real
        diagonals.setflags(write=False)
        object.__setattr__(self, 'diagonals', diagonals)

    @classmethod
    def zeros(cls, spec: BandSpec) -> 'BandedHermitian':
        return cls(spec, np.zeros((spec.delta, spec.d), dtype=complex))

    @classmethod
    def from_rank_one(cls, x: np.ndarray, spec: BandSpec) -> 'BandedHermitian':
        """T_{delta,s}(x x^*) without forming x x^*."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (spec.d,):
            raise DimensionError(f"signal length {x.shape} does not match d={spec.d}")
        return cls(spec, np.stack([x * np.conj(np.roll(x, -m)) for m in range(spec.delta)]))

    def diagonal(self, m: int) -> np.ndarray:
        if abs(m) >= self.spec.delta:
            raise DimensionError(f"offset {m} is outside the band of width {self.spec.delta}")
        if m >= 0:
            return self.diagonals[m].copy()
        # X[i, i+m] = conj(X[i+m, i])
        return np.conj(np.roll(self.diagonals[-m], -m))

    def to_dense(self) -> np.ndarray:
        d = self.spec.d
        X = np.zeros((d, d), dtype=complex)
        rows = np.arange(d)
        for m in range(1 - self.spec.delta, self.spec.delta):
            X[rows, (rows + m) % d] = self.diagonal(m)
        return X

    def block(self, indices: Sequence[int]) -> np.ndarray:
        """The principal submatrix X[J, J]; entries outside the band read as zero."""
        idx = np.asarray(indices, dtype=int)
        rows, cols = np.meshgrid(idx, idx, indexing='ij')
        m = self.spec.offset_of(rows, cols)
        out = np.zeros(rows.shape, dtype=complex)
        inside = np.abs(m) < self.spec.delta
        for off in np.unique(m[inside]):
            sel = m == off
            out[sel] = self.diagonal(int(off))[rows[sel]]
        return out

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """X v in O(delta * d)."""
        v = np.asarray(v)
        out = self.diagonals[0] * v
        for m in range(1, self.spec.delta):
            out = out + self.diagonals[m] * np.roll(v, -m) + self.diagonal(-m) * np.roll(v, m)
        return out

    def frobenius_norm(self) -> float:
        sq = np.sum(np.abs(self.diagonals[0]) ** 2) + 2 * np.sum(np.abs(self.diagonals[1:]) ** 2)
        return float(np.sqrt(sq))

    def map_entries(self, func) -> 'BandedHermitian':
        """Apply an entrywise map that commutes with conjugation (e.g. |.|, sgn)."""
        return BandedHermitian(self.spec, func(self.diagonals))

    def __add__(self, other: 'BandedHermitian') -> 'BandedHermitian':
        _check_same_spec(self, other)
        return BandedHermitian(self.spec, self.diagonals + other.diagonals)

    def __sub__(self, other: 'BandedHermitian') -> 'BandedHermitian':
        _check_same_spec(self, other)
        return BandedHermitian(self.spec, self.diagonals - other.diagonals)

    def scaled(self, factor: float) -> 'BandedHermitian':
        return BandedHermitian(self.spec, self.diagonals * factor)

    def to_dict(self) -> Dict:
        return {
            **self.spec.to_dict(),
            'diagonals': [[[float(z.real), float(z.imag)] for z in row] for row in self.diagonals],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'BandedHermitian':
        try:
            spec = BandSpec(int(data['d']), int(data['delta']), int(data.get('s', 1)))
            raw = np.asarray(data['diagonals'], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"malformed banded matrix record: {e}") from e
        if raw.ndim != 3 or raw.shape[-1] != 2:
            raise ValidationError("diagonals must be nested [re, im] pairs")
        if not np.all(np.isfinite(raw)):
            raise ValidationError("banded matrix record contains non-finite values")
        return cls(spec, raw[..., 0] + 1j * raw[..., 1])


def _check_same_spec(X: BandedHermitian, Y: BandedHermitian) -> None:
    if X.spec != Y.spec:
        raise ValidationError(f"band specs differ: {X.spec} vs {Y.spec}")


def project_band(M: np.ndarray, spec: BandSpec, tol: float = 1e-10) -> BandedHermitian:
    """Orthogonal projection T_{delta,s} of a dense Hermitian matrix."""
    M = np.asarray(M, dtype=complex)
    if M.shape != (spec.d, spec.d):
        raise DimensionError(f"expected a {spec.d}x{spec.d} matrix, got {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    if np.max(np.abs(M - M.conj().T)) > tol * scale:
        raise ValidationError("project_band needs a Hermitian input")
    rows = np.arange(spec.d)
    return BandedHermitian(spec, np.stack([M[rows, (rows + m) % spec.d] for m in range(spec.delta)]))


def diag_vectorize(X: BandedHermitian) -> np.ndarray:
    """Concatenate diag(X, m) for m = 1-delta, ..., delta-1."""
    return np.concatenate([X.diagonal(int(m)) for m in X.spec.offsets])


def diag_devectorize(v: np.ndarray, spec: BandSpec, tol: float = 1e-10) -> BandedHermitian:
    """Inverse of diag_vectorize on Hermitian band matrices."""
    v = np.asarray(v, dtype=complex)
    if v.shape != ((2 * spec.delta - 1) * spec.d,):
        raise DimensionError(f"expected length {(2 * spec.delta - 1) * spec.d}, got {v.shape}")
    diags = v.reshape(2 * spec.delta - 1, spec.d)
    X = BandedHermitian(spec, diags[spec.delta - 1:])
    lower = np.stack([X.diagonal(-m) for m in range(1, spec.delta)]) if spec.delta > 1 else np.zeros((0, spec.d))
    given = diags[:spec.delta - 1][::-1]
    masks = np.stack([spec.diagonal_mask(-m) for m in range(1, spec.delta)]) if spec.delta > 1 else lower.astype(bool)
    if given.size and np.max(np.abs(np.where(masks, given, 0) - lower)) > tol * max(1.0, float(np.max(np.abs(v)))):
        raise ValidationError("vector is not the diagonal vectorization of a Hermitian matrix")
    return X


def band_frobenius_distance(X: BandedHermitian, Y: BandedHermitian) -> float:
    """||X - Y||_F over the whole matrix (both symmetric halves)."""
    _check_same_spec(X, Y)
    return (X - Y).frobenius_norm()


def hermitian_band_perturbation(X0: BandedHermitian, snr: float, seed: int = 0) -> BandedHermitian:
    """T_{delta,s}(N' + N'^*) with Gaussian N', scaled so ||X0||_F / ||N||_F = snr."""
    if not snr > 0:
        raise ValidationError(f"snr must be positive, got {snr}")
    spec = X0.spec
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((spec.d, spec.d)) + 1j * rng.standard_normal((spec.d, spec.d))
    rows = np.arange(spec.d)
    herm = [G[rows, (rows + m) % spec.d] + np.conj(G[(rows + m) % spec.d, rows]) for m in range(spec.delta)]
    N = BandedHermitian(spec, np.stack(herm))
    norm = N.frobenius_norm()
    if norm == 0:
        return N
    return N.scaled(X0.frobenius_norm() / (snr * norm))


@dataclass(frozen=True, eq=False)
class Covering:
    """A (T_{delta,s}, d)-covering, validated at construction."""

    spec: BandSpec
    sets: tuple
    kind: str = 'custom'

    def __post_init__(self):
        sets = tuple(np.unique(np.asarray(J, dtype=int) % self.spec.d) for J in self.sets)
        if not sets or any(J.size == 0 for J in sets):
            raise ValidationError("a covering needs at least one non-empty set")
        covered = np.zeros(self.spec.d, dtype=bool)
        for J in sets:
            rows, cols = np.meshgrid(J, J, indexing='ij')
            if not np.all(self.spec.contains(rows, cols)):
                raise ValidationError(f"set {J.tolist()} leaves the band T_{{{self.spec.delta},{self.spec.s}}}")
            covered[J] = True
        if not covered.all():
            missing = np.flatnonzero(~covered)
            raise ValidationError(f"covering misses indices {missing.tolist()}")
        object.__setattr__(self, 'sets', sets)

    @property
    def multiplicities(self) -> np.ndarray:
        mu = np.zeros(self.spec.d, dtype=int)
        for J in self.sets:
            mu[J] += 1
        return mu


def make_interval_covering(spec: BandSpec, m: int) -> Covering:
    """J_l = [m]_{1 + s(l-1)} for l in [d/s]."""
    if not 1 <= m <= spec.delta:
        raise ValidationError(f"block length m={m} must lie in [1, delta={spec.delta}]")
    sets = tuple((spec.s * l + np.arange(m)) % spec.d for l in range(spec.d_bar))
    return Covering(spec, sets, kind=f'interval:{m}')


def make_singleton_covering(spec: BandSpec) -> Covering:
    return Covering(spec, tuple(np.array([i]) for i in range(spec.d)), kind='singleton')


def make_partition_covering(spec: BandSpec, block: int | None = None) -> Covering:
    """Consecutive blocks of length s*floor((delta-1)/s) (s if that is zero); the last block may be short."""
    if block is None:
        block = spec.s * ((spec.delta - 1) // spec.s) or spec.s
    if block < 1:
        raise ValidationError(f"partition block length must be positive, got {block}")
    sets = tuple(np.arange(start, min(start + block, spec.d)) for start in range(0, spec.d, block))
    return Covering(spec, sets, kind=f'partition:{block}')


def covering_from_descriptor(spec: BandSpec, descriptor: str) -> Covering:
    """Parse 'm=<int>', 'partition' or 'singleton'."""
    descriptor = descriptor.strip().lower()
    if descriptor == 'partition':
        return make_partition_covering(spec)
    if descriptor == 'singleton':
        return make_singleton_covering(spec)
    if descriptor.startswith('m='):
        try:
            m = int(descriptor[2:])
        except ValueError as e:
            raise ValidationError(f"bad covering block length in {descriptor!r}") from e
        return make_interval_covering(spec, m)
    raise ValidationError(f"unknown covering {descriptor!r}; use m=<int>, partition or singleton")


def band_pattern_list(spec: BandSpec) -> List[tuple]:
    """1-based (row, col) pairs of J_{delta,s}, row-major."""
    rows, cols = np.nonzero(spec.pattern())
    return [(int(r) + 1, int(c) + 1) for r, c in zip(rows, cols)]
