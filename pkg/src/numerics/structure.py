"""
Index-level building blocks: circular shifts, interleaving permutations,
circulant and block-circulant constructors, the unitary DFT, Kronecker and
blockwise-transpose utilities.

Arrays are 0-based. With 0-based indices the interleave P^(d,N) maps
w[i*N + j] = v[j*d + i], and the reversal R maps w[i] = v[-i mod d].
Operators act along axis 0, so they apply to vectors and to the rows of
matrices alike.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import scipy.fft
import scipy.linalg

from config import Config
from src.exceptions import DimensionError, SizeGuardError


def shift(v: np.ndarray, k: int = 1) -> np.ndarray:
    """Circular down-shift S^k along axis 0: (S v)_i = v_{i-1}."""
    return np.roll(np.asarray(v), k, axis=0)


def _guard(what: str, size: int, limit: int | None) -> None:
    limit = Config.DENSE_SIZE_LIMIT if limit is None else limit
    if size > limit:
        raise SizeGuardError(what, size, limit)


@dataclass(frozen=True)
class InterleavePerm:
    """The interleaving permutation P^(d,N) on vectors of length d*N."""

    d: int
    N: int

    def __post_init__(self):
        if self.d < 1 or self.N < 1:
            raise DimensionError(f"interleave sizes must be positive, got d={self.d}, N={self.N}")

    @property
    def size(self) -> int:
        return self.d * self.N

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[0] != self.size:
            raise DimensionError(f"interleave P^({self.d},{self.N}) needs length {self.size}, got {v.shape[0]}")
        tail = v.shape[1:]
        return v.reshape((self.N, self.d) + tail).swapaxes(0, 1).reshape((self.size,) + tail)

    def inverse(self) -> 'InterleavePerm':
        return InterleavePerm(self.N, self.d)

    def indices(self) -> np.ndarray:
        """Source index for every output position."""
        return self.apply(np.arange(self.size))

    def matrix(self) -> np.ndarray:
        return np.eye(self.size)[self.indices()]


def apply_interleave(p: InterleavePerm, v: np.ndarray) -> np.ndarray:
    return p.apply(v)


@dataclass(frozen=True)
class CircBlockSpec:
    """Shape bookkeeping for circ^N(V) with V of size (blockCount*N) x columnsPerBlock."""

    block_rows: int
    columns_per_block: int
    block_count: int

    @classmethod
    def for_matrix(cls, V: np.ndarray, N: int) -> 'CircBlockSpec':
        V = np.asarray(V)
        if V.ndim == 1:
            V = V[:, None]
        if N < 1 or V.shape[0] % N:
            raise DimensionError(f"row count {V.shape[0]} is not divisible by the block stride {N}")
        return cls(N, V.shape[1], V.shape[0] // N)

    @property
    def shape(self) -> tuple[int, int]:
        return self.block_count * self.block_rows, self.block_count * self.columns_per_block


@dataclass(frozen=True)
class DftPlan:
    """
    Unitary DFT of length d.

    ``forward`` applies F_d, whose columns are f_j with (f_j)_k = w^{jk}/sqrt(d),
    w = exp(2*pi*i/d). ``adjoint`` applies F_d^*. scipy.fft handles every length,
    prime lengths included.
    """

    d: int
    direction: str = 'forward'
    normalization: str = 'ortho'

    def __post_init__(self):
        if self.direction not in ('forward', 'adjoint'):
            raise ValueError(f"unknown DFT direction {self.direction!r}")

    def apply(self, v: np.ndarray, axis: int = 0) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[axis] != self.d:
            raise DimensionError(f"DFT of length {self.d} applied to axis of length {v.shape[axis]}")
        if self.direction == 'forward':
            return scipy.fft.ifft(v, axis=axis, norm=self.normalization)
        return scipy.fft.fft(v, axis=axis, norm=self.normalization)

    def adjoint(self) -> 'DftPlan':
        return DftPlan(self.d, 'adjoint' if self.direction == 'forward' else 'forward', self.normalization)


def dft_matrix(d: int) -> np.ndarray:
    """Dense unitary F_d (columns f_1..f_d)."""
    return np.conj(scipy.linalg.dft(d, scale='sqrtn'))


def circ(v: np.ndarray, limit: int | None = None) -> np.ndarray:
    """Circulant matrix whose k-th column is S^k v."""
    v = np.asarray(v)
    _guard('circ', v.shape[0], limit)
    return scipy.linalg.circulant(v)


def circ_block(V: np.ndarray, N: int, limit: int | None = None) -> np.ndarray:
    """Block circulant circ^N(V): block column k is S^{kN} V."""
    V = np.asarray(V)
    if V.ndim == 1:
        V = V[:, None]
    spec = CircBlockSpec.for_matrix(V, N)
    _guard('circ_block', max(spec.shape), limit)
    return np.hstack([np.roll(V, k * N, axis=0) for k in range(spec.block_count)])


def circ_block_factors(V: np.ndarray, N: int) -> np.ndarray:
    """
    The blocks M_1..M_l of circ^N(V) = (F_l (x) I_N) diag(M_j) (F_l (x) I_m)^*,
    M_j = sqrt(l) (f_j^l (x) I_N)^* V. Returned stacked, shape (l, N, m).
    """
    V = np.asarray(V)
    if V.ndim == 1:
        V = V[:, None]
    spec = CircBlockSpec.for_matrix(V, N)
    return scipy.fft.fft(V.reshape(spec.block_count, N, spec.columns_per_block), axis=0)


def block_transpose(V: np.ndarray, N: int) -> np.ndarray:
    """Stack the conjugate transposes of the consecutive N-row blocks of V."""
    V = np.asarray(V)
    if V.ndim == 1:
        V = V[:, None]
    spec = CircBlockSpec.for_matrix(V, N)
    blocks = V.reshape(spec.block_count, N, spec.columns_per_block)
    return np.conj(blocks.transpose(0, 2, 1)).reshape(spec.block_count * spec.columns_per_block, N)


def reversal(v: np.ndarray) -> np.ndarray:
    """R: w_i = v_{-i mod d} (1-based: x_{2-i})."""
    return np.roll(np.asarray(v)[::-1], 1, axis=0)


def block_reversal(V: np.ndarray, block: int) -> np.ndarray:
    """(R_l (x) I_block) applied along axis 0."""
    V = np.asarray(V)
    if V.shape[0] % block:
        raise DimensionError(f"length {V.shape[0]} is not divisible by block size {block}")
    count = V.shape[0] // block
    blocks = V.reshape((count, block) + V.shape[1:])
    return reversal(blocks).reshape(V.shape)


def _check_perm(perm: np.ndarray, n: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=int)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise DimensionError(f"{perm.tolist()} is not a permutation of {n} blocks")
    return perm


def block_perm(perm: Sequence[int], sizes: Sequence[int], v: np.ndarray) -> np.ndarray:
    """Blockwise permutation: output block i is input block perm[i]."""
    sizes = np.asarray(sizes, dtype=int)
    perm = _check_perm(np.asarray(perm), len(sizes))
    v = np.asarray(v)
    if v.shape[0] != sizes.sum():
        raise DimensionError(f"block sizes sum to {sizes.sum()} but the vector has length {v.shape[0]}")
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return np.concatenate([v[starts[p]:starts[p] + sizes[p]] for p in perm], axis=0)


def block_perm_matrix(perm: Sequence[int], sizes: Sequence[int]) -> np.ndarray:
    total = int(np.sum(sizes))
    return block_perm(perm, sizes, np.eye(total))


def block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    return scipy.linalg.block_diag(*blocks)


def kron_vec(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
    """vec(A B C) with column-major vec, equal to (C^T (x) A) vec(B)."""
    A, B, C = (np.atleast_2d(np.asarray(M)) for M in (A, B, C))
    if A.shape[1] != B.shape[0] or B.shape[1] != C.shape[0]:
        raise DimensionError(f"cannot multiply shapes {A.shape}, {B.shape}, {C.shape}")
    return (A @ B @ C).ravel(order='F')


def vec(B: np.ndarray) -> np.ndarray:
    return np.asarray(B).ravel(order='F')


def diag_kron_perms(row_sizes: Sequence[int], col_sizes: Sequence[int], k: int) -> List[np.ndarray]:
    """
    Block permutations P_1, P_2 with diag(I_k (x) V_j) = P_1 (I_k (x) diag(V_j)) P_2^*,
    for blocks V_j of size row_sizes[j] x col_sizes[j].
    """
    n = len(row_sizes)
    perm = InterleavePerm(n, k).indices()
    p1 = block_perm_matrix(perm, np.tile(row_sizes, k))
    p2 = block_perm_matrix(perm, np.tile(col_sizes, k))
    return [p1, p2]
