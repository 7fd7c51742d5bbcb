"""
Local measurement systems: the analyzed deterministic windows, local Fourier
families built from a window, and random Gaussian families for the
ptychographic regime.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from src.exceptions import DimensionError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Mask:
    """A length-d vector supported on the first delta coordinates, with a nonzero first entry."""

    d: int
    delta: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.d,):
            raise DimensionError(f"mask needs length d={self.d}, got {values.shape}")
        if not 1 <= self.delta <= self.d:
            raise ValidationError(f"support size delta={self.delta} must lie in [1, d={self.d}]")
        if np.any(values[self.delta:] != 0):
            raise ValidationError(f"mask has entries beyond its support [1, {self.delta}]")
        if values[0] == 0:
            raise ValidationError("mask must be nonzero at index 1")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def window(self) -> np.ndarray:
        return self.values[:self.delta]

    @property
    def squared_norm(self) -> float:
        return float(np.sum(np.abs(self.window) ** 2))


def _window_mask(d: int, delta: int, window: np.ndarray) -> Mask:
    values = np.zeros(d, dtype=complex)
    values[:delta] = window
    return Mask(d, delta, values)


def default_exponential_base(delta: int) -> float:
    return max(4.0, (delta - 1) / 2)


def default_near_flat_spike(delta: int) -> float:
    return float(2 * delta - 1)


def exponential_mask(d: int, delta: int, a: float | None = None) -> Mask:
    """gamma_i = a^{i-1} on [delta]."""
    a = default_exponential_base(delta) if a is None else float(a)
    if 2 * delta - 1 > d:
        raise ValidationError(f"exponential mask needs delta <= (d+1)/2, got d={d}, delta={delta}")
    if a <= 0:
        raise ValidationError(f"exponential base must be positive, got a={a}")
    if a == 1:
        raise ValidationError("exponential base a=1 is the constant mask; use constant_mask instead")
    return _window_mask(d, delta, a ** np.arange(delta, dtype=float))


def near_flat_mask(d: int, delta: int, a: float | None = None) -> Mask:
    """gamma = a e_1 + 1_[delta]."""
    a = default_near_flat_spike(delta) if a is None else float(a)
    if a <= delta - 1:
        raise ValidationError(
            f"near-flat spike a={a} must exceed delta-1={delta - 1} for its condition bound to hold"
        )
    window = np.ones(delta)
    window[0] += a
    return _window_mask(d, delta, window)


def constant_mask(d: int, delta: int) -> Mask:
    if delta > d:
        raise ValidationError(f"constant mask needs delta <= d, got d={d}, delta={delta}")
    return _window_mask(d, delta, np.ones(delta))


@dataclass(frozen=True, eq=False)
class MaskFamily:
    """D masks sharing (d, delta); ``window`` and ``modulation`` are set for local Fourier families."""

    d: int
    delta: int
    values: np.ndarray = field(repr=False)
    kind: str = 'custom'
    params: Dict[str, Any] = field(default_factory=dict)
    window: Mask | None = None
    modulation: int | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.ndim != 2 or values.shape[1] != self.d or values.shape[0] < 1:
            raise DimensionError(f"family needs shape (D, d={self.d}), got {values.shape}")
        for j, row in enumerate(values):
            Mask(self.d, self.delta, row)
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def D(self) -> int:
        return self.values.shape[0]

    @property
    def windows(self) -> np.ndarray:
        """The (D, delta) block of mask values on the support."""
        return self.values[:, :self.delta]

    @property
    def is_fourier(self) -> bool:
        return self.window is not None and self.modulation is not None

    def masks(self) -> List[Mask]:
        return [Mask(self.d, self.delta, row) for row in self.values]

    def scaled(self, t: float) -> 'MaskFamily':
        window = None if self.window is None else _window_mask(self.d, self.delta, self.window.window * t)
        return MaskFamily(self.d, self.delta, self.values * t, self.kind, dict(self.params, scale=t), window, self.modulation)

    def to_dict(self) -> Dict[str, Any]:
        record = {
            'd': self.d,
            'delta': self.delta,
            'D': self.D,
            'kind': self.kind,
            'params': self.params,
            'masks': [[[float(z.real), float(z.imag)] for z in row] for row in self.values],
        }
        if self.is_fourier:
            record['window'] = [[float(z.real), float(z.imag)] for z in self.window.values]
            record['K'] = self.modulation
        return record

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MaskFamily':
        try:
            d, delta = int(data['d']), int(data['delta'])
            raw = np.asarray(data['masks'], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"malformed mask family record: {e}") from e
        if raw.ndim != 3 or raw.shape[-1] != 2 or not np.all(np.isfinite(raw)):
            raise ValidationError("masks must be finite nested [re, im] pairs")
        if 'D' in data and int(data['D']) != raw.shape[0]:
            raise ValidationError(f"record declares D={data['D']} but holds {raw.shape[0]} masks")
        window = modulation = None
        if 'window' in data and 'K' in data:
            w = np.asarray(data['window'], dtype=float)
            window = Mask(d, delta, w[:, 0] + 1j * w[:, 1])
            modulation = int(data['K'])
        return cls(d, delta, raw[..., 0] + 1j * raw[..., 1], str(data.get('kind', 'custom')),
                   dict(data.get('params', {})), window, modulation)

    @classmethod
    def load(cls, path: str | Path) -> 'MaskFamily':
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as e:
            raise ValidationError(f"mask file {path} does not exist") from e
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError(f"cannot read mask file {path}: {e}") from e
        return cls.from_dict(data)


def local_fourier_family(gamma: Mask, K: int | None = None, D: int | None = None, kind: str = 'fourier',
                         params: Dict[str, Any] | None = None) -> MaskFamily:
    """m_j(n) = gamma_n * w_K^{(j-1)(n-1)}, j = 1..D."""
    delta = gamma.delta
    D = 2 * delta - 1 if D is None else int(D)
    K = D if K is None else int(K)
    if gamma.window[-1] == 0:
        raise ValidationError(f"window must be supported on all of [1, {delta}], but its last entry is zero")
    if D < 1 or K < max(delta, D):
        raise ValidationError(f"modulation index K={K} must be at least max(delta={delta}, D={D})")
    j = np.arange(D)[:, None]
    n = np.arange(gamma.d)[None, :]
    phases = np.exp(2j * np.pi * j * n / K)
    values = phases * gamma.values[None, :]
    params = dict(params or {}, K=K)
    return MaskFamily(gamma.d, delta, values, kind, params, gamma, K)


def random_gaussian_family(d: int, delta: int, D: int | None = None, seed: int = 0, s: int = 1) -> MaskFamily:
    """
    D masks with i.i.d. standard complex Gaussian entries on [delta].

    Uses the counter-based Philox generator so a seed gives the same family on
    every platform. D defaults to s(2 delta - s), the per-frequency dimension
    of T_{delta,s}.
    """
    D = s * (2 * delta - s) if D is None else int(D)
    if D < 1:
        raise ValidationError(f"family size D must be positive, got {D}")
    if not 1 <= delta <= d:
        raise ValidationError(f"support size delta={delta} must lie in [1, d={d}]")
    rng = np.random.Generator(np.random.Philox(seed))
    window = (rng.standard_normal((D, delta)) + 1j * rng.standard_normal((D, delta))) / np.sqrt(2)
    values = np.zeros((D, d), dtype=complex)
    values[:, :delta] = window
    return MaskFamily(d, delta, values, 'rand', {'seed': seed, 'D': D})


def _parse_params(text: str) -> Dict[str, str]:
    params = {}
    for item in filter(None, text.split(',')):
        if '=' not in item:
            raise ValidationError(f"mask parameter {item!r} is not of the form key=value")
        key, value = item.split('=', 1)
        params[key.strip().lower()] = value.strip()
    return params


def family_from_descriptor(descriptor: str, d: int, delta: int, s: int = 1) -> MaskFamily:
    """
    Build a family from a CLI descriptor.

    exp[:a=..] | flat[:a=..] | const | rand[:seed=..,D=..] | file:path.json.
    Deterministic windows become local Fourier families with K = D = 2 delta - 1
    (``K``/``D`` may be overridden, e.g. ``flat:a=7,K=9``); const uses D = min(d, 2 delta - 1).
    """
    if not descriptor:
        raise ValidationError("empty mask descriptor")
    kind, _, rest = descriptor.partition(':')
    kind = kind.strip().lower()
    if kind == 'file':
        family = MaskFamily.load(rest)
        if (family.d, family.delta) != (d, delta):
            raise ValidationError(f"mask file is for (d={family.d}, delta={family.delta}), requested (d={d}, delta={delta})")
        return family
    params = _parse_params(rest)
    try:
        K = int(params.pop('k')) if 'k' in params else None
        D = int(params.pop('d')) if 'd' in params else None
        if kind == 'exp':
            a = float(params.pop('a')) if 'a' in params else None
            gamma = exponential_mask(d, delta, a)
            kind_params = {'a': default_exponential_base(delta) if a is None else a}
        elif kind == 'flat':
            a = float(params.pop('a')) if 'a' in params else None
            gamma = near_flat_mask(d, delta, a)
            kind_params = {'a': default_near_flat_spike(delta) if a is None else a}
        elif kind == 'const':
            gamma = constant_mask(d, delta)
            kind_params = {}
            D = min(d, 2 * delta - 1) if D is None else D
        elif kind == 'rand':
            seed = int(params.pop('seed')) if 'seed' in params else 0
            if params:
                raise ValidationError(f"unknown parameters {sorted(params)} for mask kind 'rand'")
            return random_gaussian_family(d, delta, D, seed, s)
        else:
            raise ValidationError(f"unknown mask kind {kind!r}; use exp, flat, const, rand or file")
    except ValueError as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(f"bad number in mask descriptor {descriptor!r}: {e}") from e
    if params:
        raise ValidationError(f"unknown parameters {sorted(params)} for mask kind {kind!r}")
    return local_fourier_family(gamma, K, D, kind=kind, params=kind_params)
