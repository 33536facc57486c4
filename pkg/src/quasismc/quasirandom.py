"""Random and quasi-random jitter-factor generation.

Builds the J x K matrices of trajectory-length jitter factors used by the
jittered-HMC proposals.  Thirteen schemes are supported, ranging from plain
pseudo-random uniforms to low-discrepancy Halton / Sobol sequences, plus the
underlying primitives (radical inverse, Sobol points, prime lookup).

All factors lie in (0, 1]: sequence indices start at 1 so no generator ever
emits an exact zero, which would collapse a trajectory to zero length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import numpy as np

__all__ = [
    "JitterScheme",
    "JitterMatrix",
    "radical_inverse",
    "sobol_point",
    "nth_prime",
    "generate_jitter",
]

_GOLDEN_FRAC = (math.sqrt(5.0) - 1.0) / 2.0

_SOBOL_BITS = 32
_SOBOL_SCALE = float(1 << _SOBOL_BITS)


class JitterScheme(Enum):
    """The thirteen jitter-factor generation schemes.

    Values double as the CLI names.  ``*_ND`` schemes index the sequence
    dimension by SMC iteration k and the point by particle j; ``*_1D``
    schemes consume a single stream of length J*K laid out particle-major
    (entry (j, k) takes stream index (j-1)*K + k).
    """

    NO_JITTER = "no-jitter"
    UNIFORM_1D = "1d-uniform"
    HALTON_ND = "nd-halton"
    INVERSE_HALTON_ND = "nd-inverse-halton"
    HALTON_1D = "1d-halton"
    PRIMES_ND = "nd-primes"
    INVERSE_PRIMES_ND = "nd-inverse-primes"
    GOLDEN_RATIO_1D = "1d-golden-ratio"
    EQUIDISTANT_ND = "nd-equidistant"
    OFFSET_EQUIDISTANT_ND = "nd-offset-equidistant"
    SOBOL_ND = "nd-sobol"
    INVERSE_SOBOL_ND = "nd-inverse-sobol"
    SOBOL_1D = "1d-sobol"

    @classmethod
    def from_name(cls, name: str) -> "JitterScheme":
        for scheme in cls:
            if scheme.value == name:
                return scheme
        known = ", ".join(s.value for s in cls)
        raise ValueError(f"unknown jitter scheme {name!r}; expected one of: {known}")


@dataclass(frozen=True)
class JitterMatrix:
    """J x K matrix of jitter factors h_jk in (0, 1]."""

    values: np.ndarray
    scheme: JitterScheme
    seed: int

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def column(self, k: int) -> np.ndarray:
        """Jitter factors for all particles at iteration k (0-based)."""
        return self.values[:, k]


def radical_inverse(index: int, base: int) -> float:
    """Reverse the base-b digits of ``index`` about the radix point.

    Computed exactly as a ratio of integers (reversed-digit numerator over
    base**ndigits) so the result is the correctly rounded float.

    Parameters
    ----------
    index : int
        Sequence index, >= 1.
    base : int
        Digit base, >= 2.
    """
    if base < 2:
        raise ValueError(f"radical inverse base must be >= 2, got {base}")
    if index < 1:
        raise ValueError("radical inverse index must be >= 1 (index 0 maps to 0, "
                         "an illegal jitter factor)")
    numerator = 0
    denominator = 1
    i = index
    while i > 0:
        i, digit = divmod(i, base)
        numerator = numerator * base + digit
        denominator *= base
    return numerator / denominator


def _radical_inverse_array(indices: np.ndarray, base: int) -> np.ndarray:
    """Vectorized radical inverse; bit-identical to the scalar version."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and idx.min() < 1:
        raise ValueError("radical inverse indices must be >= 1")
    # Pad all indices to the digit count of the largest one: leading zeros
    # become trailing zeros after reversal and do not change the value.
    ndigits = 1
    top = int(idx.max(initial=1))
    while base ** ndigits <= top:
        ndigits += 1
    numerator = np.zeros(idx.shape, dtype=np.int64)
    rem = idx.copy()
    for _ in range(ndigits):
        rem, digit = np.divmod(rem, base)
        numerator = numerator * base + digit
    return numerator / float(base ** ndigits)


class _SobolTable:
    """Direction numbers from the bundled Joe-Kuo (2008) d6 table.

    The file carries one line per dimension d >= 2: ``d s a m_1..m_s`` with
    s the primitive-polynomial degree, a its interior coefficient bits and
    m_i the initial direction integers.  Dimension 1 is the van der Corput
    base-2 sequence (all m_i = 1) and is synthesized.
    """

    def __init__(self):
        self._raw: dict[int, tuple[int, int, list[int]]] = {}
        self._directions: dict[int, np.ndarray] = {}
        text = (resources.files("quasismc") / "data" / "joe_kuo_d6.txt").read_text()
        for line in text.splitlines()[1:]:
            parts = line.split()
            if not parts:
                continue
            d, s, a = int(parts[0]), int(parts[1]), int(parts[2])
            m = [int(x) for x in parts[3 : 3 + s]]
            self._raw[d] = (s, a, m)
        self.max_dimension = max(self._raw)

    def directions(self, dimension: int) -> np.ndarray:
        """32-bit direction integers V_1..V_32 for one dimension (1-based)."""
        if dimension < 1:
            raise ValueError("Sobol dimension index must be >= 1")
        cached = self._directions.get(dimension)
        if cached is not None:
            return cached
        v = np.zeros(_SOBOL_BITS, dtype=np.uint64)
        if dimension == 1:
            for i in range(_SOBOL_BITS):
                v[i] = np.uint64(1) << np.uint64(_SOBOL_BITS - 1 - i)
        else:
            if dimension not in self._raw:
                raise ValueError(
                    f"Sobol dimension {dimension} exceeds the bundled "
                    f"direction-number table (max {self.max_dimension})")
            s, a, m = self._raw[dimension]
            for i in range(min(s, _SOBOL_BITS)):
                v[i] = np.uint64(m[i]) << np.uint64(_SOBOL_BITS - 1 - i)
            for i in range(s, _SOBOL_BITS):
                prev = v[i - s]
                acc = prev ^ (prev >> np.uint64(s))
                for k in range(1, s):
                    if (a >> (s - 1 - k)) & 1:
                        acc ^= v[i - k]
                v[i] = acc
        self._directions[dimension] = v
        return v


_sobol_table: _SobolTable | None = None


def _get_sobol_table() -> _SobolTable:
    global _sobol_table
    if _sobol_table is None:
        _sobol_table = _SobolTable()
    return _sobol_table


def sobol_point(index: int, dimension_index: int) -> float:
    """One coordinate of the Sobol sequence.

    XOR-combines the direction numbers selected by the Gray code of
    ``index``; point 1 of every dimension is the leading direction number.

    Parameters
    ----------
    index : int
        Sequence index, >= 1 (index 0 would yield 0).
    dimension_index : int
        Sobol dimension, 1-based.
    """
    if index < 1:
        raise ValueError("Sobol index must be >= 1 (index 0 maps to 0, "
                         "an illegal jitter factor)")
    v = _get_sobol_table().directions(dimension_index)
    gray = index ^ (index >> 1)
    acc = np.uint64(0)
    bit = 0
    while gray:
        if gray & 1:
            acc ^= v[bit]
        gray >>= 1
        bit += 1
    return float(acc) / _SOBOL_SCALE


def _sobol_array(indices: np.ndarray, dimension_index: int) -> np.ndarray:
    """Vectorized Sobol points for one dimension."""
    idx = np.asarray(indices, dtype=np.uint64)
    if idx.size and int(idx.min()) < 1:
        raise ValueError("Sobol indices must be >= 1")
    v = _get_sobol_table().directions(dimension_index)
    gray = idx ^ (idx >> np.uint64(1))
    acc = np.zeros(idx.shape, dtype=np.uint64)
    nbits = int(idx.max(initial=1)).bit_length()
    for bit in range(nbits):
        mask = (gray >> np.uint64(bit)) & np.uint64(1)
        acc ^= mask * v[bit]
    return acc / _SOBOL_SCALE


_prime_cache: list[int] = []


def nth_prime(k: int) -> int:
    """The k-th prime (1 -> 2, 2 -> 3, ...), via a cached sieve."""
    if k < 1:
        raise ValueError("prime index must be >= 1")
    global _prime_cache
    # p_k < k(ln k + ln ln k) for k >= 6; pad generously for small k.
    bound = 20 if k < 6 else int(k * (math.log(k) + math.log(math.log(k)))) + 10
    while k > len(_prime_cache):
        sieve = np.ones(bound + 1, dtype=bool)
        sieve[:2] = False
        for p in range(2, int(bound ** 0.5) + 1):
            if sieve[p]:
                sieve[p * p :: p] = False
        _prime_cache = [int(p) for p in np.flatnonzero(sieve)]
        bound *= 2
    return _prime_cache[k - 1]


def _linear_indices(J: int, K: int) -> np.ndarray:
    """Stream indices 1..J*K laid out particle-major: entry (j,k) = (j-1)*K + k."""
    return np.arange(1, J * K + 1, dtype=np.int64)


def _fix_zeros_with_sequence(values: np.ndarray, next_value) -> np.ndarray:
    """Replace exact zeros with values drawn from subsequent sequence indices."""
    zeros = np.flatnonzero(values == 0.0)
    for n, flat in enumerate(zeros, start=1):
        values.flat[flat] = next_value(n)
    return values


def generate_jitter(scheme: JitterScheme, J: int, K: int, seed: int) -> JitterMatrix:
    """Build the J x K jitter-factor matrix for one scheme.

    Deterministic in (scheme, J, K, seed); every entry lies in (0, 1].
    Inverse variants reverse the iteration (column) order of the forward
    scheme so that lower-discrepancy dimensions land late in the run.
    """
    if J < 1 or K < 1:
        raise ValueError("jitter matrix dimensions must be >= 1")

    if scheme is JitterScheme.NO_JITTER:
        values = np.ones((J, K))

    elif scheme is JitterScheme.UNIFORM_1D:
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
        values = rng.random(J * K)
        while np.any(values == 0.0):  # next draw substitutes for an exact 0
            idx = values == 0.0
            values[idx] = rng.random(int(idx.sum()))
        values = values.reshape(J, K)

    elif scheme in (JitterScheme.HALTON_ND, JitterScheme.INVERSE_HALTON_ND):
        j_idx = np.arange(1, J + 1, dtype=np.int64)
        values = np.column_stack(
            [_radical_inverse_array(j_idx, nth_prime(k)) for k in range(1, K + 1)])
        if scheme is JitterScheme.INVERSE_HALTON_ND:
            values = values[:, ::-1]

    elif scheme is JitterScheme.HALTON_1D:
        values = _radical_inverse_array(_linear_indices(J, K), 2).reshape(J, K)

    elif scheme in (JitterScheme.PRIMES_ND, JitterScheme.INVERSE_PRIMES_ND):
        j_idx = np.arange(1, J + 1, dtype=np.float64)
        cols = []
        for k in range(1, K + 1):
            root = math.sqrt(nth_prime(k))
            col = np.mod(j_idx * root, 1.0)
            _fix_zeros_with_sequence(col, lambda n, r=root: math.fmod((J + n) * r, 1.0))
            cols.append(col)
        values = np.column_stack(cols)
        if scheme is JitterScheme.INVERSE_PRIMES_ND:
            values = values[:, ::-1]

    elif scheme is JitterScheme.GOLDEN_RATIO_1D:
        stream = np.mod(_linear_indices(J, K) * _GOLDEN_FRAC, 1.0)
        _fix_zeros_with_sequence(
            stream, lambda n: math.fmod((J * K + n) * _GOLDEN_FRAC, 1.0))
        values = stream.reshape(J, K)

    elif scheme in (JitterScheme.EQUIDISTANT_ND, JitterScheme.OFFSET_EQUIDISTANT_ND):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 2)))
        base = np.arange(1, J + 1, dtype=np.float64) / J
        values = np.column_stack([rng.permutation(base) for _ in range(K)])
        if scheme is JitterScheme.OFFSET_EQUIDISTANT_ND:
            values = np.mod(values + rng.uniform(0.0, 0.1, size=(J, K)), 1.0)
            if np.any(values == 0.0):
                smallest = values[values > 0.0].min() if np.any(values > 0.0) else 1.0
                values[values == 0.0] = smallest

    elif scheme in (JitterScheme.SOBOL_ND, JitterScheme.INVERSE_SOBOL_ND):
        j_idx = np.arange(1, J + 1, dtype=np.int64)
        values = np.column_stack([_sobol_array(j_idx, k) for k in range(1, K + 1)])
        if scheme is JitterScheme.INVERSE_SOBOL_ND:
            values = values[:, ::-1]

    elif scheme is JitterScheme.SOBOL_1D:
        values = _sobol_array(_linear_indices(J, K), 1).reshape(J, K)

    else:  # pragma: no cover
        raise ValueError(f"unhandled scheme {scheme}")

    values = np.ascontiguousarray(values, dtype=np.float64)
    return JitterMatrix(values=values, scheme=scheme, seed=seed)
