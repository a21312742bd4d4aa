"""Bit strings, random streams and the Hoeffding-budgeted sample-mean estimator.

Conventions used across the package:

* Qubit 0 is the first (leftmost, most significant) bit, so the dense index
  of a basis state equals its bit string read as a binary integer.
* Batches of basis states are ``int64`` arrays, which caps vectorised widths
  at :data:`MAX_QUBITS`.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

MAX_QUBITS = 62
BLOCK_SIZE = 8192


class WeaksimError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class SchemaError(WeaksimError, ValueError):
    """Malformed input description."""

    exit_code = 2


class OutOfClass(WeaksimError):
    """The requested computation falls outside the supported simulatable classes."""

    exit_code = 3


class BudgetExceeded(WeaksimError):
    """A sparseness, size or sample budget would be exceeded."""

    exit_code = 4


class PreconditionError(WeaksimError, ValueError):
    """An input violates a documented precondition."""

    exit_code = 4


class RangeViolation(PreconditionError):
    """A sampled function value exceeded its declared range bound."""


class VerificationFailed(WeaksimError):
    """An estimate deviated from the dense reference by more than its accuracy."""

    exit_code = 5


# --------------------------------------------------------------------------
# bit strings


@dataclass(frozen=True)
class BitString:
    """Fixed-width bit vector; bit 0 is the most significant bit of ``value``."""

    width: int
    value: int = 0

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("width must be at least 1")
        if self.value < 0 or self.value >> self.width:
            raise ValueError(f"value {self.value} does not fit in {self.width} bits")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "BitString":
        value = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError("bits must be 0 or 1")
            value = (value << 1) | int(b)
        return cls(len(bits), value)

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        return cls.from_bits([int(c) for c in text.strip()])

    def bit(self, i: int) -> int:
        if not 0 <= i < self.width:
            raise IndexError(i)
        return (self.value >> (self.width - 1 - i)) & 1

    def bits(self) -> tuple[int, ...]:
        return tuple(self.bit(i) for i in range(self.width))

    def __xor__(self, other: "BitString") -> "BitString":
        if self.width != other.width:
            raise ValueError("width mismatch")
        return BitString(self.width, self.value ^ other.value)

    def __int__(self):
        return self.value

    def __index__(self):
        return self.value

    def __str__(self):
        return format(self.value, f"0{self.width}b")


def as_index(x, n: int | None = None) -> int:
    """Integer index of a BitString, int or bit sequence."""
    if isinstance(x, BitString):
        if n is not None and x.width != n:
            raise ValueError(f"expected {n} bits, got {x.width}")
        return x.value
    if isinstance(x, str):
        return as_index(BitString.from_str(x), n)
    if isinstance(x, (list, tuple)):
        return as_index(BitString.from_bits(x), n)
    return int(x)


def check_width(n: int) -> int:
    if not 1 <= n <= MAX_QUBITS:
        raise PreconditionError(f"qubit count {n} outside [1, {MAX_QUBITS}]")
    return n


def get_bit(xs, i: int, n: int):
    """Bit i (qubit i) of each entry of ``xs``."""
    return (xs >> (n - 1 - i)) & 1


def bit_matrix(xs, n: int) -> np.ndarray:
    """``(K, n)`` uint8 matrix of bits, column i = qubit i."""
    xs = np.asarray(xs, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((xs[..., None] >> shifts) & 1).astype(np.uint8)


def pack_bits(bits) -> np.ndarray:
    """Inverse of :func:`bit_matrix` along the last axis."""
    bits = np.asarray(bits, dtype=np.int64)
    n = bits.shape[-1]
    weights = np.int64(1) << np.arange(n - 1, -1, -1, dtype=np.int64)
    return (bits * weights).sum(axis=-1)


def qubit_mask(qubits: Sequence[int], n: int) -> int:
    m = 0
    for q in qubits:
        m |= 1 << (n - 1 - q)
    return m


def parity(xs):
    return (np.bitwise_count(np.asarray(xs, dtype=np.int64)) & 1).astype(np.int64)


# --------------------------------------------------------------------------
# random streams


@dataclass(frozen=True)
class RandomStream:
    """Deterministic random stream keyed by ``(seed, stream_index)``.

    Child streams extend the key path, so any tree of sub-computations gets
    reproducible, independent randomness without sharing generator state.
    """

    seed: int
    stream_index: int = 0
    path: tuple[int, ...] = ()

    def _entropy(self) -> list[int]:
        s = int(self.seed) & ((1 << 64) - 1)
        return [s & 0xFFFFFFFF, s >> 32, int(self.stream_index), len(self.path), *self.path]

    def generator(self) -> np.random.Generator:
        """A fresh counter-based (Philox) generator for this key."""
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(self._entropy())))

    def child(self, index: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_index, self.path + (int(index),))

    def children(self, count: int) -> list["RandomStream"]:
        return [self.child(i) for i in range(count)]


def as_stream(stream) -> RandomStream:
    if isinstance(stream, RandomStream):
        return stream
    if stream is None:
        return RandomStream(0)
    return RandomStream(int(stream))


# --------------------------------------------------------------------------
# estimates and sample budgets


@dataclass(frozen=True)
class Estimate:
    """A sample-mean estimate with its target accuracy and confidence."""

    value: complex
    epsilon: float
    delta: float
    samples_used: int
    details: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.samples_used < 1:
            raise ValueError("samples_used must be positive")

    @property
    def real(self) -> float:
        return float(np.real(self.value))

    def within(self, target, tol: float | None = None) -> bool:
        return abs(complex(self.value) - complex(target)) <= (self.epsilon if tol is None else tol)


def required_samples(epsilon: float, delta: float, range_bound: float = 1.0) -> int:
    """Samples K with 2 exp(-K eps^2 / (4 M^2)) <= delta for a real mean with |f| <= M."""
    if not epsilon > 0:
        raise PreconditionError("epsilon must be positive")
    if not 0 < delta < 1:
        raise PreconditionError("delta must lie in (0, 1)")
    if range_bound < 0:
        raise PreconditionError("range bound must be non-negative")
    m = max(float(range_bound), 1.0)
    return max(1, math.ceil(4.0 * m * m * math.log(2.0 / delta) / (epsilon * epsilon)))


def complex_samples(epsilon: float, delta: float, range_bound: float = 1.0) -> int:
    """Budget for a complex mean: real and imaginary parts each to eps/sqrt(2), delta/2."""
    return required_samples(epsilon / math.sqrt(2.0), delta / 2.0, range_bound)


def _range_tol(bound: float) -> float:
    return bound * (1 + 1e-9) + 1e-12


def check_range(values: np.ndarray, bound: float, what: str = "f") -> None:
    """Abort (never clip) when a sampled value exceeds its declared bound."""
    if values.size == 0:
        return
    worst = float(np.max(np.abs(values)))
    if not np.isfinite(worst) or worst > _range_tol(bound):
        raise RangeViolation(f"|{what}| reached {worst!r}, exceeding the declared bound {bound!r}")


def blocked_sums(
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    f: Callable[[np.ndarray], np.ndarray],
    num_samples: int,
    stream: RandomStream,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> np.ndarray:
    """Sum ``f`` over ``num_samples`` draws, split in fixed blocks.

    Block ``j`` always uses ``stream.child(j)`` and block totals are added in
    block order, so the result does not depend on ``workers``. ``f`` may
    return shape ``(k,)`` or ``(k, m)``; the sums have shape ``()`` or ``(m,)``.
    """
    nblocks = -(-num_samples // block_size)

    def run(j: int) -> np.ndarray:
        k = min(block_size, num_samples - j * block_size)
        rng = stream.child(j).generator()
        xs = sampler(rng, k)
        return np.sum(np.asarray(f(xs)), axis=0)

    if workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(nblocks)))
    else:
        parts = [run(j) for j in range(nblocks)]
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total


def estimate_mean(
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    f: Callable[[np.ndarray], np.ndarray],
    epsilon: float,
    delta: float,
    range_bound: float = 1.0,
    stream: RandomStream | int | None = None,
    *,
    real: bool = False,
    workers: int = 1,
) -> Estimate:
    """Monte-Carlo mean of ``f`` under the sampler's distribution.

    ``sampler(rng, k)`` returns ``k`` i.i.d. draws; ``f`` is vectorised. Complex
    means spend the budget of :func:`complex_samples`; ``real=True`` declares
    ``f`` real-valued and uses :func:`required_samples` directly. Any observed
    ``|f(x)| > range_bound`` raises :class:`RangeViolation`.
    """
    stream = as_stream(stream)
    if real:
        k = required_samples(epsilon, delta, range_bound)
    else:
        k = complex_samples(epsilon, delta, range_bound)

    def checked(xs):
        vals = np.asarray(f(xs))
        check_range(vals, range_bound)
        return vals.astype(np.float64 if real else np.complex128)

    total = blocked_sums(sampler, checked, k, stream, workers=workers)
    value = complex(total) / k
    return Estimate(value.real if real else value, epsilon, delta, k)
