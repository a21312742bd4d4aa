import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weaksim.core import (
    BitString,
    Estimate,
    PreconditionError,
    RandomStream,
    RangeViolation,
    blocked_sums,
    check_range,
    complex_samples,
    estimate_mean,
    parity,
    qubit_mask,
    required_samples,
)


def test_sample_count_worked_example():
    # 16 ln(200) / 0.01 = 8477.3, rounded up
    assert required_samples(0.1, 0.01, 2.0) == 8478


def test_sample_count_default_budget():
    assert required_samples(0.05, 1e-3) == 12162
    assert required_samples(0.05, 1e-3) == math.ceil(4 * math.log(2000) / 0.05**2)


def test_complex_budget_splits_both_parts():
    assert complex_samples(0.05, 1e-3) == required_samples(0.05 / math.sqrt(2), 5e-4)


@given(st.floats(0.01, 0.5), st.floats(1e-6, 0.5), st.floats(0.0, 8.0))
def test_sample_count_is_monotone(eps, delta, m):
    k = required_samples(eps, delta, m)
    assert required_samples(eps / 2, delta, m) >= k
    assert required_samples(eps, delta / 2, m) >= k
    assert required_samples(eps, delta, m + 1) >= k
    # the Hoeffding tail at K samples is within delta
    mm = max(m, 1.0)
    assert 2 * math.exp(-k * eps**2 / (4 * mm * mm)) <= delta * (1 + 1e-12)


@pytest.mark.parametrize("eps,delta", [(0, 0.1), (-1, 0.1), (0.1, 0), (0.1, 1), (0.1, 1.5)])
def test_sample_count_rejects_bad_budgets(eps, delta):
    with pytest.raises(PreconditionError):
        required_samples(eps, delta)


def test_bitstring_round_trip():
    b = BitString.from_str("10110")
    assert b.value == 0b10110
    assert b.bits() == (1, 0, 1, 1, 0)
    assert b.bit(0) == 1 and b.bit(1) == 0
    assert BitString.from_bits(b.bits()) == b


def test_qubit_mask_uses_most_significant_first():
    assert qubit_mask([0], 4) == 0b1000
    assert qubit_mask([1, 3], 4) == 0b0101


def test_parity_vectorised():
    xs = np.arange(16)
    assert np.array_equal(parity(xs), np.array([bin(x).count("1") % 2 for x in xs]))


def test_random_stream_children_are_reproducible_and_distinct():
    s = RandomStream(5)
    a = s.child(1).generator().random(4)
    assert np.array_equal(a, RandomStream(5).child(1).generator().random(4))
    assert not np.array_equal(a, s.child(2).generator().random(4))
    assert not np.array_equal(a, RandomStream(5, 1).child(1).generator().random(4))


@pytest.mark.parametrize("workers", [2, 3, 8])
def test_blocked_sums_ignore_worker_count(workers):
    def sampler(rng, k):
        return rng.random(k)

    s = RandomStream(3)
    one = blocked_sums(sampler, lambda x: x, 50_000, s, workers=1, block_size=997)
    many = blocked_sums(sampler, lambda x: x, 50_000, s, workers=workers, block_size=997)
    assert one == many


def test_estimate_mean_known_value():
    est = estimate_mean(lambda rng, k: rng.random(k), lambda x: 2 * x - 1, 0.02, 1e-3, 1.0, 1, real=True)
    assert abs(est.value) <= 0.02
    assert est.samples_used == required_samples(0.02, 1e-3)


def test_range_violation_aborts():
    with pytest.raises(RangeViolation):
        estimate_mean(lambda rng, k: rng.random(k), lambda x: 3 * x, 0.1, 0.1, 1.0, 0)
    check_range(np.array([1.0, -1.0]), 1.0)


def test_estimate_validates_fields():
    with pytest.raises(ValueError):
        Estimate(0.0, 0.0, 0.1, 1)
    e = Estimate(0.3 + 0.05j, 0.1, 0.01, 10)
    assert e.within(0.35) and not e.within(0.5)
    assert e.real == pytest.approx(0.3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4))
def test_estimate_mean_reproducible(seed, workers):
    def sampler(rng, k):
        return rng.integers(0, 2, size=k)

    a = estimate_mean(sampler, lambda x: 1 - 2.0 * x, 0.2, 0.1, 1.0, seed)
    b = estimate_mean(sampler, lambda x: 1 - 2.0 * x, 0.2, 0.1, 1.0, seed, workers=workers)
    assert a.value == b.value
