import itertools
import math
from collections import Counter

import numpy as np
import pytest

from ssga_lab.core.bitstring import BitVector, mutate, onemax, sample_flip_count, uniform_crossover
from ssga_lab.core.custom_types import ExplicitFlipDistribution, StandardBitMutation


@pytest.fixture
def rng():
    """Fixed-seed generator"""
    return np.random.default_rng(12345)


def test_from_string_and_str():
    """Test parsing and printing agree"""
    x = BitVector.from_string("0110")
    assert str(x) == "0110"
    assert len(x) == 4
    assert x.count_ones() == 2


def test_from_string_rejects_other_characters():
    """Test invalid characters are rejected"""
    with pytest.raises(ValueError, match="may only contain 0 and 1"):
        BitVector.from_string("01a0")


def test_bits_are_read_only():
    """Test the underlying array cannot be modified"""
    x = BitVector.ones(3)
    with pytest.raises(ValueError):
        x.bits[0] = False


def test_equality_hash_and_order():
    """Test value semantics"""
    a = BitVector.from_string("0011")
    b = BitVector.from_string("0011")
    c = BitVector.from_string("1000")
    assert a == b and hash(a) == hash(b)
    assert a != c
    assert min([c, a]) == a
    assert len({a, b, c}) == 2


def test_onemax_against_target():
    """Test OneMax counts matching positions"""
    z = BitVector.from_string("1010")
    assert onemax(BitVector.from_string("1010"), z) == 4
    assert onemax(BitVector.from_string("0101"), z) == 0
    assert onemax(BitVector.from_string("1111"), z) == 2


def test_onemax_length_mismatch():
    """Test OneMax refuses strings of different lengths"""
    with pytest.raises(ValueError, match="lengths differ"):
        onemax(BitVector.ones(3), BitVector.ones(4))


def test_complement_and_hamming_distance():
    """Test complement flips every bit"""
    x = BitVector.from_string("10010")
    assert str(x.complement()) == "01101"
    assert x.hamming_distance(x.complement()) == 5
    assert x.hamming_distance(x) == 0


def test_uniform_crossover_keeps_common_bits(rng):
    """Test crossover never changes positions where the parents agree"""
    x = BitVector.from_string("1100110011")
    y = BitVector.from_string("1010101010")
    agree = x.bits == y.bits
    for _ in range(50):
        child = uniform_crossover(x, y, rng)
        assert np.array_equal(child.bits[agree], x.bits[agree])


def test_uniform_crossover_of_identical_parents(rng):
    """Test crossover of a genotype with itself is a copy"""
    x = BitVector.random(64, rng)
    assert uniform_crossover(x, x, rng) == x


def test_explicit_mutation_flips_exact_count(rng):
    """Test an operator that always flips two bits"""
    spec = ExplicitFlipDistribution(probabilities=[0.0, 0.0, 1.0])
    x = BitVector.zeros(20)
    for _ in range(20):
        assert x.hamming_distance(mutate(x, spec, rng)) == 2


def test_mutation_without_flips_returns_parent(rng):
    """Test p0 = 1 produces clones"""
    spec = ExplicitFlipDistribution(probabilities=[1.0])
    x = BitVector.from_string("0101")
    assert mutate(x, spec, rng) is x


def test_explicit_mutation_longer_than_string(rng):
    """Test K > n is rejected"""
    spec = ExplicitFlipDistribution(probabilities=[0.5, 0.0, 0.0, 0.5])
    with pytest.raises(ValueError, match="cannot flip up to 3 bits"):
        sample_flip_count(spec, 2, rng)


def test_explicit_distribution_must_sum_to_one():
    """Test validation of flip distributions"""
    with pytest.raises(ValueError, match="must sum to 1"):
        ExplicitFlipDistribution(probabilities=[0.5, 0.4])


def test_standard_bit_mutation_flip_probabilities():
    """Test exact binomial flip probabilities"""
    p0, p1, p2 = StandardBitMutation(c=1.0).flip_probabilities(100)
    assert p0 == pytest.approx(0.99 ** 100)
    assert p1 == pytest.approx(100 * 0.01 * 0.99 ** 99)
    assert p2 == pytest.approx(4950 * 0.01 ** 2 * 0.99 ** 98)


def test_standard_bit_mutation_rate_bound():
    """Test c/n above 1 is rejected"""
    with pytest.raises(ValueError, match="at most 1"):
        StandardBitMutation(c=3.0).rate(2)


def test_standard_bit_mutation_mean_flips(rng):
    """Test the flip count has mean c"""
    spec = StandardBitMutation(c=2.0)
    counts = [sample_flip_count(spec, 200, rng) for _ in range(20000)]
    assert np.mean(counts) == pytest.approx(2.0, abs=0.06)


def test_storage_is_packed():
    """Test genotypes are held eight bits to a byte"""
    for n in (1, 8, 9, 100):
        x = BitVector.ones(n)
        assert len(x.key()) == math.ceil(n / 8)
        assert x.count_ones() == n
        assert x.complement() == BitVector.zeros(n)
    assert BitVector.from_string("101").key() == bytes([0b10100000])


def _within_four_sigma(count, trials, p):
    return abs(count - trials * p) <= 4 * math.sqrt(trials * p * (1 - p))


def test_uniform_crossover_outcome_frequencies(rng):
    """Test 00 x 11 yields each of the four children with probability 1/4"""
    x, y = BitVector.from_string("00"), BitVector.from_string("11")
    trials = 20000
    counts = Counter(str(uniform_crossover(x, y, rng)) for _ in range(trials))
    assert set(counts) == {"00", "01", "10", "11"}
    assert all(_within_four_sigma(count, trials, 0.25) for count in counts.values())


def test_single_flip_position_is_uniform(rng):
    """Test an operator that always flips one bit picks each position with probability 1/n"""
    spec = ExplicitFlipDistribution(probabilities=[0.0, 1.0])
    x = BitVector.zeros(4)
    trials = 20000
    counts = Counter(str(mutate(x, spec, rng)) for _ in range(trials))
    assert set(counts) == {"1000", "0100", "0010", "0001"}
    assert all(_within_four_sigma(count, trials, 0.25) for count in counts.values())


def test_standard_bit_mutation_clone_probability(rng):
    """Test c=1, n=100 leaves the parent unchanged with probability (1 - 1/n)^n, close to 1/e"""
    spec = StandardBitMutation(c=1.0)
    x = BitVector.random(100, rng)
    trials = 20000
    clones = sum(mutate(x, spec, rng) == x for _ in range(trials))
    assert _within_four_sigma(clones, trials, 0.99 ** 100)
    assert clones / trials == pytest.approx(math.exp(-1), abs=0.02)


def test_mutation_is_unbiased(rng):
    """Test flip masks depend only on their size, for every parent of length 3"""
    probabilities = [0.1, 0.3, 0.4, 0.2]
    spec = ExplicitFlipDistribution(probabilities=probabilities)
    trials = 8000
    for parent in itertools.product("01", repeat=3):
        x = BitVector.from_string("".join(parent))
        masks = Counter(
            tuple(np.flatnonzero(x.bits != mutate(x, spec, rng).bits)) for _ in range(trials)
        )
        for k in range(4):
            p = probabilities[k] / math.comb(3, k)
            for mask in itertools.combinations(range(3), k):
                assert _within_four_sigma(masks[mask], trials, p)


def test_onemax_of_complement():
    """Test a string and its complement together match the target n times"""
    rng = np.random.default_rng(5)
    for n in (1, 7, 64):
        z = BitVector.random(n, rng)
        x = BitVector.random(n, rng)
        assert onemax(x, z) + onemax(x.complement(), z) == n
        assert onemax(x, z) == onemax(x.complement(), z.complement())
