"""
Bitstrings, the OneMax objective and the variation operators of the (mu+1) GA.

All stochastic operations take a ``numpy.random.Generator``; nothing here
touches global random state.

Example:
    ```python
    rng = np.random.default_rng(7)
    x = BitVector.from_string("0101")
    z = BitVector.ones(4)
    child = mutate(uniform_crossover(x, z, rng), StandardBitMutation(c=1.0), rng)
    onemax(child, z)
    ```
"""

from typing import Iterable, Union

import numpy as np

from ssga_lab.core.custom_types import (
    ExplicitFlipDistribution,
    MutationSpec,
    StandardBitMutation,
)


# 1-bit count of every byte value
_POPCOUNT = np.array([bin(value).count("1") for value in range(256)], dtype=np.int64)


def _popcount(words: np.ndarray) -> int:
    return int(_POPCOUNT[words].sum())


def _pack(bits: np.ndarray) -> np.ndarray:
    words = np.packbits(bits)
    words.setflags(write=False)
    return words


class BitVector:
    """
    Fixed-length immutable bit sequence.

    Bits are stored packed eight to a byte (``np.packbits``, first bit in the
    most significant position, zero padding at the end). The packed bytes are
    the ``key`` that hashing, equality and lexicographic ordering use; ``bits``
    unpacks on demand.

    Args:
        bits (Iterable): Anything numpy can turn into a 1-d bool array.
    """

    __slots__ = ("_words", "_n")

    def __init__(self, bits: Union[Iterable[bool], np.ndarray]):
        array = np.array(bits, dtype=bool).reshape(-1)
        self._n = array.shape[0]
        self._words = _pack(array)

    @classmethod
    def _from_words(cls, words: np.ndarray, n: int) -> "BitVector":
        x = cls.__new__(cls)
        words.setflags(write=False)
        x._words = words
        x._n = n
        return x

    @classmethod
    def from_string(cls, text: str) -> "BitVector":
        if any(ch not in "01" for ch in text):
            raise ValueError(f"bitstring may only contain 0 and 1, got {text!r}")
        return cls([ch == "1" for ch in text])

    @classmethod
    def zeros(cls, n: int) -> "BitVector":
        return cls(np.zeros(n, dtype=bool))

    @classmethod
    def ones(cls, n: int) -> "BitVector":
        return cls(np.ones(n, dtype=bool))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "BitVector":
        return cls(rng.random(n) < 0.5)

    @property
    def words(self) -> np.ndarray:
        return self._words

    @property
    def bits(self) -> np.ndarray:
        array = np.unpackbits(self._words, count=self._n).astype(bool)
        array.setflags(write=False)
        return array

    def key(self) -> bytes:
        return self._words.tobytes()

    def count_ones(self) -> int:
        return _popcount(self._words)

    def complement(self) -> "BitVector":
        return self._xor(_pack(np.ones(self._n, dtype=bool)))

    def flip(self, positions: np.ndarray) -> "BitVector":
        mask = np.zeros(self._n, dtype=bool)
        mask[positions] = True
        return self._xor(_pack(mask))

    def _xor(self, mask: np.ndarray) -> "BitVector":
        return BitVector._from_words(np.bitwise_xor(self._words, mask), self._n)

    def hamming_distance(self, other: "BitVector") -> int:
        _check_lengths(self, other)
        return _popcount(np.bitwise_xor(self._words, other._words))

    def __len__(self) -> int:
        return self._n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self._n == other._n and self.key() == other.key()

    def __hash__(self) -> int:
        return hash((self._n, self.key()))

    def __lt__(self, other: "BitVector") -> bool:
        _check_lengths(self, other)
        return self.key() < other.key()

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def __repr__(self) -> str:
        return f"BitVector('{self}')" if len(self) <= 64 else f"BitVector(n={len(self)})"


def _check_lengths(x: BitVector, y: BitVector) -> None:
    if len(x) != len(y):
        raise ValueError(f"bitstring lengths differ: {len(x)} != {len(y)}")


def onemax(x: BitVector, z: BitVector) -> int:
    """Number of positions on which x matches the target z."""
    return len(x) - x.hamming_distance(z)


def uniform_crossover(x: BitVector, y: BitVector, rng: np.random.Generator) -> BitVector:
    """Takes each bit from x or y with probability 1/2, independently per position."""
    _check_lengths(x, y)
    take_y = _pack(rng.random(len(x)) < 0.5)
    words = (x.words & ~take_y) | (y.words & take_y)
    return BitVector._from_words(words, len(x))


def sample_flip_count(spec: MutationSpec, n: int, rng: np.random.Generator) -> int:
    """Draws how many bits one application of the operator flips."""
    if isinstance(spec, StandardBitMutation):
        return int(rng.binomial(n, spec.rate(n)))
    if isinstance(spec, ExplicitFlipDistribution):
        if spec.max_flips > n:
            raise ValueError(f"cannot flip up to {spec.max_flips} bits of a length-{n} string")
        return int(rng.choice(len(spec.probabilities), p=spec.probabilities))
    raise ValueError(f"unsupported mutation spec: {spec!r}")


def mutate(x: BitVector, spec: MutationSpec, rng: np.random.Generator) -> BitVector:
    """
    Applies an unbiased mutation operator.

    The flip count k is drawn from the operator's distribution (binomial for
    standard bit mutation) and a uniformly random k-subset of positions is
    flipped. For standard bit mutation this has exactly the law of flipping
    every bit independently with probability c/n.
    """
    n = len(x)
    k = sample_flip_count(spec, n, rng)
    if k == 0:
        return x
    positions = rng.choice(n, size=k, replace=False)
    return x.flip(positions)
