"""Counter-addressable pseudo-random source built on the splitmix64 finalizer.

Every value is a pure function of ``(seed, domain, counter)``, so any range of
the stream can be produced independently of the rest.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

CHIP_DOMAIN = 0x434849505F444F4D
LDPC_DOMAIN = 0x4C4450435F444F4D

# Counter regions for consumers that share a seed with the chip stream; the
# spreading chips of any feasible embedding stay far below all of them.
PAYLOAD_BASE = 1 << 59
PRUNE_BASE = 1 << 60
NOISE_BASE = 1 << 61
HOST_BASE = 1 << 62

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def finalize(z: int) -> int:
    z &= MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK64
    z ^= z >> 31
    return z


def _finalize_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def word(seed: int, domain: int, i: int) -> int:
    """Return the 64-bit word at counter ``i``."""
    base = finalize((seed ^ domain) & MASK64)
    return finalize((base + (i + 1) * GOLDEN) & MASK64)


def words(seed: int, domain: int, start: int, count: int) -> np.ndarray:
    """Vectorised :func:`word` over counters ``start .. start+count-1``."""
    base = np.uint64(finalize((seed ^ domain) & MASK64))
    ctr = np.arange(count, dtype=np.uint64) + np.uint64(start + 1)
    with np.errstate(over="ignore"):
        return _finalize_array(base + ctr * np.uint64(GOLDEN))


@dataclass(frozen=True)
class ChipStream:
    seed: int
    domain: int = CHIP_DOMAIN

    def __post_init__(self):
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def chip(self, i: int) -> int:
        w = word(self.seed, self.domain, i // 64)
        return 1 if (w >> (i % 64)) & 1 else -1

    def chips(self, start: int, count: int) -> np.ndarray:
        """Chips ``start .. start+count-1`` as an int8 array of +/-1."""
        if count <= 0:
            return np.empty(0, dtype=np.int8)
        first = start // 64
        last = (start + count - 1) // 64
        w = words(self.seed, self.domain, first, last - first + 1)
        bits = np.unpackbits(w.astype("<u8").view(np.uint8), bitorder="little")
        off = start - first * 64
        bits = bits[off : off + count].astype(np.int8)
        return 2 * bits - 1

    def words(self, start: int, count: int) -> np.ndarray:
        return words(self.seed, self.domain, start, count)

    def permutation(self, counter_base: int, n: int) -> np.ndarray:
        return permutation(self, counter_base, n)

    def uniform(self, start: int, count: int) -> np.ndarray:
        """Doubles in (0, 1] from the top 53 bits of each word."""
        w = self.words(start, count)
        return ((w >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53

    def normal(self, start: int, count: int) -> np.ndarray:
        """Box-Muller standard normals; pair ``p`` uses words ``start+2p`` and ``start+2p+1``."""
        pairs = (count + 1) // 2
        u = self.uniform(start, 2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log(u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(theta)
        z[:, 1] = r * np.sin(theta)
        return z.ravel()[:count]

    def take_bytes(self, n: int, start: int = PAYLOAD_BASE) -> bytes:
        """``n`` bytes taken little-endian from consecutive words."""
        w = self.words(start, (n + 7) // 8)
        return w.astype("<u8").tobytes()[:n]


@njit(cache=True)
def _fisher_yates(perm, draws):
    # consumes draws in order; returns how many were used, or -1 if exhausted
    used = 0
    two64_mod = np.uint64(0)
    for i in range(perm.shape[0] - 1, 0, -1):
        m = np.uint64(i + 1)
        # 2**64 mod m == (2**64 - m) mod m
        two64_mod = (np.uint64(0) - m) % m
        limit = np.uint64(0) - two64_mod  # wraps to 2**64 - (2**64 mod m)
        while True:
            if used >= draws.shape[0]:
                return -1
            w = draws[used]
            used += 1
            if two64_mod == 0 or w < limit:
                break
        j = np.int64(w % m)
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return used


def permutation(stream: ChipStream, counter_base: int, n: int) -> np.ndarray:
    """Unbiased Fisher-Yates shuffle of ``0..n-1`` driven by successive words.

    Position ``i`` (from ``n-1`` down to 1) swaps with a uniform index in
    ``[0, i]``; draws use rejection sampling so no residue is favoured.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    budget = n - 1 + 64
    while True:
        draws = stream.words(counter_base, budget)
        perm = np.arange(n, dtype=np.int64)
        if _fisher_yates(perm, draws) >= 0:
            return perm
        budget *= 2
