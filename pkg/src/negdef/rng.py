"""SplitMix64 stream and per-step seed derivation.

The generator is the standard SplitMix64 (Steele, Lea, Flood 2014):

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

all arithmetic modulo 2**64. A named step derives its own seed as
``root ^ first 8 bytes (little endian) of sha256(step name)``, so adding a
step never changes the stream seen by another one.
"""

import hashlib

MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n):
        """Uniform integer in [0, n) by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def integers(self, lo, hi, size):
        """``size`` integers uniform in the closed range [lo, hi]."""
        return [lo + self.below(hi - lo + 1) for _ in range(size)]

    def sample_indices(self, n, k):
        """k distinct indices from range(n), sorted (partial Fisher-Yates)."""
        k = min(k, n)
        pool = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return sorted(pool[:k])


def derive_seed(root, step):
    digest = hashlib.sha256(step.encode("utf-8")).digest()
    return (int(root) ^ int.from_bytes(digest[:8], "little")) & MASK64


def stream(root, step):
    return SplitMix64(derive_seed(root, step))


def zero_sum_vector(rng, size, lo=-9, hi=9):
    """Integer vector with entries in [lo, hi]; the last entry absorbs the sum."""
    c = rng.integers(lo, hi, size)
    if size:
        c[-1] -= sum(c)
    return c
