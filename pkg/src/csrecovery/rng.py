"""Deterministic, platform-stable random streams.

A stream is identified by ``(base_seed, stream_id)``.  Both are folded into a
single 64-bit seed with the SplitMix64 finalizer::

    splitmix64(z):
        z = (z + 0x9E3779B97F4A7C15) mod 2**64
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
        return z ^ (z >> 31)

    mix_seed(a, b, ...):
        h = 0
        for part in (a, b, ...):
            h = splitmix64(h ^ (part mod 2**64))
        return h

The mixed seed drives numpy's PCG64 bit generator, whose ``random()`` output
is identical on every platform.  Gaussian variates are produced from those
uniforms with the Box-Muller transform (not numpy's ziggurat).
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL_1 = 0xBF58476D1CE4E5B9
MIX_MUL_2 = 0x94D049BB133111EB


def splitmix64(z):
    z = (z + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * MIX_MUL_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MUL_2) & MASK64
    return z ^ (z >> 31)


def mix_seed(*parts):
    """Fold any number of integers into one 64-bit seed."""
    h = 0
    for part in parts:
        h = splitmix64(h ^ (int(part) & MASK64))
    return h


class RngStream:
    """Single-owner random stream keyed by ``(base_seed, stream_id)``.

    Do not share one instance between threads or processes; allocate a
    distinct ``stream_id`` instead.
    """

    def __init__(self, base_seed, stream_id=0):
        self.base_seed = int(base_seed) & MASK64
        self.stream_id = int(stream_id) & MASK64
        self.seed = mix_seed(self.base_seed, self.stream_id)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self):
        return f"RngStream(base_seed={self.base_seed}, stream_id={self.stream_id})"

    def uniform(self, size=None):
        """Uniform draws in [0, 1)."""
        return self._gen.random(size)

    def gaussian(self, size=None):
        """Standard normal draws via Box-Muller."""
        if size is None:
            u1, u2 = self._gen.random(2)
            return float(np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2))
        count = int(np.prod(size))
        half = (count + 1) // 2
        u = self._gen.random((2, half))
        radius = np.sqrt(-2.0 * np.log1p(-u[0]))
        angle = 2.0 * np.pi * u[1]
        z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
        return z[:count].reshape(size)

    def permutation_prefix(self, n, k):
        """First ``k`` entries of a uniform random permutation of ``range(n)``.

        Partial Fisher-Yates driven by this stream's uniforms, so the draw is
        independent of numpy's integer sampling internals.
        """
        if not 0 <= k <= n:
            raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
        pool = np.arange(n)
        u = self.uniform(k)
        for i in range(k):
            j = i + min(int(u[i] * (n - i)), n - i - 1)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k].copy()


def gaussian_sample(rng):
    return rng.gaussian()


def uniform_sample(rng):
    return float(rng.uniform())
