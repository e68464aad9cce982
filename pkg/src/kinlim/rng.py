"""Deterministic pseudo-randomness for the property suites.

The generator is xorshift64* with the multiplier 2685821657736338717.  It is
fully specified here (and in the README) so that any reimplementation can
reproduce the exact case corpus:

    state ^= state >> 12
    state ^= (state << 25) & (2^64 - 1)
    state ^= state >> 27
    output = (state * 2685821657736338717) mod 2^64
    uniform double in [0, 1) = (output >> 11) * 2^-53

Seeding: state = seed XOR 0x9E3779B97F4A7C15, replaced by
0x106689D45497FDB5 if the XOR is zero.
"""

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_MULT = np.uint64(2685821657736338717)
_SEED_MIX = 0x9E3779B97F4A7C15
_SEED_FALLBACK = 0x106689D45497FDB5


class Xorshift64Star:
    """Seeded 64-bit shift-register generator with uniform/normal helpers."""

    def __init__(self, seed):
        state = (int(seed) & 0xFFFFFFFFFFFFFFFF) ^ _SEED_MIX
        if state == 0:
            state = _SEED_FALLBACK
        self._state = np.uint64(state)

    def next_u64(self):
        x = self._state
        x ^= x >> np.uint64(12)
        x = (x ^ (x << np.uint64(25))) & _MASK
        x ^= x >> np.uint64(27)
        self._state = x
        return (x * _MULT) & _MASK

    def uniform(self, size=None, low=0.0, high=1.0):
        """Uniform doubles in [low, high); scalar when size is None."""
        n = 1 if size is None else int(np.prod(size))
        out = np.empty(n, dtype=float)
        for i in range(n):
            out[i] = float(self.next_u64() >> np.uint64(11)) * 2.0**-53
        out = low + (high - low) * out
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def integer(self, upper):
        """Uniform integer in {0, ..., upper-1}."""
        return int(self.uniform() * upper)


def gaussian_mixture(rng, points, span, n_components=None):
    """Nonnegative mixture of 1-3 isotropic Gaussian bumps on given points.

    ``points`` has shape (N,) in one dimension or (N, d); ``span`` sets the
    scale from which centers (within 0.6*span) and widths (0.1..0.5*span)
    are drawn.  Used for the seeded property-sweep corpora; the profile is
    implicitly clipped to the grid because it is only ever sampled there.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    d = pts.shape[1]
    if n_components is None:
        n_components = 1 + rng.integer(3)
    values = np.zeros(pts.shape[0])
    for _ in range(n_components):
        center = rng.uniform(size=(d,), low=-0.6 * span, high=0.6 * span)
        width = rng.uniform(low=0.1 * span, high=0.5 * span)
        weight = rng.uniform(low=0.2, high=1.0)
        r2 = np.sum((pts - center[None, :]) ** 2, axis=1)
        values += weight * np.exp(-r2 / (2.0 * width**2))
    return values


def random_profile(rng, points, cell_volume, span, mass):
    """Seeded random nonnegative profile rescaled to a prescribed mass."""
    values = gaussian_mixture(rng, points, span)
    total = float(np.sum(values) * cell_volume)
    if total <= 0.0:
        raise RuntimeError("degenerate random profile")
    return values * (mass / total)
