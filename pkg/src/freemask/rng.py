"""SplitMix64 pseudo-random generator.

Every stochastic routine in the package draws from this generator so that
runs reproduce bit-exactly from a single integer seed, independent of the
numpy version. Output ``k`` (1-based) of a generator seeded with ``s`` is
``mix(s + k * GAMMA)``, which lets batches be produced without a Python loop.
"""

from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64_scalar(state: int) -> tuple[int, int]:
    """Reference single step: returns ``(new_state, output)``.

    Pure-integer implementation kept as the oracle for the vectorized path.
    """
    state = (state + GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class SplitMix64:
    """Counter-style SplitMix64 stream."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("n must be non-negative")
        k = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + k * np.uint64(GAMMA)
            out = _mix(states)
        self.state = (self.state + n * GAMMA) & _MASK64
        return out

    def random(self, n: int) -> np.ndarray:
        """``n`` doubles in [0, 1) built from the top 53 bits."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (2.0**-53)

    def uniform(self, low: float, high: float, n: int) -> np.ndarray:
        return low + (high - low) * self.random(n)

    def integers(self, high: int, n: int) -> np.ndarray:
        """``n`` integers in [0, high) by scaling uniforms (bias < 2**-53 * high)."""
        if high < 1:
            raise ValueError("high must be >= 1")
        return np.minimum((self.random(n) * high).astype(np.int64), high - 1)

    def normal(self, n: int) -> np.ndarray:
        """Standard normals via Box-Muller; consumes 2 * ceil(n / 2) draws."""
        m = (n + 1) // 2
        u = self.random(2 * m)
        u1 = 1.0 - u[:m]  # (0, 1], keeps log finite
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u[m:]
        return np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]

    def permutation(self, n: int) -> np.ndarray:
        # Sorting by random keys; ties are impossible in practice for 53-bit keys.
        return np.argsort(self.random(n), kind="stable")

    def spawn(self) -> "SplitMix64":
        """Independent child stream seeded from this stream's next output."""
        return SplitMix64(int(self.next_u64(1)[0]))
