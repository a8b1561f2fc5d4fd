"""SplitMix64 streams keyed by ``(seed, label, index)``.

Every agent draws from its own stream, so adding agents to a generated
network never perturbs the draws of existing ones.  The generator is
specified bit-for-bit below and does not depend on the platform's ``random``.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


class SplitMix64:
    def __init__(self, state: int):
        self.state = state & MASK64

    @classmethod
    def stream(cls, seed: int, label: str = "", index: int = 0) -> "SplitMix64":
        """Independent stream for one ``(label, index)`` under ``seed``."""
        s = _mix((seed & MASK64) ^ GOLDEN)
        s = _mix(s ^ _fnv1a64(label))
        s = _mix(s ^ ((index * GOLDEN) & MASK64))
        return cls(s)

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return _mix(self.state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]`` by rejection sampling (unbiased)."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        n = hi - lo + 1
        limit = ((1 << 64) // n) * n
        while True:
            x = self.next_u64()
            if x < limit:
                return lo + x % n

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randint(0, i)
            seq[i], seq[j] = seq[j], seq[i]
