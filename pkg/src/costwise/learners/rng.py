"""splitmix64: tiny, portable, seedable integer RNG."""

from __future__ import annotations

_MASK = 0xFFFFFFFFFFFFFFFF


def splitmix64(state: int) -> tuple[int, int]:
    """One step: returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state, out = splitmix64(self.state)
        return out

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) (multiply-shift; bias negligible for small n)."""
        return (self.next_u64() * n) >> 64

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n) via a partial Fisher-Yates shuffle, sorted."""
        perm = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            perm[i], perm[j] = perm[j], perm[i]
        return sorted(perm[:k])


def derive_seed(seed: int, *salt: int) -> int:
    """Independent stream seed for ``seed`` and an ordered tuple of integer salts."""
    _, state = splitmix64(seed & _MASK)
    for s in salt:
        state, out = splitmix64(state ^ (s & _MASK))
        state = out
    return state
