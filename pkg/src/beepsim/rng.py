"""Per-node random streams.

Every node owns an independent SplitMix64 stream derived from a master
seed and its (engine-private) index.  The compiled kernels implement the
same arithmetic, so a run draws identical bits on either backend.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 output finaliser (a bijection on 64-bit words)."""
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_origin(master_seed: int, node_index: int) -> int:
    """Initial SplitMix64 state of stream ``node_index`` under ``master_seed``."""
    base = mix64(master_seed & MASK64)
    return mix64((base + (node_index + 1) * GOLDEN) & MASK64)


class NodeStream:
    """A reproducible 64-bit stream owned by a single node."""

    __slots__ = ("_state", "index")

    def __init__(self, state: int, index: int = -1):
        self._state = state & MASK64
        # bookkeeping only (sequence overrides, sibling streams); programs
        # must not branch on it
        self.index = index

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN) & MASK64
        return mix64(self._state)

    def bit(self) -> bool:
        return bool(self.next_u64() >> 63)

    def bernoulli_dyadic(self, exponent: int) -> bool:
        """True with probability exactly ``2**-exponent`` (exponent >= 0).

        Consumes 64-bit words until ``exponent`` leading bits have been
        examined, stopping at the first non-zero bit.
        """
        remaining = exponent
        while remaining > 0:
            u = self.next_u64()
            take = 64 if remaining >= 64 else remaining
            if (u >> (64 - take)) != 0:
                return False
            remaining -= take
        return True

    def bernoulli_inverse(self, m: int) -> bool:
        """True with probability exactly ``1/m`` (rejection sampling)."""
        if m <= 1:
            return True
        # 2**64 mod m; words at or above the limit are redrawn
        limit = (1 << 64) - ((1 << 64) % m)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % m == 0

    def sibling(self, master_seed: int) -> "NodeStream":
        """Stream of the same node under another master seed."""
        return derive_node_stream(master_seed, self.index)


def derive_node_stream(master_seed: int, node_index: int) -> NodeStream:
    return NodeStream(stream_origin(master_seed, node_index), node_index)


def derive_seed(master_seed: int, index: int) -> int:
    """First word of stream ``index``; used for per-trial seeds."""
    return derive_node_stream(master_seed, index).next_u64()
