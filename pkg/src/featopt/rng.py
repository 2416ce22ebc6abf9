"""Deterministic random numbers for every stochastic stage of the pipeline.

The generator is SplitMix64 (Steele, Lea & Vigna's splittable generator) in
its counter form: output k is ``mix64(seed + (k+1)*GOLDEN)``, so a stream is
a pure function of (seed, counter) and can be evaluated out of order or in
bulk with numpy uint64 arithmetic. Child streams are derived with
:func:`hash64`, which folds arbitrary string/int tokens into a fresh 64-bit
seed. Thread count and scheduling therefore never influence any draw.

Derivation scheme (fixed; any reimplementation must match):
  - ints are encoded as 8 little-endian bytes, strings as UTF-8;
  - each token's bytes are consumed in 8-byte little-endian chunks
    (zero-padded), each chunk xor-folded and passed through mix64;
  - after each token the running hash is mixed with the token length.
"""

from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_SEED0 = 0xA0761D6478BD642F


def mix64(z: int) -> int:
    """SplitMix64 finalizer (Stafford variant 13)."""
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def _encode(part) -> bytes:
    if isinstance(part, (int, np.integer)):
        return int(part & MASK).to_bytes(8, "little")
    if isinstance(part, str):
        return part.encode("utf-8")
    if isinstance(part, bytes):
        return part
    raise TypeError(f"hash64 token must be int/str/bytes, got {type(part).__name__}")


def hash64(*parts) -> int:
    """Fold tokens into a 64-bit child seed. Order-sensitive, collision-mixed."""
    h = _SEED0
    for part in parts:
        data = _encode(part)
        for off in range(0, len(data), 8):
            chunk = data[off:off + 8]
            h = mix64(h ^ int.from_bytes(chunk.ljust(8, b"\0"), "little"))
        h = mix64((h + GOLDEN * len(data)) & MASK)
    return h


# vectorized mix64 on uint64 arrays; numpy unsigned arithmetic wraps mod 2^64
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Counter-based SplitMix64 stream with numpy bulk draws.

    All draws advance a single integer counter, so the stream consumed by a
    mix of scalar and bulk calls is identical to the all-scalar sequence.
    """

    def __init__(self, seed: int):
        self._seed = int(seed) & MASK
        self._i = 0

    @property
    def seed(self) -> int:
        return self._seed

    def spawn(self, *tokens) -> "Rng":
        """Independent child stream; never touches this stream's counter."""
        return Rng(hash64(self._seed, *tokens))

    def next_u64(self) -> int:
        self._i += 1
        return mix64((self._seed + self._i * GOLDEN) & MASK)

    def u64s(self, n: int) -> np.ndarray:
        ks = np.arange(self._i + 1, self._i + n + 1, dtype=np.uint64)
        self._i += n
        return _mix64_vec(np.uint64(self._seed) + ks * np.uint64(GOLDEN))

    def uniform(self) -> float:
        # 53-bit mantissa in [0, 1)
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniforms(self, n: int) -> np.ndarray:
        return (self.u64s(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def randint(self, n: int) -> int:
        """Uniform int in [0, n)."""
        return int(self.uniform() * n)

    def randints(self, count: int, n: int) -> np.ndarray:
        return np.minimum((self.uniforms(count) * n).astype(np.int64), n - 1)

    def normals(self, n: int) -> np.ndarray:
        """Box-Muller pairs; consumes 2*ceil(n/2) draws."""
        m = (n + 1) // 2
        u1 = (self.u64s(m) >> np.uint64(11)).astype(np.float64)
        u1 = (u1 + 1.0) * 2.0 ** -53  # (0, 1]: keeps log finite
        u2 = self.uniforms(m)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:n]

    def shuffle(self, arr: np.ndarray) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(arr) - 1, 0, -1):
            j = self.randint(i + 1)
            arr[i], arr[j] = arr[j], arr[i]

    def permutation(self, n: int) -> np.ndarray:
        out = np.arange(n)
        self.shuffle(out)
        return out

    def choice_indices(self, n_from: int, k: int) -> np.ndarray:
        """k distinct indices out of [0, n_from), partial Fisher-Yates."""
        pool = np.arange(n_from)
        for i in range(k):
            j = i + self.randint(n_from - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
