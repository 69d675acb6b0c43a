import numpy as np


def mix_seed(seed, *keys):
    """Derive a child 64-bit seed from ``seed`` and integer ``keys``.

    Uses SeedSequence hashing, so ``mix_seed(s, 0)`` and ``mix_seed(s, 1)``
    give statistically independent streams.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def rng_for(seed, *keys):
    return np.random.default_rng(mix_seed(seed, *keys))
