from hashlib import md5

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_seed(seed: int, tag: str, index: int = 0) -> int:
    """Counter-based sub-stream seed.

    The result only depends on (seed, tag, index), never on the order in
    which streams are requested.
    """
    identifier = f"{seed & SEED_MASK}:{tag}:{index}"
    digest = md5(identifier.encode(encoding="utf8")).hexdigest()
    return int(digest[:16], 16)


def make_rng(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, tag, index))
