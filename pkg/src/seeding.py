import zlib
import numpy as np


def stream_seed(seed: int, name: str, *indices: int) -> int:
    """Derive a deterministic 64-bit seed for the named sub-stream of a run seed"""
    key = (zlib.crc32(name.encode("utf-8")),) + tuple(int(i) for i in indices)
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def stream_rng(seed: int, name: str, *indices: int) -> np.random.Generator:
    return np.random.default_rng(stream_seed(seed, name, *indices))
