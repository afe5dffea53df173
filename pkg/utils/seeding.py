"""从单一 --seed 派生各环节的子种子

split / bootstrap / init / permutation 各占一个 SeedSequence spawn key，
互不相关且完全可复现。
"""
import numpy as np

SEED_STREAMS = {
    "split": 1,
    "bootstrap": 2,
    "init": 3,
    "permutation": 4,
}


def derive_seed(master_seed: int, stream: str, *extra: int) -> int:
    if stream not in SEED_STREAMS:
        raise ValueError(f"未知的种子流: {stream}")
    key = (SEED_STREAMS[stream],) + tuple(int(e) for e in extra)
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=key)
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
