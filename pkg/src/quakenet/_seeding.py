"""Stage-labelled seed derivation so one top-level seed drives a whole run."""
import zlib

import numpy as np


def derive_seed(seed, label):
    """Return a 32-bit integer seed derived from ``seed`` and a stage ``label``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(label.encode("utf-8"))])
    return int(ss.generate_state(1)[0])


def rng_for(seed, label):
    return np.random.default_rng(derive_seed(seed, label))
