"""Small utilities shared by the test modules."""
import numpy as np


def take(samples, n, seed=0):
    """A sorted random subset of ``n`` samples."""
    rng = np.random.default_rng(seed)
    return samples.subset(np.sort(rng.choice(len(samples), min(n, len(samples)), replace=False)))


# acceptance criterion number -> its PASS/FAIL line, echoed in the session summary
ACCEPTANCE: dict[int, str] = {}
