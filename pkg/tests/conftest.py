import itertools
import math

import numpy as np
import pytest


def cayley_menger_volume(P) -> float:
    """Volume of a simplex from its pairwise distances only."""
    P = np.asarray(P, dtype=float)
    k = len(P) - 1
    if k == 0:
        return 1.0
    D2 = ((P[:, None] - P[None]) ** 2).sum(-1)
    B = np.ones((k + 2, k + 2))
    B[0, 0] = 0.0
    B[1:, 1:] = D2
    coef = (-1) ** (k + 1) / (2 ** k * math.factorial(k) ** 2)
    return math.sqrt(max(coef * np.linalg.det(B), 0.0))


def brute_fatness(P) -> float:
    """Minimum over every face of Vol / diam^dim, via Cayley-Menger."""
    P = np.asarray(P, dtype=float)
    best = math.inf
    for r in range(2, len(P) + 1):
        for f in itertools.combinations(range(len(P)), r):
            F = P[list(f)]
            diam = max(np.linalg.norm(a - b) for a, b in itertools.combinations(F, 2))
            best = min(best, cayley_menger_volume(F) / diam ** (r - 1))
    return best if math.isfinite(best) else 1.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
