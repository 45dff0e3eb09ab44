import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240814)


def random_hurwitz(rng, n: int, margin: float = 0.2) -> np.ndarray:
    """Random real matrix shifted left of -margin."""
    A = rng.standard_normal((n, n))
    top = float(np.max(np.linalg.eigvals(A).real))
    return A - (top + margin) * np.eye(n)


def random_system(rng, n: int, m: int = 1, p: int = 1, margin: float = 0.2):
    from modalstab import StateSpaceSystem

    A = random_hurwitz(rng, n, margin)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    return StateSpaceSystem(A, B, C)


def eig_match_distance(a, b) -> float:
    """Greedy nearest-neighbor multiset distance between two spectra.

    Sorting complex eigenvalues is unstable when real parts tie to roundoff
    (conjugate pairs swap); matching each value to its nearest partner is not.
    """
    a = list(np.asarray(a, dtype=complex).ravel())
    b = list(np.asarray(b, dtype=complex).ravel())
    assert len(a) == len(b)
    worst = 0.0
    for z in a:
        j = int(np.argmin([abs(z - w) for w in b]))
        worst = max(worst, abs(z - b.pop(j)))
    return worst
