import numpy as np
import pytest

from topoflock.grid import Grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def grid1():
    return Grid(1, 64)


@pytest.fixture
def grid2():
    return Grid(2, 16)


def random_trig(grid, rng, kmax, components=1):
    """Real trig polynomial with modes |k_j| <= kmax, returned with its mode list."""
    terms = []
    vals = np.zeros((components,) + grid.shape)
    ks = range(-kmax, kmax + 1)
    for c in range(components):
        for k in (np.array(p) for p in np.ndindex(*(len(ks),) * grid.dim)):
            kv = k - kmax
            if not kv.any():
                continue
            a, b = rng.normal(size=2)
            phase = sum(kv[i] * grid.coords[i] for i in range(grid.dim))
            vals[c] += a * np.cos(phase) + b * np.sin(phase)
            terms.append((c, kv, a, b))
    return vals, terms
