import numpy as np
import pytest

from macflow import matcore


def random_orthogonal(n, rng, det=+1):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if matcore.det_sign(q) != det:
        q[:, 0] = -q[:, 0]
    return q


def unit_vector(n, rng):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
