import numpy as np
import pytest

from hypcert.model import SystemSpec


def make_spec(lam, M=None, K=None, L=1.0, nx=101, mu=0.0):
    """Constant-coefficient spec; positive speeds must come first."""
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    M = np.zeros((n, n)) if M is None else np.asarray(M, dtype=float)
    K = np.zeros((n, n)) if K is None else np.asarray(K, dtype=float)
    return SystemSpec(n=n, m_pos=int(np.sum(lam > 0)), L=L, nx=nx,
                      lam=np.repeat(lam[:, None], nx, axis=1),
                      source=np.repeat(M[:, :, None], nx, axis=2), K=K, mu=mu)


def bump(x, a, b):
    s = (x - a) / (b - a)
    return np.where((s > 0) & (s < 1), np.sin(np.pi * np.clip(s, 0, 1)) ** 4, 0.0)


@pytest.fixture
def spec_factory():
    return make_spec
