import numpy as np
import pytest


def rand_hermitian(n, rng, gap=0.0):
    """Random Hermitian matrix, optionally resampled until the eigenvalue
    gaps clear a floor."""
    while True:
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = (g + g.conj().T) / 2.0
        if gap == 0.0 or n == 1:
            return a
        if float(np.min(np.diff(np.linalg.eigvalsh(a)))) >= gap:
            return a


def hermitian_with_spectrum(eigs, seed):
    """Hermitian matrix with prescribed spectrum in a Haar-random basis."""
    from pencilspec.instances import haar_unitary

    eigs = np.asarray(eigs, dtype=float)
    q = haar_unitary(len(eigs), seed)
    a = q @ np.diag(eigs).astype(complex) @ q.conj().T
    return (a + a.conj().T) / 2.0


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
