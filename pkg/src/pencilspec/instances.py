"""Seeded instance generators with known ground truth.

Three families:

* ``decomposable`` - a Haar-conjugated direct sum of k identical random
  Hermitian tuples.  Every spectral condition must pass and the splitting
  construction must recover a tuple unitarily equivalent to the seed.
* ``conjugate_negative`` - a fixed 6x6 pair (D + D, B + conj(B)) whose full
  characteristic polynomial is a perfect square for free (a real-coefficient
  polynomial times its conjugate-coefficient twin), yet whose off-diagonal
  block phases multiply to -i around the (1,2,3) cycle; no splitting into
  two identical copies exists and the cycle word must fail its power test.
* ``commuting`` - simultaneously diagonalizable generators with every joint
  eigenvalue repeated exactly k times; the zero-off-diagonal branch of the
  construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import HermitianTuple, direct_sum_k_copies

__all__ = [
    "InstanceDescriptor",
    "haar_unitary",
    "gen_decomposable",
    "gen_conjugate_negative",
    "gen_commuting",
]

SPECTRAL_GAP_FLOOR = 0.1  # keeps every tolerance ladder comfortably valid


@dataclass(frozen=True)
class InstanceDescriptor:
    family: str
    n: int
    k: int
    m: int
    seed: int
    expected_pass: bool
    seed_tuple: tuple = None          # positives: the n x n tuple that was copied
    failing_word: dict = None         # negatives: letters/projections of a word that must fail

    def as_dict(self):
        d = {
            "family": self.family,
            "n": self.n,
            "k": self.k,
            "m": self.m,
            "seed": self.seed,
            "expected_pass": self.expected_pass,
        }
        if self.failing_word is not None:
            d["failing_word"] = self.failing_word
        return d


def haar_unitary(n: int, seed) -> np.ndarray:
    """Haar-distributed n x n unitary: QR of a complex Ginibre matrix with
    the R-diagonal phases normalized away."""
    if n < 1:
        raise ValueError("dimension must be positive")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def _random_hermitian(n, rng):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (g + g.conj().T) / 2.0


def _random_hermitian_gapped(n, rng, gap):
    while True:
        a = _random_hermitian(n, rng)
        if n == 1 or float(np.min(np.diff(np.linalg.eigvalsh(a)))) >= gap:
            return a


def _conjugated_copies(seed_mats, k, u):
    big = direct_sum_k_copies(HermitianTuple(tuple(seed_mats)), k)
    out = []
    for a in big.matrices:
        b = u @ a @ u.conj().T
        out.append((b + b.conj().T) / 2.0)
    return HermitianTuple(tuple(out))


def gen_decomposable(n: int, k: int, m: int, seed) -> tuple:
    """Haar-conjugated direct sum of k copies of a random Hermitian m-tuple.

    The first seed generator is resampled until its spectrum is simple with
    minimum gap 0.1, which is what the splitting hypothesis needs.
    """
    if n < 1 or k < 1 or m < 1 or n * k > 16:
        raise ValueError("need n, k, m >= 1 and nk <= 16")
    rng = np.random.default_rng(seed)
    t1 = _random_hermitian_gapped(n, rng, SPECTRAL_GAP_FLOOR)
    seed_mats = [t1] + [_random_hermitian(n, rng) for _ in range(m - 1)]
    u = haar_unitary(n * k, rng)
    tup = _conjugated_copies(seed_mats, k, u)
    desc = InstanceDescriptor(
        family="decomposable",
        n=n,
        k=k,
        m=m,
        seed=seed if isinstance(seed, int) else -1,
        expected_pass=True,
        seed_tuple=tuple(seed_mats),
    )
    return tup, desc


def gen_conjugate_negative(seed) -> tuple:
    """The 6x6 obstruction pair, Haar-rotated by the seed.

    D = diag(1,2,3); B has unit entries except B[0,2] = i and zero diagonal.
    The pair (D + D, B + conj(B)) and the conjugated pair returned here
    share every spectral invariant: det(x1 A1 + x2 A2 - I) is exactly the
    square of a degree-3 polynomial (the two diagonal blocks carry the same
    real-coefficient polynomial), but the block phase product around the
    cycle of clusters 1 -> 2 -> 3 -> 1 is -i on one copy and +i on the
    other, so no unitary can merge the copies.  The word
    A2 P2 A2 P3 A2 is guaranteed to fail the square test.
    """
    d = np.diag([1.0, 2.0, 3.0]).astype(np.complex128)
    b = np.array(
        [[0.0, 1.0, 1.0j], [1.0, 0.0, 1.0], [-1.0j, 1.0, 0.0]], dtype=np.complex128
    )
    z = np.zeros((3, 3), dtype=np.complex128)
    a1 = np.block([[d, z], [z, d]])
    a2 = np.block([[b, z], [z, b.conj()]])
    u = haar_unitary(6, seed)
    tup = _conjugated_copies([a1, a2], 1, u)
    desc = InstanceDescriptor(
        family="conjugate_negative",
        n=3,
        k=2,
        m=2,
        seed=seed if isinstance(seed, int) else -1,
        expected_pass=False,
        failing_word={"letters": (2, 2, 2), "projections": (2, 3)},
    )
    return tup, desc


def gen_commuting(n: int, k: int, m: int, seed) -> tuple:
    """Commuting tuple: all generators diagonal in one Haar-random basis,
    each joint eigenvalue vector repeated exactly k times, coordinates
    separated by the gap floor so every generator has n clean clusters."""
    if n < 1 or k < 1 or m < 1 or n * k > 16:
        raise ValueError("need n, k, m >= 1 and nk <= 16")
    rng = np.random.default_rng(seed)
    joint = np.empty((n, m))
    for l in range(m):
        while True:
            vals = np.sort(rng.uniform(-2.0, 2.0, size=n))
            if n == 1 or float(np.min(np.diff(vals))) >= SPECTRAL_GAP_FLOOR:
                break
        joint[:, l] = rng.permutation(vals)
    seed_mats = [np.diag(joint[:, l]).astype(np.complex128) for l in range(m)]
    u = haar_unitary(n * k, rng)
    tup = _conjugated_copies(seed_mats, k, u)
    desc = InstanceDescriptor(
        family="commuting",
        n=n,
        k=k,
        m=m,
        seed=seed if isinstance(seed, int) else -1,
        expected_pass=True,
        seed_tuple=tuple(seed_mats),
    )
    return tup, desc
