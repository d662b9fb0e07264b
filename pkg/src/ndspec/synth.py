"""Random outer matrix polynomials, for tests and benchmarks."""
from __future__ import annotations

import itertools

import numpy as np

from .harmonic import LaurentTable, halfplane_contains


def halfplane_box(N: int, deg: int) -> list[tuple[int, ...]]:
    """Nonzero indices of H_N with every |k_i| <= deg."""
    rng = range(-deg, deg + 1)
    return [k for k in itertools.product(rng, repeat=N) if any(k) and halfplane_contains(k)]


def random_outer(rng: np.random.Generator, N: int, d: int, deg: int, rho: float = 0.4, density: float = 0.5):
    """Coefficients {k: d x d} of B = B0 (I + X) with X supported in H_N minus 0.

    The sum of spectral norms of the B0^{-1} B_k is exactly ``rho`` < 1, so
    I + X is invertible on the whole torus and log det B has no negative
    frequencies in the half-plane sense: B is outer. B0 is Hermitian
    positive definite, hence B is already normalized at the origin.
    """
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    B0 = G @ G.conj().T / d + np.eye(d)
    idx = [k for k in halfplane_box(N, deg) if rng.random() < density] or halfplane_box(N, deg)[:1]
    if deg == 0:
        idx = []
    X = {k: rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for k in idx}
    total = sum(np.linalg.norm(x, 2) for x in X.values())
    coeffs = {(0,) * N: B0}
    for k, x in X.items():
        coeffs[k] = B0 @ (x * (rho / total))
    return coeffs


def to_tables(coeffs: dict, N: int) -> list[list[LaurentTable]]:
    d = next(iter(coeffs.values())).shape[0]
    return [[LaurentTable(N, {k: c[i, j] for k, c in coeffs.items() if c[i, j] != 0}) for j in range(d)] for i in range(d)]


def sample(coeffs: dict, sizes) -> np.ndarray:
    """Grid values (*sizes, d, d) of a coefficient dict."""
    d = next(iter(coeffs.values())).shape[0]
    slots = np.zeros(tuple(sizes) + (d, d), dtype=complex)
    for k, c in coeffs.items():
        slots[tuple(ki % G for ki, G in zip(k, sizes))] += c
    return np.fft.ifftn(slots, axes=range(len(sizes))) * np.prod(sizes)
