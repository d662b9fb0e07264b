"""Shared fixtures: random outer factors and the two-variable worked example."""
import numpy as np

from ndspec.harmonic import MatrixFunction, ctranspose, halfplane_contains, torus_points
from ndspec.io import example_factor
from ndspec.synth import random_outer, sample

# (N, d, grid, count) of the random BB* suite; rho = 0.2, per-axis degree 4
SUITE = [
    (1, 1, (64,), 5),
    (1, 2, (128,), 5),
    (1, 3, (256,), 5),
    (1, 4, (256,), 5),
    (2, 1, (32, 32), 5),
    (2, 2, (64, 64), 6),
    (2, 3, (128, 128), 4),
    (2, 4, (256, 128), 3),
    (3, 1, (32, 32, 32), 5),
    (3, 2, (64, 32, 32), 6),
    (3, 3, (128, 64, 64), 1),
]
SUITE_SEED = 2024
SUITE_RHO = 0.2
SUITE_DEG = 4


def spectrum_of(Bv: np.ndarray) -> MatrixFunction:
    return MatrixFunction(Bv @ ctranspose(Bv))


def suite_instances():
    """Yield (label, B samples, S) for every suite instance, deterministically."""
    rng = np.random.default_rng(SUITE_SEED)
    for N, d, sizes, count in SUITE:
        for i in range(count):
            B = random_outer(rng, N, d, SUITE_DEG, SUITE_RHO)
            Bv = sample(B, sizes)
            yield f"N{N}-d{d}-{i}", Bv, spectrum_of(Bv)


def worked_example(sizes=(32, 32)):
    """(A, S = A A^*) of the built-in two-variable example on ``sizes``."""
    A = example_factor().matrix(sizes)
    return A, A @ A.H()


def max_coefficient_error(X: MatrixFunction, Y: MatrixFunction) -> float:
    N = X.N
    diff = np.fft.fftn(np.asarray(X.values) - np.asarray(Y.values), axes=range(N)) / np.prod(X.sizes)
    return float(np.abs(diff).max())


def fejer_riesz_root(c: np.ndarray) -> np.ndarray:
    """Outer p with |p|^2 = sum_k c[k+n] t^k, by root selection.

    The roots of z^n f(z) pair up as (r, 1/conj(r)); p keeps those outside
    the closed disk, scaled so that p(0) > 0 and the mean of |p|^2 is c_0.
    """
    n = (len(c) - 1) // 2
    roots = np.roots(c[::-1])  # highest power first
    outside = roots[np.abs(roots) > 1]
    assert len(outside) == n
    p = np.poly(outside)[::-1]  # ascending coefficients of prod (z - r)
    p = p * (np.sign(p[0]).conj())
    p = p * np.sqrt(c[n].real / np.sum(np.abs(p) ** 2))
    return p


def random_positive_poly(rng, n):
    """Coefficients (ascending, -n..n) of |q|^2 with q having no zeros on T."""
    q = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
    q[0] += 2 * np.sign(q[0].real) * np.abs(q).sum()  # keep |q| away from zero on T
    c = np.convolve(q, np.conj(q[::-1]))
    return c


def samples_1d(c, G):
    n = (len(c) - 1) // 2
    t = torus_points((G,))[0]
    return sum(c[j] * t ** (j - n) for j in range(len(c)))


def ma_factor(G):
    """Outer 2 x 2 MA(1) factor with Y -> X feedback; det = 1 + 0.3 t - 0.1 t^2."""
    t = torus_points((G,))[0]
    B = np.zeros((G, 2, 2), dtype=complex)
    B[:, 0, 0] = 1 + 0.3 * t
    B[:, 0, 1] = 0.5 * t
    B[:, 1, 0] = 0.2 * t
    B[:, 1, 1] = 1
    return B


def prediction_error(S: np.ndarray, L: int, K: int, joint: bool) -> float:
    """Least-squares L-step error variance of X_n from K lags of X (or of (X, Y)).

    Normal equations with autocovariances R(k) = C_k{S}, predictors
    Z_{n-L}, ..., Z_{n-L-K+1}.
    """
    G = S.shape[0]
    R = np.fft.fft(S, axis=0) / G  # R[k % G] = C_k{S}
    ch = [0, 1] if joint else [0]
    p = len(ch)
    Rk = lambda k: R[k % G][np.ix_(ch, ch)]
    Gam = np.zeros((K * p, K * p), dtype=complex)
    c = np.zeros(K * p, dtype=complex)
    for i in range(K):
        for j in range(K):
            Gam[i * p:(i + 1) * p, j * p:(j + 1) * p] = Rk(j - i)
        c[i * p:(i + 1) * p] = R[(-L - i) % G][ch, 0]
    a = np.linalg.solve(Gam, c)
    return float((R[0][0, 0] - np.vdot(c, a)).real)


def brute_index_set(L, M, box):
    K1, K2 = box
    out = []
    for k in range(0, K1 + 1):
        for l in range(-K2, K2 + 1):
            rest = (L - k, M - l)
            if halfplane_contains((k, l)) and halfplane_contains(rest) and rest != (0, 0):
                out.append((k, l))
    return out


def fixture_2d(sizes, feedback):
    t1, t2 = torus_points(sizes)
    B = np.zeros(sizes + (2, 2), dtype=complex)
    B[..., 0, 0] = 1 + 0.5 * t1 * t2
    B[..., 0, 1] = 0.4 * t2 if feedback else 0
    B[..., 1, 0] = 0.3 * t1
    B[..., 1, 1] = 1
    return B
