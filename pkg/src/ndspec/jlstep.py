"""
One-variable matrix factorization S = S_{+,1} S_{+,1}^* in the leading variable.

The pipeline per outer-variable slice:

1. pointwise Cholesky S = L L^*, diagonal replaced by its first-variable
   outer version (columns rescaled so the product is unchanged);
2. strictly lower entries xi_ij truncated to first-variable degrees
   >= -(i-j) n;
3. for m = 2..d, the row matrix built from row m of the running product is
   completed by a structured unitary U_m of degree (m-1) n whose last row is
   in tilde form; the running product is multiplied by U_m on the right.

Step 3 is solved in coefficient space. For a column (v_1..v_{m-1}, v_m) with
v_i polynomials of degree <= n and v_m carrying degrees -n..0, the unitary
conditions are

    conj(zeta_i) v_m - conj(f) v_i   has no degrees 1..n,
    sum_i zeta_i v_i + f v_m          has no degrees -n..-1.

The first family is upper-triangular Toeplitz in the v_i and is eliminated,
leaving an n x (n+m) null-space problem per slice.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AliasError, NotPositiveDefinite, SliceSingular
from .harmonic import (
    GridFunction,
    MatrixFunction,
    coefficient_array,
    ctranspose,
    index_range,
    sample_array,
    truncate_array,
)
from .report import FactorizationReport
from .scalar import outer_phase

# relative size of the n-th singular value below which a slice is declared singular
SINGULAR_RCOND = 1e-13
# |f_m^{n}(0)| below this fraction of ||f_m^{n}|| is flagged in the report
F0_FLAG = 1e-12
# complex entries per work block in the Step 4 solve (about 64 MB per array)
BLOCK_BUDGET = 1 << 22


@dataclass(frozen=True)
class LowerTriangularFactor:
    M: MatrixFunction

    @property
    def d(self) -> int:
        return self.M.d

    def diagonal(self, i: int) -> GridFunction:
        return self.M.entry(i, i)

    def xi(self, i: int, j: int) -> GridFunction:
        if i <= j:
            raise ValueError("xi_ij is defined for i > j only")
        return self.M.entry(i, j)


@dataclass(frozen=True)
class RowMatrix:
    """Identity rows above a last row [zeta_1, ..., zeta_{m-1}, f]."""

    zetas: tuple
    f: GridFunction

    @property
    def m(self) -> int:
        return len(self.zetas) + 1

    def to_matrix(self) -> MatrixFunction:
        m = self.m
        vals = np.zeros(self.f.sizes + (m, m), dtype=complex)
        for i in range(m - 1):
            vals[..., i, i] = 1.0
            vals[..., m - 1, i] = self.zetas[i].samples
        vals[..., m - 1, m - 1] = self.f.samples
        return MatrixFunction(vals)


@dataclass(frozen=True)
class StructuredUnitary:
    """U_m: rows 1..m-1 polynomial of degree <= n in t_1, last row in tilde form.

    ``top`` holds the coefficients of rows 1..m-1 (shape outer + (m-1, n+1, m),
    degree along axis -2) and ``bottom`` the coefficients of the last row at
    degrees 0, -1, ..., -n (shape outer + (n+1, m)).
    """

    m: int
    n: int
    u: MatrixFunction
    top: np.ndarray
    bottom: np.ndarray
    product_leakage: float = 0.0
    unitarity_dev: float = 0.0
    det_dev: float = 0.0


# -- Cholesky with outer diagonal ------------------------------------------

def _lower_upper(values: np.ndarray) -> np.ndarray:
    """M with S = M M^*, lower triangular, diagonal outer in axis 0."""
    values = 0.5 * (values + ctranspose(values))
    try:
        L = np.linalg.cholesky(values)
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(values)[..., 0]
        raise NotPositiveDefinite(np.unravel_index(np.argmin(w), w.shape)) from None
    diag = np.real(np.einsum("...ii->...i", L))
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        bad = np.min(np.where(np.isfinite(diag), diag, -np.inf), axis=-1)
        raise NotPositiveDefinite(np.unravel_index(np.argmin(bad), bad.shape))
    phase = outer_phase(np.log(diag), axis=0)
    return L * phase[..., None, :]


def lower_upper_factor(S: MatrixFunction) -> LowerTriangularFactor:
    """Pointwise Cholesky factor whose diagonal is outer in t_1 per slice."""
    if S.N < 1:
        raise ValueError("need at least one variable")
    return LowerTriangularFactor(MatrixFunction(_lower_upper(np.asarray(S.values))))


def _check_grid(G1: int, d: int, n: int):
    if n < 1:
        raise ValueError(f"truncation order must be >= 1, got {n}")
    if d > 1 and 2 * (d - 1) * n + 2 > G1:
        raise AliasError(f"order {n} with d={d} needs G1 >= {2 * (d - 1) * n + 2}, grid has {G1}")


def _truncate_lower(M: np.ndarray, n: int) -> np.ndarray:
    """xi_ij restricted to first-variable degrees >= -(i-j) n."""
    M = np.array(M)
    d = M.shape[-1]
    hi = index_range(M.shape[0])[1]
    for i in range(1, d):
        for j in range(i):
            M[..., i, j] = truncate_array(M[..., i, j], -(i - j) * n, hi)
    return M


# -- row matrix ------------------------------------------------------------

def build_row_matrix(Q: MatrixFunction, m: int, tol: float | None = 1e-6) -> RowMatrix:
    """Row matrix whose last row is row m of the leading m x m block of Q.

    With ``tol`` set, the diagonal entry f_m is checked to have first-variable
    energy at negative degrees below ``tol`` (relative), as it must when Q is
    the running product of the algorithm.
    """
    if not 2 <= m <= Q.d:
        raise ValueError(f"m must lie in 2..{Q.d}, got {m}")
    vals = np.asarray(Q.values)
    zetas = tuple(GridFunction(vals[..., m - 1, i]) for i in range(m - 1))
    f = GridFunction(vals[..., m - 1, m - 1])
    if tol is not None:
        c = coefficient_array(f.samples, axes=(0,))
        neg = np.abs(c[index_range(f.sizes[0])[0] % f.sizes[0]:]) ** 2
        total = (np.abs(c) ** 2).sum()
        if total > 0 and neg.sum() > tol * total:
            raise ValueError(f"diagonal entry f_{m} is not analytic in t1 (negative energy {neg.sum() / total:.2e})")
    return RowMatrix(zetas, f)


def split_row_matrix(F: RowMatrix) -> tuple[RowMatrix, RowMatrix]:
    """F = F_+ F_-; F_+ carries the analytic parts of the zetas and a unit corner."""
    lo, hi = index_range(F.f.sizes[0])
    plus, minus = [], []
    for z in F.zetas:
        p = truncate_array(z.samples, 0, hi)
        plus.append(GridFunction(p))
        minus.append(GridFunction(z.samples - p))
    one = GridFunction(np.ones(F.f.sizes, dtype=complex))
    return RowMatrix(tuple(plus), one), RowMatrix(tuple(minus), F.f)


def truncate_row_matrix(Fminus: RowMatrix, n: int) -> RowMatrix:
    """zeta_- restricted to degrees [-n, -1], f to [0, n]."""
    if n < 1:
        raise ValueError(f"truncation order must be >= 1, got {n}")
    lo, hi = index_range(Fminus.f.sizes[0])
    if -n < lo or n > hi:
        raise AliasError(f"order {n} does not fit first-axis range [{lo}, {hi}]")
    zetas = tuple(GridFunction(truncate_array(z.samples, -n, -1)) for z in Fminus.zetas)
    return RowMatrix(zetas, GridFunction(truncate_array(Fminus.f.samples, 0, n)))


# -- the structured unitary --------------------------------------------------

def _take(arr: np.ndarray, idx: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """arr[..., idx] where valid, 0 elsewhere (idx broadcast over trailing dims)."""
    out = arr[..., np.clip(idx, 0, arr.shape[-1] - 1)]
    return np.where(valid, out, 0)


def _unitary_coefficients(alpha: np.ndarray, gamma: np.ndarray, n: int):
    """Coefficients of U_m for a batch of slices.

    alpha : (P, m-1, n), alpha[p, i, k-1] = C_{-k}{zeta_i}
    gamma : (P, n+1),    gamma[p, k] = C_k{f}
    Returns (top, bottom, sv_ratio, f0) with top (P, m-1, n+1, m) and
    bottom (P, n+1, m).
    """
    P, mm1, _ = alpha.shape
    m = mm1 + 1
    r = np.arange(n)[:, None]
    c = np.arange(n)[None, :]
    j = np.arange(n + 1)[None, :]

    # The eliminated family reads T a_i = Z_i b with T upper-triangular
    # Toeplitz in conj(gamma) and Z_i Hankel in conj(alpha_i), so R_i = T^{-1} Z_i
    # is Hankel too: R_i[r, j] = rho_i[r + j], rho_i = h * conj(alpha_i) correlated,
    # where h is the power-series inverse of conj(gamma).
    g = np.conj(gamma[:, :n])
    h = np.zeros_like(g)
    with np.errstate(divide="ignore", invalid="ignore"):
        h[:, 0] = 1.0 / g[:, 0]
        for k in range(1, n):
            h[:, k] = -(g[:, 1:k + 1] * h[:, k - 1::-1]).sum(axis=1) * h[:, 0]
    sc = np.conj(alpha)
    rho = np.zeros_like(sc)
    for u in range(n):
        rho[..., : n - u] += h[:, None, u:u + 1] * sc[..., u:]
    R = _take(rho, r + j, r + j <= n - 1)  # (P, m-1, n, n+1)

    # rows of K: degrees q = r - n; columns a_{i,0} then b_0..b_n
    Kc = np.swapaxes(alpha[:, :, ::-1], 1, 2)
    H = _take(alpha, n - r + c, c <= r - 1)  # (P, m-1, n, n)
    Gm = _take(gamma, r - n + j, (r - n + j >= 0) & (r - n + j <= n))
    Kb = (H @ R).sum(axis=1) + Gm
    K = np.concatenate([Kc, Kb], axis=-1)  # (P, n, n+m)

    # null space of K from a complete QR of K^*; |diag R| gauges the rank
    Qk, Rk = np.linalg.qr(ctranspose(K), mode="complete")
    dk = np.abs(np.einsum("pii->pi", Rk[:, :n, :n]))
    sv_ratio = dk.min(axis=1) / np.where(dk.max(axis=1) > 0, dk.max(axis=1), 1.0)
    sv_ratio = np.where(np.isfinite(sv_ratio), sv_ratio, 0.0)
    x = Qk[:, :, n:]  # (P, n+m, m)

    a0 = x[:, :mm1, :]
    b = x[:, mm1:, :]
    a_rest = R @ b[:, None]  # (P, m-1, n, m)
    top = np.concatenate([a0[:, :, None, :], a_rest], axis=2)

    # orthonormal coefficient basis
    B = np.concatenate([top.reshape(P, mm1 * (n + 1), m), b], axis=1)
    Qb, _ = np.linalg.qr(B)
    top = Qb[:, : mm1 * (n + 1)].reshape(P, mm1, n + 1, m)
    b = Qb[:, mm1 * (n + 1):]

    # value of F_- U at t1 = 0 made lower triangular with positive diagonal
    G0 = np.empty((P, m, m), dtype=complex)
    G0[:, :mm1] = top[:, :, 0, :]
    G0[:, mm1] = (alpha[:, :, None, :] @ top[:, :, 1:, :]).sum(axis=1)[:, 0] + (gamma[:, None, :] @ b)[:, 0]
    Qg, Rg = np.linalg.qr(ctranspose(G0))
    dg = np.einsum("pii->pi", Rg)
    ph = np.where(np.abs(dg) > 0, dg / np.where(np.abs(dg) > 0, np.abs(dg), 1), 1)
    W = Qg * ph[:, None, :]
    top = top @ W[:, None]
    b = b @ W
    # det U is a unimodular constant; rotate the last column so it equals 1
    # (absorbs the tiny phase of a grid-sampled f(0))
    U1 = np.concatenate([top.sum(axis=2), b.sum(axis=1)[:, None, :]], axis=1)
    c = np.linalg.det(U1)
    rot = np.conj(c) / np.where(np.abs(c) > 0, np.abs(c), 1.0)
    top[..., -1] *= rot[:, None, None]
    b[..., -1] *= rot[:, None]
    return top, b, sv_ratio


def _product_leakage(alpha: np.ndarray, gamma: np.ndarray, top: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Relative negative-degree energy of the last row of F_- U, per slice."""
    n = gamma.shape[-1] - 1
    q = np.arange(-n, n + 1)[:, None]
    a = np.arange(n + 1)[None, :]
    # C_{q-a}{zeta_i} for -n <= q-a <= -1
    Hf = _take(alpha, a - q - 1, (q - a >= -n) & (q - a <= -1))
    Gf = _take(gamma, q + a, (q + a >= 0) & (q + a <= n))
    prod = (Hf @ top).sum(axis=1) + Gf @ b  # (P, 2n+1, m)
    energy = np.abs(prod) ** 2
    total = energy.sum(axis=(1, 2))
    neg = energy[:, :n].sum(axis=(1, 2))
    return neg / np.where(total > 0, total, 1.0)


def _unitary_samples(top: np.ndarray, b: np.ndarray, G1: int) -> np.ndarray:
    """Grid values (G1, P, m, m) of the unitary with the given coefficients."""
    P, mm1, n1, m = top.shape
    slots = np.zeros((G1, P, m, m), dtype=complex)
    deg = np.arange(n1)
    slots[deg % G1, :, :mm1, :] = np.moveaxis(top, 2, 0)
    slots[(-deg) % G1, :, mm1, :] = np.moveaxis(b, 1, 0)
    return sample_array(slots, axes=(0,))


def _row_coefficients(row: np.ndarray, n: int):
    """alpha, gamma of a last row with samples (G1, P, m)."""
    G1 = row.shape[0]
    c = coefficient_array(row, axes=(0,))
    k = np.arange(1, n + 1)
    alpha = np.moveaxis(c[(-k) % G1, :, :-1], 0, -1)  # (P, m-1, n)
    gamma = np.moveaxis(c[: n + 1, :, -1], 0, -1)  # (P, n+1)
    return alpha, gamma


def _singular_check(sv_ratio, gamma, stage, outer_shape, offset=0):
    g0 = np.abs(gamma[:, 0])
    gnorm = np.sqrt((np.abs(gamma) ** 2).sum(axis=1))
    bad = (sv_ratio <= SINGULAR_RCOND) | (g0 <= 1e-14 * gnorm) | (gnorm == 0)
    bad |= ~np.isfinite(sv_ratio)
    if np.any(bad):
        p = int(np.argmax(bad)) + offset
        idx = np.unravel_index(p, outer_shape) if outer_shape else ()
        raise SliceSingular(idx, stage, f"singular value ratio {sv_ratio[np.argmax(bad)]:.2e}")
    return g0 / np.where(gnorm > 0, gnorm, 1.0)


def build_unitary(Fminus_n: RowMatrix, n: int) -> StructuredUnitary:
    """Structured unitary U with F_-^{n} U polynomial of degree <= n in t_1.

    Normalized so that (F_-^{n} U)(0) is lower triangular with positive
    diagonal; this pins det U = 1.
    """
    if n < 1:
        raise ValueError(f"truncation order must be >= 1, got {n}")
    m = Fminus_n.m
    sizes = Fminus_n.f.sizes
    G1, outer = sizes[0], sizes[1:]
    if n > index_range(G1)[1] or -n < index_range(G1)[0]:
        raise AliasError(f"order {n} does not fit first-axis size {G1}")
    row = np.stack([z.samples for z in Fminus_n.zetas] + [Fminus_n.f.samples], axis=-1)
    row = row.reshape((G1, -1, m))
    alpha, gamma = _row_coefficients(row, n)
    top, b, ratio = _unitary_coefficients(alpha, gamma, n)
    _singular_check(ratio, gamma, m, outer)
    leak = _product_leakage(alpha, gamma, top, b)
    U = _unitary_samples(top, b, G1)
    udev, ddev = _unitary_stats(U)
    P = row.shape[1]
    return StructuredUnitary(
        m=m,
        n=n,
        u=MatrixFunction(U.reshape(sizes + (m, m))),
        top=top.reshape(outer + top.shape[1:]),
        bottom=b.reshape(outer + b.shape[1:]),
        product_leakage=float(leak.max()) if P else 0.0,
        unitarity_dev=udev,
        det_dev=ddev,
    )


def _unitary_stats(U: np.ndarray) -> tuple[float, float]:
    m = U.shape[-1]
    dev = np.abs(U @ ctranspose(U) - np.eye(m)).max()
    ddev = np.abs(np.linalg.det(U) - 1).max()
    return float(dev), float(ddev)


# -- assembly ----------------------------------------------------------------

@dataclass
class _ChunkStats:
    unitarity_dev: float = 0.0
    det_dev: float = 0.0
    product_leakage: float = 0.0
    f0_ratio: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _complete_chunk(Q: np.ndarray, n: int, outer_shape, offset: int):
    """Run stages m = 2..d on slices Q of shape (G1, P, d, d), in place."""
    G1, P, d, _ = Q.shape
    stats = _ChunkStats(f0_ratio=np.full(P, np.inf))
    for m in range(2, d + 1):
        nm = (m - 1) * n
        alpha, gamma = _row_coefficients(Q[:, :, m - 1, :m], nm)
        top, b, ratio = _unitary_coefficients(alpha, gamma, nm)
        f0 = _singular_check(ratio, gamma, m, outer_shape, offset)
        stats.f0_ratio = np.minimum(stats.f0_ratio, f0)
        stats.product_leakage = max(stats.product_leakage, float(_product_leakage(alpha, gamma, top, b).max()))
        U = _unitary_samples(top, b, G1)
        udev, ddev = _unitary_stats(U)
        stats.unitarity_dev = max(stats.unitarity_dev, udev)
        stats.det_dev = max(stats.det_dev, ddev)
        Q[:, :, :, :m] = Q[:, :, :, :m] @ U
    return stats


def resolve_workers(workers: int | None) -> int:
    """Worker count from the argument, then NDSPEC_THREADS, then 1."""
    if workers is None:
        env = os.environ.get("NDSPEC_THREADS")
        workers = int(env) if env else 1
    return max(1, int(workers))


def hermitian_stats(S: np.ndarray, Splus: np.ndarray) -> tuple[float, float]:
    """(max_t ||S - Splus Splus^*||_2, max_t ||S||_2)."""
    E = S - Splus @ ctranspose(Splus)
    E = 0.5 * (E + ctranspose(E))
    res = np.abs(np.linalg.eigvalsh(E)).max() if E.size else 0.0
    scale = np.abs(np.linalg.eigvalsh(0.5 * (S + ctranspose(S)))).max() if S.size else 0.0
    return float(res), float(scale)


def first_var_leakage(values: np.ndarray) -> float:
    """Relative coefficient energy at negative first-variable degrees."""
    G1 = values.shape[0]
    c = coefficient_array(values, axes=(0,))
    energy = np.abs(c) ** 2
    lo = index_range(G1)[0]
    total = energy.sum()
    return float(energy[lo % G1:].sum() / total) if total > 0 and lo < 0 else 0.0


def factor_plus_one(S: MatrixFunction, n: int, workers: int | None = None):
    """S_{+,1}^{n} = M_1^{n} U_2 U_3 ... U_d, analytic in t_1 on every slice.

    Parameters
    ----------
    S : MatrixFunction
        Hermitian positive definite samples; axis 0 is t_1.
    n : int
        Base truncation order; stage m uses (m-1) n.
    workers : int, optional
        Threads used over slice chunks. Results do not depend on it.

    Returns
    -------
    (MatrixFunction, FactorizationReport)
    """
    vals = np.asarray(S.values)
    sizes, d = S.sizes, S.d
    G1, outer = sizes[0], sizes[1:]
    _check_grid(G1, d, n)
    M = _lower_upper(vals)
    if d > 1:
        M = _truncate_lower(M, n)
    det_m = np.prod(np.einsum("...ii->...i", M), axis=-1)

    Q = np.ascontiguousarray(M.reshape((G1, -1, d, d)))
    P = Q.shape[1]
    report = FactorizationReport(stage_orders=[n], grid=list(sizes))
    if d > 1:
        nw = min(resolve_workers(workers), P)
        # slice blocks bounded in memory; per-slice results do not depend on blocking
        nmax = (d - 1) * n
        block = max(1, min(-(-P // nw), BLOCK_BUDGET // (d * (nmax + 1) ** 2)))
        chunks = [(lo, min(lo + block, P)) for lo in range(0, P, block)]

        def run(lo_hi):
            lo, hi = lo_hi
            part = np.array(Q[:, lo:hi])
            st = _complete_chunk(part, n, outer, lo)
            return part, st

        if nw == 1:
            results = [run(ch) for ch in chunks]
        else:
            with ThreadPoolExecutor(max_workers=nw) as pool:
                results = list(pool.map(run, chunks))
        f0 = np.empty(P)
        for (lo, hi), (part, st) in zip(chunks, results):
            Q[:, lo:hi] = part
            f0[lo:hi] = st.f0_ratio
            report.unitarity_dev = max(report.unitarity_dev, st.unitarity_dev)
            report.det_unitary_dev = max(report.det_unitary_dev, st.det_dev)
            report.product_leakage = max(report.product_leakage, st.product_leakage)
        report.min_f0_ratio = float(f0.min())
        flagged = np.nonzero(f0 < F0_FLAG)[0]
        report.flagged_slices = [tuple(int(v) for v in np.unravel_index(p, outer)) if outer else () for p in flagged]

    Splus = Q.reshape(vals.shape)
    report.residual, report.scale = hermitian_stats(vals, Splus)
    det_p = np.linalg.det(Splus)
    report.det_drift = float(np.abs(det_p - det_m).max() / max(np.abs(det_m).max(), math.ulp(1.0)))
    report.analytic_leakage = first_var_leakage(Splus)
    return MatrixFunction(Splus), report
