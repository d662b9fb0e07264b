"""
Granger causality Y -> X from spectral factors of a 2 x 2 spectral density.

The restricted L-step prediction error of X uses the outer factor f_+ of
S_11; the joint one uses the first row of the matrix factor S^+:

    sigma_L^2 = sum_{k<L} |C_k{f_+}|^2
    Sigma_L^2 = sum_{k<L} |C_k{S^+_11}|^2 + |C_k{S^+_12}|^2
    F^L       = ln(sigma_L / Sigma_L)

In two variables "k < L" becomes the half-plane order: the index set is
{k in H_2 : (L, M) - k in H_2 minus the origin}, which is infinite and is
intersected with a box [0, K1] x [-K2, K2].
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .driver import full_factor
from .errors import NotPositiveDefinite, TruncationWarning
from .harmonic import GridFunction, MatrixFunction, coefficient_array, signed_indices
from .scalar import outer_factor_1d, outer_factor_full

BOUNDARY_TOL = 1e-10
SUPPORT_TOL = 1e-14


@dataclass(frozen=True)
class CausalityResult:
    value: float  # ln(sigma / Sigma)
    sigma: float
    Sigma: float
    horizon: tuple
    truncation: tuple | None = None  # (K1, K2) box of the 2-D sums
    boundary_energy: float = 0.0  # relative energy of grid terms left outside the box

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "sigma": self.sigma,
            "Sigma": self.Sigma,
            "horizon": list(self.horizon),
            "truncation": None if self.truncation is None else list(self.truncation),
            "boundary_energy": self.boundary_energy,
        }


def _check_input(S: MatrixFunction, N: int):
    if S.d != 2:
        raise ValueError(f"causality needs a 2 x 2 spectrum, got d={S.d}")
    if S.N != N:
        raise ValueError(f"expected a function of {N} variable(s), got N={S.N}")
    vals = np.asarray(S.values)
    w = np.linalg.eigvalsh(0.5 * (vals + np.conj(np.swapaxes(vals, -1, -2))))[..., 0]
    if np.any(w <= 0):
        raise NotPositiveDefinite(np.unravel_index(np.argmin(w), w.shape))


def _factors(S: MatrixFunction, orders, workers):
    fplus = (outer_factor_1d if S.N == 1 else outer_factor_full)(GridFunction(S.values[..., 0, 0].real)).fplus
    Splus, _ = full_factor(S, orders=orders, workers=workers, normalize=True)
    cf = coefficient_array(fplus.samples)
    row = coefficient_array(np.asarray(Splus.values)[..., 0, :], axes=range(S.N))
    return cf, row


def granger_1d(S: MatrixFunction, L: int, orders: Sequence[int] | None = None, workers: int | None = None) -> CausalityResult:
    """F^L_{Y->X} for a 2 x 2 spectral density on the circle.

    Parameters
    ----------
    S : MatrixFunction
        Positive definite on the grid; X is the first channel.
    L : int
        Prediction horizon, L >= 1.
    """
    if L < 1:
        raise ValueError("horizon must be positive")
    _check_input(S, 1)
    cf, row = _factors(S, orders, workers)
    G = S.sizes[0]
    k = np.arange(min(L, G // 2 + 1))
    sigma2 = float((np.abs(cf[k]) ** 2).sum())
    Sigma2 = float((np.abs(row[k]) ** 2).sum())
    return CausalityResult(0.5 * math.log(sigma2 / Sigma2), math.sqrt(sigma2), math.sqrt(Sigma2), (L,))


def _index_mask(L: int, M: int, box: tuple[int, int]):
    K1, K2 = box
    k = np.arange(K1 + 1)[:, None]
    l = np.arange(-K2, K2 + 1)[None, :]
    inside = (k > 0) | ((k == 0) & (l >= 0))
    rest = (L - k > 0) | ((L - k == 0) & (M - l > 0))
    return k, l, inside & rest


def index_set(L: int, M: int, box: tuple[int, int]) -> list[tuple[int, int]]:
    """{(k, l) in H_2 : (L - k, M - l) in H_2, != 0} within [0, K1] x [-K2, K2]."""
    k, l, mask = _index_mask(L, M, box)
    kk, ll = np.broadcast_arrays(k, l)
    return [(int(a), int(b)) for a, b in zip(kk[mask], ll[mask])]


def _default_box(cf: np.ndarray, row: np.ndarray, sizes) -> tuple[int, int]:
    k1 = signed_indices(sizes[0])[:, None]
    k2 = signed_indices(sizes[1])[None, :]
    mag = np.maximum(np.abs(cf), np.abs(row).max(axis=-1))
    sig = (mag >= SUPPORT_TOL * mag.max()) & (k1 >= 0)
    K1 = int(np.max(np.where(sig, k1, 0)))
    K2 = int(np.max(np.where(sig, np.abs(k2), 0)))
    # the Nyquist column has no negative partner; stay inside the grid
    return min(K1, sizes[0] // 2), min(K2, (sizes[1] - 1) // 2)


def granger_2d(
    S: MatrixFunction,
    L: int,
    M: int,
    box: tuple[int, int] | None = None,
    orders: Sequence[int] | None = None,
    workers: int | None = None,
) -> CausalityResult:
    """Spatio-temporal F^{LM}_{Y->X} under the half-plane order on Z^2.

    ``box`` = (K1, K2) bounds the index set; by default it covers every
    factor coefficient at or above 1e-14 of the largest. The index-set terms
    that the grid resolves but the box leaves out are summed separately; a
    :class:`TruncationWarning` is issued when they carry more than 1e-10 of
    either sum.
    """
    _check_input(S, 2)
    cf, row = _factors(S, orders, workers)
    sizes = S.sizes
    if box is None:
        box = _default_box(cf, row, sizes)
    K1, K2 = int(box[0]), int(box[1])
    if K1 > sizes[0] // 2 or K2 >= (sizes[1] + 1) // 2 or K1 < 0 or K2 < 0:
        raise ValueError(f"box {box} exceeds the grid {sizes}")
    k, l, mask = _index_mask(L, M, (sizes[0] // 2, (sizes[1] - 1) // 2))
    slot = (k % sizes[0], l % sizes[1])
    a = np.where(mask, np.abs(cf[slot]) ** 2, 0.0)
    b = np.where(mask, (np.abs(row[slot]) ** 2).sum(axis=-1), 0.0)
    inside = np.broadcast_to((k <= K1) & (np.abs(l) <= K2), a.shape)
    sigma2, Sigma2 = float(a[inside].sum()), float(b[inside].sum())
    out_s, out_S = float(a[~inside].sum()), float(b[~inside].sum())
    boundary = max(out_s / (sigma2 + out_s) if sigma2 + out_s else 0.0, out_S / (Sigma2 + out_S) if Sigma2 + out_S else 0.0)
    if boundary > BOUNDARY_TOL:
        warnings.warn(f"terms outside the box {(K1, K2)} carry {boundary:.2e} of the sums", TruncationWarning, stacklevel=2)
    return CausalityResult(
        0.5 * math.log(sigma2 / Sigma2), math.sqrt(sigma2), math.sqrt(Sigma2), (L, M), (K1, K2), boundary
    )
