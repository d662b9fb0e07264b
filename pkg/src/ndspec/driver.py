"""
Recursive N-variable factorization.

Stage 1 factors S in t_1 on every slice. Stage l >= 2 takes the value of the
current factor at t_1 = ... = t_{l-1} = 0 (the mean over those axes), factors
its Gram matrix in t_l, and multiplies the current factor by the resulting
unitary correction, a function of t_l..t_N only. The product is finally
pinned by making its value at the origin Hermitian positive definite.
"""
from __future__ import annotations

import math
import time
from typing import Sequence

import numpy as np

from .errors import HatSingular, NDSpecError, OriginSingular
from .harmonic import MatrixFunction, analytic_leakage, ctranspose
from .jlstep import factor_plus_one, hermitian_stats
from .report import FactorizationReport

__all__ = [
    "FactorizationReport",
    "sf_operator",
    "hat_at_origin",
    "unitary_correction",
    "full_factor",
    "normalize_at_origin",
    "verify",
    "default_grid",
    "default_orders",
]

# below this min/max singular value ratio a matrix counts as singular
_SINGULAR = 1e-13


def sf_operator(S: MatrixFunction, n: int, workers: int | None = None) -> MatrixFunction:
    """Factor of S analytic in its leading variable (one-stage approximation)."""
    return factor_plus_one(S, n, workers)[0]


def hat_at_origin(Splus: MatrixFunction, l: int) -> MatrixFunction:
    """Value at t_1 = ... = t_l = 0: the mean over the first l grid axes."""
    if not 0 <= l <= Splus.N:
        raise ValueError(f"l must lie in 0..{Splus.N}, got {l}")
    vals = np.asarray(Splus.values)
    return MatrixFunction(vals.mean(axis=tuple(range(l))) if l else vals)


def _check_invertible(vals: np.ndarray, exc):
    s = np.linalg.svd(vals, compute_uv=False)
    ratio = s[..., -1] / np.where(s[..., 0] > 0, s[..., 0], 1.0)
    if np.any(ratio <= _SINGULAR) or not np.all(np.isfinite(ratio)):
        bad = np.where(np.isfinite(ratio), ratio, -1.0)
        raise exc(np.unravel_index(np.argmin(bad), bad.shape) if bad.ndim else ())


def unitary_correction(hat: MatrixFunction, n: int, workers: int | None = None, stage: int = 0):
    """hat^{-1} SF[hat hat^*]: unitary, and the factor's analytic completion.

    Returns
    -------
    (MatrixFunction, FactorizationReport)
        The correction and the report of the inner one-variable factorization
        with ``unitarity_dev`` of the correction folded in.
    """
    vals = np.asarray(hat.values)
    _check_invertible(vals, lambda p: HatSingular(p, stage))
    gram = vals @ ctranspose(vals)
    phi, rep = factor_plus_one(MatrixFunction(gram), n, workers)
    U = np.linalg.solve(vals, np.asarray(phi.values))
    dev = float(np.abs(U @ ctranspose(U) - np.eye(hat.d)).max())
    rep.unitarity_dev = max(rep.unitarity_dev, dev)
    return MatrixFunction(U), rep


def _sqrtm_psd(H: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (H + ctranspose(H)))
    return (V * np.sqrt(np.clip(w, 0, None))) @ ctranspose(V)


def normalize_at_origin(Splus: MatrixFunction) -> MatrixFunction:
    """Splus W with W = O^{-1} sqrt(O O^*), O the value at the origin.

    W is a constant unitary, so Splus Splus^* is unchanged, and the new
    origin value sqrt(O O^*) is Hermitian positive definite.
    """
    vals = np.asarray(Splus.values)
    O = vals.mean(axis=tuple(range(Splus.N)))
    s = np.linalg.svd(O, compute_uv=False)
    if s[-1] <= _SINGULAR * s[0] or not np.all(np.isfinite(s)):
        raise OriginSingular(f"value at the origin is singular (singular values {s})")
    W = np.linalg.solve(O, _sqrtm_psd(O @ ctranspose(O)))
    return MatrixFunction(vals @ W)


def _log_abs_det(vals: np.ndarray) -> np.ndarray:
    return np.linalg.slogdet(vals)[1]


def _det_chain(logdet_S: np.ndarray, hat_vals: np.ndarray, l: int) -> float:
    """max relative gap between |det hat_l|^2 and exp(mean_{first l} log det S)."""
    target = logdet_S.mean(axis=tuple(range(l)))
    return float(np.abs(np.expm1(2 * _log_abs_det(hat_vals) - target)).max())


def verify(S: MatrixFunction, Splus: MatrixFunction) -> FactorizationReport:
    """Diagnostics of a candidate factor; never raises on a bad factor."""
    if S.values.shape != Splus.values.shape:
        raise ValueError(f"shape mismatch: {S.values.shape} vs {Splus.values.shape}")
    svals = np.asarray(S.values)
    pvals = np.asarray(Splus.values)
    N = S.N
    rep = FactorizationReport(grid=list(S.sizes))
    rep.residual, rep.scale = hermitian_stats(svals, pvals)
    rep.analytic_leakage = analytic_leakage(pvals, N)
    sign, logdet_S = np.linalg.slogdet(0.5 * (svals + ctranspose(svals)))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_det_p = _log_abs_det(pvals)
        origin = pvals.mean(axis=tuple(range(N)))
        log_det_o = _log_abs_det(origin)
        rep.outer_gap = float(abs(log_det_p.mean() - log_det_o))
        if np.all(sign > 0):
            rep.logdet_gap = float(abs(logdet_S.mean() - 2 * log_det_p.mean()))
            rep.det_drift = max(_det_chain(logdet_S, hat_at_origin(Splus, l).values, l) for l in range(1, N + 1))
        else:
            rep.logdet_gap = rep.det_drift = math.inf
    for name in ("outer_gap", "logdet_gap", "det_drift"):
        if not math.isfinite(getattr(rep, name)):
            setattr(rep, name, math.inf)
            rep.status = "failed"
            rep.message = "factor or spectrum is singular somewhere on the grid"
    return rep


def default_grid(degrees: Sequence[int], d: int = 1) -> tuple[int, ...]:
    """Power-of-two grid for a trigonometric-polynomial input.

    The factor of a polynomial spectrum is not a polynomial in general, so
    the grid must resolve its decaying tail; the bases below reach rounding
    level on well-conditioned inputs with a few per-axis degrees.
    """
    N = len(degrees)
    base = {1: (1024,), 2: (512, 128), 3: (128, 64, 64)}.get(N, (32,) * N)
    out = []
    for b, deg in zip(base, degrees):
        need = max(b, 4 * (int(deg) + 1))
        out.append(1 << (need - 1).bit_length())
    return tuple(out)


def default_orders(sizes: Sequence[int], d: int) -> tuple[int, ...]:
    """Largest truncation orders the grid supports, capped at 64."""
    return tuple(max(1, min(64, (int(G) // 2 - 1) // max(d - 1, 1))) for G in sizes)


def _permute(vals: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    N = vals.ndim - 2
    return np.transpose(vals, tuple(perm) + (N, N + 1))


def full_factor(
    S: MatrixFunction,
    orders: Sequence[int] | None = None,
    axis_order: Sequence[int] | None = None,
    workers: int | None = None,
    normalize: bool = True,
):
    """Spectral factor S_+ of analytic type on the half-plane, S = S_+ S_+^*.

    Parameters
    ----------
    S : MatrixFunction
        Hermitian positive definite samples on an N-torus grid.
    orders : sequence of int, optional
        Truncation orders n_1..n_N, one per variable in processing order.
        Defaults to :func:`default_orders` for the grid.
    axis_order : sequence of int, optional
        Permutation of the grid axes; ``axis_order[0]`` is treated as the
        leading variable. The half-plane, and so the factor, depends on it.
    workers : int, optional
        Threads for slice-parallel work; output does not depend on it.
    normalize : bool
        Pin the constant unitary freedom by a positive definite origin value.

    Returns
    -------
    (MatrixFunction, FactorizationReport)

    Raises
    ------
    NDSpecError
        Numeric failures; the partial report is attached as ``exc.report``.
    """
    N, d = S.N, S.d
    if N < 1:
        raise ValueError("need at least one variable")
    perm = tuple(range(N)) if axis_order is None else tuple(int(a) for a in axis_order)
    if sorted(perm) != list(range(N)):
        raise ValueError(f"axis_order must be a permutation of 0..{N - 1}, got {perm}")
    vals = _permute(np.asarray(S.values), perm)
    sizes = vals.shape[:N]
    orders = default_orders(sizes, d) if orders is None else tuple(int(n) for n in orders)
    if len(orders) != N:
        raise ValueError(f"expected {N} orders, got {len(orders)}")

    report = FactorizationReport(stage_orders=list(orders), grid=list(S.sizes))
    t_start = time.perf_counter()
    try:
        logdet_S = np.linalg.slogdet(0.5 * (vals + ctranspose(vals)))[1]
        t0 = time.perf_counter()
        Sp, rep1 = factor_plus_one(MatrixFunction(vals), orders[0], workers)
        Sp = np.array(Sp.values)
        report.merge_stage(rep1, l=1, n=orders[0])
        report.det_drift = rep1.det_drift
        report.timings["stage_1"] = time.perf_counter() - t0
        for l in range(2, N + 1):
            t0 = time.perf_counter()
            hat = Sp.mean(axis=tuple(range(l - 1)))
            report.det_drift = max(report.det_drift, _det_chain(logdet_S, hat, l - 1))
            U, rep_l = unitary_correction(MatrixFunction(hat), orders[l - 1], workers, stage=l)
            Sp = Sp @ np.asarray(U.values)[(None,) * (l - 1)]
            report.merge_stage(rep_l, l=l, n=orders[l - 1])
            report.det_drift = max(report.det_drift, rep_l.det_drift)
            report.timings[f"stage_{l}"] = time.perf_counter() - t0
        report.det_drift = max(report.det_drift, _det_chain(logdet_S, Sp.mean(axis=tuple(range(N))), N))
        if normalize:
            t0 = time.perf_counter()
            Sp = np.array(normalize_at_origin(MatrixFunction(Sp)).values)
            report.timings["normalize"] = time.perf_counter() - t0
    except NDSpecError as exc:
        report.status = "failed"
        report.message = str(exc)
        report.timings["total"] = time.perf_counter() - t_start
        exc.report = report
        raise

    diag = verify(MatrixFunction(vals), MatrixFunction(Sp))
    report.residual, report.scale = diag.residual, diag.scale
    report.analytic_leakage = diag.analytic_leakage
    report.outer_gap = diag.outer_gap
    report.logdet_gap = diag.logdet_gap
    report.det_drift = max(report.det_drift, diag.det_drift)
    if diag.status != "ok":
        report.status, report.message = diag.status, diag.message
    inv = np.argsort(perm)
    out = _permute(Sp, inv)
    report.timings["total"] = time.perf_counter() - t_start
    return MatrixFunction(out), report
