"""
Scalar spectral factorization on T and T^N.

For a positive density f the outer factor in one variable is

    f_+ = sqrt(f) * exp(i * S(log sqrt f))

where S is the conjugate-function operator (Fourier multiplier -i*sign(k)).
In several variables the first-variable factor is corrected by unimodular
terms built from the check functions (means of log sqrt f over the leading
axes) so that every iterated value at the origin is outer as well.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NotPositive
from .harmonic import GridFunction, coefficient_array, sample_array, signed_indices


class FactorKind(enum.Enum):
    FIRST_VARIABLE = "first_variable"
    FULL_OUTER = "full_outer"


@dataclass(frozen=True)
class ScalarFactorization:
    fplus: GridFunction
    kind: FactorKind
    log_mean: float  # grid mean of log sqrt f
    min_value: float  # smallest sample of f encountered


def conjugate_multiplier(G: int) -> np.ndarray:
    # -i*sign(k); k=0 and the Nyquist slot are annihilated so real maps to real
    k = signed_indices(G)
    mult = -1j * np.sign(k)
    if G % 2 == 0:
        mult[G // 2] = 0
    return mult


def conjugate_array(h: np.ndarray, axis: int = 0) -> np.ndarray:
    """Conjugate function of real samples ``h`` along ``axis``."""
    h = np.asarray(h)
    G = h.shape[axis]
    shape = [1] * h.ndim
    shape[axis] = G
    c = coefficient_array(h, axes=(axis,))
    out = sample_array(c * conjugate_multiplier(G).reshape(shape), axes=(axis,))
    return out.real if np.isrealobj(h) else out


def conjugate_first_var(h: GridFunction) -> GridFunction:
    """Conjugate operator S_1 in the first variable, slice by slice."""
    samples = h.samples
    if np.any(np.abs(samples.imag) > 1e-12 * max(1.0, np.abs(samples).max())):
        raise ValueError("conjugate operator expects real-valued samples")
    return GridFunction(conjugate_array(samples.real, axis=0))


def _checked_density(f: GridFunction, floor: float | None) -> np.ndarray:
    vals = np.asarray(f.samples)
    if np.any(np.abs(vals.imag) > 1e-12 * max(1.0, np.abs(vals).max())):
        raise ValueError("density must be real-valued")
    vals = vals.real
    if floor is not None:
        vals = vals + floor
    if vals.size and vals.min() <= 0:
        pos = np.unravel_index(np.argmin(vals), vals.shape)
        raise NotPositive(pos, vals[pos])
    return vals


def outer_phase(log_modulus: np.ndarray, axis: int = 0) -> np.ndarray:
    """exp(i * S(log_modulus)) along ``axis``."""
    return np.exp(1j * conjugate_array(log_modulus, axis=axis))


def outer_factor_first_var(f: GridFunction, floor: float | None = None) -> ScalarFactorization:
    """Factor f = |f_{+,1}|^2 with f_{+,1} outer in t_1 on every slice.

    ``floor`` adds a constant to f before factoring; it is off by default
    because silently regularizing a density changes the answer.
    """
    if f.N < 1:
        raise ValueError("need at least one variable")
    vals = _checked_density(f, floor)
    h = 0.5 * np.log(vals)
    fplus = np.sqrt(vals) * outer_phase(h, axis=0)
    return ScalarFactorization(GridFunction(fplus), FactorKind.FIRST_VARIABLE, float(h.mean()), float(vals.min()))


def outer_factor_1d(f: GridFunction, floor: float | None = None) -> ScalarFactorization:
    """Outer factor on the circle, normalized so f_+(0) > 0."""
    if f.N != 1:
        raise ValueError(f"expected a function on T, got N={f.N}")
    res = outer_factor_first_var(f, floor)
    return ScalarFactorization(res.fplus, FactorKind.FULL_OUTER, res.log_mean, res.min_value)


def check_function(f: GridFunction, k: int) -> GridFunction:
    """Mean of log sqrt f over the first k axes, a function on T^{N-k}."""
    if not 1 <= k <= f.N - 1:
        raise ValueError(f"k must lie in 1..{f.N - 1}, got {k}")
    vals = _checked_density(f, None)
    return GridFunction(0.5 * np.log(vals).mean(axis=tuple(range(k))))


def outer_factor_full(f: GridFunction, floor: float | None = None) -> ScalarFactorization:
    """Outer factor on T^N with respect to the half-plane H_N.

    The first-variable factor times exp(i S(check_k)) for k = 1..N-1, where
    S acts on the leading remaining variable t_{k+1} of check_k.
    """
    first = outer_factor_first_var(f, floor)
    vals = _checked_density(f, floor)
    log_half = 0.5 * np.log(vals)
    fplus = np.array(first.fplus.samples)
    for k in range(1, f.N):
        check = log_half.mean(axis=tuple(range(k)))
        fplus = fplus * outer_phase(check, axis=0)[(None,) * k]
    return ScalarFactorization(GridFunction(fplus), FactorKind.FULL_OUTER, first.log_mean, first.min_value)


def outer_chain(fplus: GridFunction) -> list[float]:
    """Grid means of log|hat_k| for k = 0..N, hat_k the mean over k leading axes.

    For an outer function all entries agree; the last one is log|f(0)|.
    """
    vals = np.asarray(fplus.samples)
    out = [float(np.log(np.abs(vals)).mean())]
    for k in range(1, fplus.N + 1):
        hat = vals.mean(axis=tuple(range(k)))
        out.append(float(np.log(np.abs(hat)).mean()))
    return out
