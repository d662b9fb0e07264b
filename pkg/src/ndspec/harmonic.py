"""
Fourier core on the N-torus.

Grid samples and Laurent coefficients are dual through the N-dimensional FFT.
Sample ``j_i`` on axis ``i`` sits at ``t_i = exp(2*pi*1j*j_i/G_i)`` and
coefficient indices are reported in the symmetric range ``(-G_i/2, G_i/2]``
(the Nyquist index belongs to the positive side).

The first variable ``t_1`` is always grid axis 0.  Everything that acts "in
the first variable" (coefficient slices, masks, the tilde operation) works
along that axis, with the remaining axes treated as parameters.
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AliasError

MultiIndex = tuple  # tuple[int, ...]


def halfplane_contains(k: Sequence[int]) -> bool:
    """Membership in the lattice half-plane H_N.

    H_1 is the non-negative integers; a point of Z^N is in H_N when its first
    component is positive, or it is zero and the tail lies in H_{N-1}.
    """
    if len(k) == 0:
        raise ValueError("multi-index must have dimension >= 1")
    for ki in k:
        if ki > 0:
            return True
        if ki < 0:
            return False
    return True


def signed_indices(G: int) -> np.ndarray:
    """Coefficient index held by each FFT slot of a length-G axis."""
    j = np.arange(G)
    return np.where(j <= G // 2, j, j - G)


def index_range(G: int) -> tuple[int, int]:
    """Inclusive (lo, hi) of the symmetric index range of a length-G axis."""
    return -((G - 1) // 2), G // 2


def halfplane_mask(sizes: Sequence[int]) -> np.ndarray:
    """Boolean array over FFT slots, True where the index lies in H_N."""
    N = len(sizes)
    mask = np.zeros(tuple(sizes), dtype=bool)
    undecided = np.ones(tuple(sizes), dtype=bool)
    for axis, G in enumerate(sizes):
        shape = [1] * N
        shape[axis] = G
        k = signed_indices(G).reshape(shape)
        mask |= undecided & (k > 0)
        undecided &= k == 0
    return mask | undecided


class LaurentTable:
    """Finite map from multi-indices to complex coefficients.

    Coefficients of magnitude at or below ``drop_tol`` are not stored.  The
    default of 0 keeps everything that is exactly nonzero.
    """

    __slots__ = ("N", "_coeffs")

    def __init__(self, N: int, coeffs: Mapping | Iterable = (), drop_tol: float = 0.0):
        if N < 0:
            raise ValueError("N must be non-negative")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        store = {}
        for k, v in items:
            k = tuple(int(i) for i in k)
            if len(k) != N:
                raise ValueError(f"index {k} does not have dimension {N}")
            v = complex(v)
            if abs(v) > drop_tol:
                store[k] = store.get(k, 0) + v
        self.N = N
        self._coeffs = MappingProxyType(store)

    @property
    def coeffs(self) -> Mapping:
        return self._coeffs

    def __getitem__(self, k) -> complex:
        return self._coeffs.get(tuple(k), 0j)

    def __iter__(self):
        return iter(self._coeffs)

    def __len__(self):
        return len(self._coeffs)

    def items(self):
        return self._coeffs.items()

    def __repr__(self):
        body = ", ".join(f"{k}: {v:.6g}" for k, v in sorted(self._coeffs.items()))
        return f"LaurentTable(N={self.N}, {{{body}}})"

    def __eq__(self, other):
        if not isinstance(other, LaurentTable):
            return NotImplemented
        return self.N == other.N and dict(self._coeffs) == dict(other._coeffs)

    def __add__(self, other: "LaurentTable") -> "LaurentTable":
        out = dict(self._coeffs)
        for k, v in other.items():
            out[k] = out.get(k, 0) + v
        return LaurentTable(self.N, {k: v for k, v in out.items() if v != 0})

    def __mul__(self, other):
        if isinstance(other, LaurentTable):
            out = {}
            for k, a in self.items():
                for l, b in other.items():
                    kl = tuple(x + y for x, y in zip(k, l))
                    out[kl] = out.get(kl, 0) + a * b
            return LaurentTable(self.N, {k: v for k, v in out.items() if v != 0})
        return LaurentTable(self.N, {k: v * other for k, v in self.items()})

    __rmul__ = __mul__

    def star(self) -> "LaurentTable":
        """Pointwise conjugate on the torus: k -> conj(c_{-k})."""
        return LaurentTable(self.N, {tuple(-i for i in k): v.conjugate() for k, v in self.items()})

    def max_abs(self) -> float:
        return max((abs(v) for v in self._coeffs.values()), default=0.0)

    def degrees(self) -> tuple[int, ...]:
        """Largest |k_i| over the support, per axis."""
        if not self._coeffs:
            return (0,) * self.N
        arr = np.abs(np.array(list(self._coeffs), dtype=int).reshape(len(self._coeffs), self.N))
        return tuple(int(x) for x in arr.max(axis=0))

    def cleaned(self, rel_tol: float) -> "LaurentTable":
        """Copy without coefficients below ``rel_tol`` times the largest one."""
        return LaurentTable(self.N, self._coeffs, drop_tol=rel_tol * self.max_abs())

    def fits(self, sizes: Sequence[int]) -> bool:
        if len(sizes) != self.N:
            return False
        ranges = [index_range(G) for G in sizes]
        return all(lo <= ki <= hi for k in self._coeffs for ki, (lo, hi) in zip(k, ranges))


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.flags.writeable = False
    return arr


class GridFunction:
    """Complex samples on a uniform grid of the N-torus, row-major."""

    __slots__ = ("samples",)

    def __init__(self, samples):
        object.__setattr__(self, "samples", _frozen(samples))

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.samples.shape

    @property
    def N(self) -> int:
        return self.samples.ndim

    def __repr__(self):
        return f"GridFunction(sizes={self.sizes})"

    def __add__(self, other):
        other = other.samples if isinstance(other, GridFunction) else other
        return GridFunction(self.samples + other)

    def __sub__(self, other):
        other = other.samples if isinstance(other, GridFunction) else other
        return GridFunction(self.samples - other)

    def __mul__(self, other):
        other = other.samples if isinstance(other, GridFunction) else other
        return GridFunction(self.samples * other)

    __rmul__ = __mul__

    @classmethod
    def from_callable(cls, func, sizes: Sequence[int]) -> "GridFunction":
        """Sample ``func(t_1, ..., t_N)`` (broadcasting over unit-circle points)."""
        return cls(func(*torus_points(sizes)))


def torus_points(sizes: Sequence[int]) -> list[np.ndarray]:
    """Broadcastable arrays of the grid points exp(2*pi*i*j/G) per axis."""
    N = len(sizes)
    out = []
    for axis, G in enumerate(sizes):
        shape = [1] * N
        shape[axis] = G
        out.append(np.exp(2j * np.pi * np.arange(G) / G).reshape(shape))
    return out


class MatrixFunction:
    """A d x d matrix of functions sampled on a common grid.

    ``values`` has shape ``(*sizes, d, d)``; entry (i, j) at grid point ``p``
    is ``values[p][i, j]``.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        values = np.asarray(values)
        if values.ndim < 2 or values.shape[-1] != values.shape[-2]:
            raise ValueError("values must have shape (*sizes, d, d)")
        object.__setattr__(self, "values", _frozen(values))

    def __setattr__(self, name, value):
        raise AttributeError("MatrixFunction is immutable")

    @property
    def d(self) -> int:
        return self.values.shape[-1]

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.values.shape[:-2]

    @property
    def N(self) -> int:
        return self.values.ndim - 2

    def __repr__(self):
        return f"MatrixFunction(d={self.d}, sizes={self.sizes})"

    def entry(self, i: int, j: int) -> GridFunction:
        return GridFunction(self.values[..., i, j])

    @classmethod
    def from_entries(cls, entries: Sequence[Sequence[GridFunction]]) -> "MatrixFunction":
        d = len(entries)
        sizes = {e.sizes for row in entries for e in row}
        if len(sizes) != 1 or any(len(row) != d for row in entries):
            raise ValueError("entries must form a square array sharing one grid")
        return cls(np.stack([np.stack([e.samples for e in row], -1) for row in entries], -2))

    @classmethod
    def from_tables(cls, tables: Sequence[Sequence[LaurentTable]], sizes: Sequence[int]) -> "MatrixFunction":
        return cls.from_entries([[evaluate(t, sizes) for t in row] for row in tables])

    def to_tables(self, drop_tol: float = 0.0) -> list[list[LaurentTable]]:
        return [[coefficients(self.entry(i, j), drop_tol) for j in range(self.d)] for i in range(self.d)]

    def H(self) -> "MatrixFunction":
        """Pointwise Hermitian conjugate."""
        return MatrixFunction(ctranspose(self.values))

    def __matmul__(self, other: "MatrixFunction") -> "MatrixFunction":
        return MatrixFunction(self.values @ other.values)

    @classmethod
    def identity(cls, d: int, sizes: Sequence[int]) -> "MatrixFunction":
        return cls(np.broadcast_to(np.eye(d, dtype=complex), (*sizes, d, d)))


def ctranspose(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


# -- grid <-> coefficients -------------------------------------------------

def coefficient_array(samples: np.ndarray, axes=None) -> np.ndarray:
    """Normalized DFT coefficients in FFT slot order."""
    samples = np.asarray(samples)
    axes = tuple(range(samples.ndim)) if axes is None else tuple(axes)
    if not axes:
        return samples.astype(complex)
    scale = np.prod([samples.shape[a] for a in axes])
    return np.fft.fftn(samples, axes=axes) / scale


def sample_array(coeffs: np.ndarray, axes=None) -> np.ndarray:
    coeffs = np.asarray(coeffs)
    axes = tuple(range(coeffs.ndim)) if axes is None else tuple(axes)
    if not axes:
        return coeffs.astype(complex)
    scale = np.prod([coeffs.shape[a] for a in axes])
    return np.fft.ifftn(coeffs, axes=axes) * scale


def coefficients(f: GridFunction, drop_tol: float = 0.0) -> LaurentTable:
    """Fourier coefficients C_k{f} with the 1/prod(sizes) normalization."""
    c = coefficient_array(f.samples)
    idx = [signed_indices(G) for G in f.sizes]
    items = ((tuple(int(idx[a][j]) for a, j in enumerate(pos)), v) for pos, v in np.ndenumerate(c))
    return LaurentTable(f.N, items, drop_tol=drop_tol)


def evaluate(c: LaurentTable, sizes: Sequence[int]) -> GridFunction:
    """Samples of the trigonometric polynomial ``c`` on the grid ``sizes``."""
    sizes = tuple(int(G) for G in sizes)
    if len(sizes) != c.N:
        raise ValueError(f"table has N={c.N} but grid has {len(sizes)} axes")
    if not c.fits(sizes):
        raise AliasError(f"support of degree {c.degrees()} does not fit grid {sizes}")
    arr = np.zeros(sizes, dtype=complex)
    for k, v in c.items():
        arr[tuple(ki % G for ki, G in zip(k, sizes))] += v
    return GridFunction(sample_array(arr))


# -- first-variable operations ---------------------------------------------

def first_var_coefficients(f: GridFunction) -> dict[int, GridFunction]:
    """C_{1k}{f} for every k in the symmetric range of the first axis.

    Each value is a function of the remaining N-1 variables, sampled on the
    residual grid; ``f = sum_k t_1**k C_{1k}{f}``.
    """
    _require_first_axis(f)
    c = coefficient_array(f.samples, axes=(0,))
    G = f.sizes[0]
    lo, hi = index_range(G)
    return {k: GridFunction(c[k % G]) for k in range(lo, hi + 1)}


def tilde(f: GridFunction) -> GridFunction:
    """Replace each first-variable coefficient C_{1k} by conj(C_{1,-k}).

    On grid samples this is exactly pointwise conjugation.
    """
    _require_first_axis(f)
    c = coefficient_array(f.samples, axes=(0,))
    G = f.sizes[0]
    reflected = np.conj(c[(-np.arange(G)) % G])
    return GridFunction(sample_array(reflected, axes=(0,)))


def first_var_mask(G: int, lo: int, hi: int) -> np.ndarray:
    k = signed_indices(G)
    return (k >= lo) & (k <= hi)


def truncate_array(samples: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Keep first-variable coefficients lo <= k <= hi of raw samples (axis 0)."""
    G = samples.shape[0]
    c = coefficient_array(samples, axes=(0,))
    keep = first_var_mask(G, lo, hi).reshape((G,) + (1,) * (samples.ndim - 1))
    return sample_array(np.where(keep, c, 0), axes=(0,))


def truncate_first_var(f: GridFunction, lo: int, hi: int) -> GridFunction:
    _require_first_axis(f)
    rlo, rhi = index_range(f.sizes[0])
    if lo > hi or lo < rlo or hi > rhi:
        raise AliasError(f"truncation range [{lo}, {hi}] is outside [{rlo}, {rhi}]")
    return GridFunction(truncate_array(f.samples, lo, hi))


def split_first_var(f: GridFunction) -> tuple[GridFunction, GridFunction]:
    """(f_plus, f_minus): first-variable degrees k >= 0 and k < 0."""
    _require_first_axis(f)
    lo, hi = index_range(f.sizes[0])
    plus = truncate_array(f.samples, 0, hi)
    return GridFunction(plus), GridFunction(f.samples - plus)


def is_analytic_type(c: LaurentTable, tol: float = 0.0) -> bool:
    """True when no coefficient outside H_N exceeds ``tol`` times the largest."""
    bound = tol * c.max_abs()
    return all(abs(v) <= bound for k, v in c.items() if not halfplane_contains(k))


def analytic_leakage(values: np.ndarray, N: int) -> float:
    """Relative coefficient energy outside H_N of grid samples.

    ``values`` has the N grid axes first; any trailing axes (matrix entries)
    are summed over.
    """
    values = np.asarray(values)
    c = coefficient_array(values, axes=range(N))
    energy = np.abs(c) ** 2
    if values.ndim > N:
        energy = energy.reshape(values.shape[:N] + (-1,)).sum(axis=-1)
    total = energy.sum()
    if total == 0:
        return 0.0
    return float(energy[~halfplane_mask(values.shape[:N])].sum() / total)


def _require_first_axis(f: GridFunction):
    if f.N < 1:
        raise ValueError("operation needs at least one variable")
