"""
Spectrum and result documents.

JSON layout::

    {
      "schema_version": "1.0",
      "N": 2, "d": 2,
      "representation": "laurent" | "grid",
      "kind": "spectrum" | "factor",
      "entries": [[...]],         # laurent: entries[i][j] = [{"k": [..], "re": x, "im": y}, ...]
                                  # grid: entries[i][j] = [re, im, re, im, ...] row-major
      "sizes": [G1, G2],          # grid only
      "metadata": {}
    }

A document of kind "factor" holds A; loading it as a spectrum yields A A^*.

Binary grids: a little-endian header of eight fields (magic b"NDSP", version,
N, d, four sizes, unused ones 0) as uint32, followed by complex128 samples of
shape (*sizes, d, d) in row-major order.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, SymmetryError
from .harmonic import LaurentTable, MatrixFunction, coefficients

SCHEMA_VERSION = "1.0"
SYMMETRY_TOL = 1e-12
BINARY_MAGIC = b"NDSP"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4s7I")


@dataclass
class SpectrumDocument:
    N: int
    d: int
    representation: str = "laurent"
    kind: str = "spectrum"
    tables: list | None = None  # d x d LaurentTable, laurent form
    samples: np.ndarray | None = None  # (*sizes, d, d), grid form
    metadata: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    @property
    def sizes(self) -> tuple[int, ...] | None:
        return None if self.samples is None else tuple(self.samples.shape[:-2])

    def degrees(self) -> tuple[int, ...]:
        """Largest |k_i| per axis over all entries (laurent form)."""
        deg = [0] * self.N
        for row in self.tables or []:
            for t in row:
                for a, v in enumerate(t.degrees()):
                    deg[a] = max(deg[a], v)
        return tuple(deg)

    def matrix(self, sizes: Sequence[int] | None = None) -> MatrixFunction:
        """The stored matrix (not A A^* for factors) on a grid."""
        if self.representation == "grid":
            if sizes is not None and tuple(sizes) != self.sizes:
                raise ParseError(f"grid document has sizes {self.sizes}, requested {tuple(sizes)}")
            return MatrixFunction(self.samples)
        if sizes is None:
            from .driver import default_grid

            sizes = default_grid(self.degrees(), self.d)
        if len(sizes) != self.N:
            raise ParseError(f"grid {tuple(sizes)} has the wrong number of axes for N={self.N}")
        if self.d == 0:
            return MatrixFunction(np.zeros(tuple(sizes) + (0, 0), dtype=complex))
        return MatrixFunction.from_tables(self.tables, sizes)

    def spectrum(self, sizes: Sequence[int] | None = None) -> MatrixFunction:
        m = self.matrix(sizes)
        if self.kind == "factor":
            return m @ m.H()
        return m

    def to_json(self) -> dict:
        out = {
            "schema_version": self.schema_version,
            "N": self.N,
            "d": self.d,
            "representation": self.representation,
            "kind": self.kind,
        }
        if self.representation == "laurent":
            out["entries"] = [[_table_to_json(t) for t in row] for row in self.tables]
        else:
            out["sizes"] = list(self.sizes)
            out["entries"] = [
                [np.column_stack([self.samples[..., i, j].real.ravel(), self.samples[..., i, j].imag.ravel()]).ravel().tolist()
                 for j in range(self.d)]
                for i in range(self.d)
            ]
        out["metadata"] = self.metadata
        return out

    @classmethod
    def from_json(cls, doc) -> "SpectrumDocument":
        if not isinstance(doc, dict):
            raise ParseError("document must be a JSON object")
        try:
            N, d = int(doc["N"]), int(doc["d"])
            rep = doc.get("representation", "laurent")
            kind = doc.get("kind", "spectrum")
            entries = doc.get("entries", [])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"missing or malformed header field: {exc}") from None
        if N < 1 or d < 0:
            raise ParseError(f"invalid dimensions N={N}, d={d}")
        if rep not in ("laurent", "grid") or kind not in ("spectrum", "factor"):
            raise ParseError(f"unknown representation/kind {rep!r}/{kind!r}")
        meta = doc.get("metadata", {}) or {}
        version = str(doc.get("schema_version", SCHEMA_VERSION))
        if rep == "laurent":
            tables = _tables_from_json(entries, N, d)
            return cls(N, d, rep, kind, tables=tables, metadata=meta, schema_version=version)
        try:
            sizes = tuple(int(g) for g in doc["sizes"])
        except (KeyError, TypeError, ValueError):
            raise ParseError("grid document needs integer 'sizes'") from None
        if len(sizes) != N or any(g < 1 for g in sizes):
            raise ParseError(f"sizes {sizes} do not match N={N}")
        samples = np.zeros(sizes + (d, d), dtype=complex)
        if d:
            try:
                for i in range(d):
                    for j in range(d):
                        flat = np.asarray(entries[i][j], dtype=float)
                        if flat.size != 2 * int(np.prod(sizes)):
                            raise ParseError(f"entry ({i},{j}) has {flat.size} values, expected {2 * int(np.prod(sizes))}")
                        samples[..., i, j] = (flat[0::2] + 1j * flat[1::2]).reshape(sizes)
            except (IndexError, TypeError, ValueError) as exc:
                raise ParseError(f"malformed grid entries: {exc}") from None
        return cls(N, d, rep, kind, samples=samples, metadata=meta, schema_version=version)

    def validate_hermitian(self, tol: float = SYMMETRY_TOL):
        """Spectra must satisfy C_k{S_ij} = conj(C_{-k}{S_ji})."""
        if self.kind != "spectrum":
            return
        if self.representation == "grid":
            s = self.samples
            gap = np.abs(s - np.conj(np.swapaxes(s, -1, -2))).max() if s.size else 0.0
            scale = max(1.0, np.abs(s).max()) if s.size else 1.0
            if gap > tol * scale:
                raise SymmetryError(f"samples are not Hermitian (gap {gap:.2e})")
            return
        scale = max([1.0] + [t.max_abs() for row in self.tables for t in row])
        for i in range(self.d):
            for j in range(self.d):
                a, b = self.tables[i][j], self.tables[j][i]
                for k in set(a.coeffs) | {tuple(-v for v in kk) for kk in b.coeffs}:
                    gap = abs(a[k] - np.conj(b[tuple(-v for v in k)]))
                    if gap > tol * scale:
                        raise SymmetryError(f"entry ({i},{j}) at k={k} breaks Hermitian symmetry (gap {gap:.2e})")


def _table_to_json(t: LaurentTable) -> list:
    return [{"k": list(k), "re": float(v.real), "im": float(v.imag)} for k, v in sorted(t.items())]


def _tables_from_json(entries, N: int, d: int) -> list:
    if entries == [] or entries is None:
        entries = [[[] for _ in range(d)] for _ in range(d)]  # zero function
    if d and (not isinstance(entries, list) or len(entries) != d or any(not isinstance(r, list) or len(r) != d for r in entries)):
        raise ParseError(f"'entries' must be a {d} x {d} array")
    out = []
    for i in range(d):
        row = []
        for j in range(d):
            coeffs = {}
            for term in entries[i][j]:
                try:
                    k = tuple(int(v) for v in term["k"])
                    v = complex(float(term.get("re", 0.0)), float(term.get("im", 0.0)))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ParseError(f"malformed term in entry ({i},{j}): {exc}") from None
                if len(k) != N:
                    raise ParseError(f"index {k} in entry ({i},{j}) has the wrong length for N={N}")
                coeffs[k] = coeffs.get(k, 0) + v
            row.append(LaurentTable(N, coeffs))
        out.append(row)
    return out


# -- files -------------------------------------------------------------------

def read_document(path) -> SpectrumDocument:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    if raw[:4] == BINARY_MAGIC:
        return SpectrumDocument(*_binary_dims(raw), representation="grid", samples=_read_binary(raw))
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from None
    if isinstance(doc, dict) and "factor" in doc and "report" in doc:
        doc = doc["factor"]  # a result document; use its factor payload
        if doc is None:
            raise ParseError(f"{path} holds no factor (failed run)")
    return SpectrumDocument.from_json(doc)


def load_spectrum(path, sizes: Sequence[int] | None = None) -> MatrixFunction:
    """Grid samples of the spectrum stored at ``path`` (A A^* for factor files)."""
    doc = read_document(path)
    doc.validate_hermitian()
    return doc.spectrum(sizes)


def load_matrix(path, sizes: Sequence[int] | None = None) -> MatrixFunction:
    """The stored matrix as is (a factor stays a factor)."""
    return read_document(path).matrix(sizes)


def save_document(doc: SpectrumDocument, path):
    Path(path).write_text(dumps(doc.to_json()), encoding="utf-8")


def document_from_matrix(M: MatrixFunction, kind: str = "spectrum", drop_tol: float = 0.0, metadata=None) -> SpectrumDocument:
    """Laurent-form document of grid samples; coefficients below drop_tol*max are dropped."""
    vals = np.asarray(M.values)
    scale = np.abs(vals).max() if vals.size else 0.0
    tables = []
    for i in range(M.d):
        row = []
        for j in range(M.d):
            t = coefficients(M.entry(i, j))
            row.append(t.cleaned(drop_tol * scale / max(t.max_abs(), 1e-300)) if drop_tol else t)
        tables.append(row)
    return SpectrumDocument(M.N, M.d, "laurent", kind, tables=tables, metadata=dict(metadata or {}))


def _binary_dims(raw: bytes):
    if len(raw) < _HEADER.size:
        raise ParseError("binary file shorter than its header")
    magic, version, N, d, *sizes = _HEADER.unpack_from(raw)
    if version != BINARY_VERSION:
        raise ParseError(f"unsupported binary version {version}")
    if not 1 <= N <= 4:
        raise ParseError(f"binary format holds 1..4 axes, header says {N}")
    return N, d


def _read_binary(raw: bytes) -> np.ndarray:
    magic, version, N, d, *sizes = _HEADER.unpack_from(raw)
    shape = tuple(sizes[:N]) + (d, d)
    count = int(np.prod(shape))
    body = raw[_HEADER.size:]
    if len(body) != 16 * count:
        raise ParseError(f"binary body has {len(body)} bytes, expected {16 * count}")
    return np.frombuffer(body, dtype="<c16").reshape(shape).astype(complex)


def write_binary(M: MatrixFunction, path):
    if not 1 <= M.N <= 4:
        raise ValueError("binary format holds 1..4 axes")
    sizes = list(M.sizes) + [0] * (4 - M.N)
    header = _HEADER.pack(BINARY_MAGIC, BINARY_VERSION, M.N, M.d, *sizes)
    Path(path).write_bytes(header + np.ascontiguousarray(M.values, dtype="<c16").tobytes())


def read_binary(path) -> MatrixFunction:
    raw = Path(path).read_bytes()
    if raw[:4] != BINARY_MAGIC:
        raise ParseError(f"{path} is not an ndspec binary grid")
    _binary_dims(raw)
    return MatrixFunction(_read_binary(raw))


# -- results -------------------------------------------------------------------

def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def result_document(factor: MatrixFunction | None, report, provenance: dict, drop_tol: float = 0.0) -> dict:
    from . import __version__

    payload = None
    if factor is not None:
        payload = document_from_matrix(factor, kind="factor", drop_tol=drop_tol,
                                       metadata={"drop_tol": drop_tol, "grid": list(factor.sizes)}).to_json()
    return {
        "schema_version": SCHEMA_VERSION,
        "factor": payload,
        "report": report.to_dict(),
        "provenance": {**provenance, "tool_version": __version__},
    }


def _plain(obj):
    """JSON-safe copy: tuples to lists, numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_plain(doc), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_result(doc: dict, path):
    Path(path).write_text(dumps(doc), encoding="utf-8")


# -- shipped example ------------------------------------------------------------

def example_path() -> Path:
    """Path of the shipped two-variable 2 x 2 example factor."""
    return Path(str(resources.files("ndspec") / "data" / "worked_example.json"))


def example_factor() -> SpectrumDocument:
    return read_document(example_path())
