"""Weyl quantization of polynomial symbols in a truncated two-mode Fock basis.

Ladder convention: ``a_j = (x_j + i h D_{x_j}) / sqrt(2h)`` with ``[a, a^+] = 1``,
so ``z_j -> sqrt(2h) a_j`` and ``zb_j -> sqrt(2h) a_j^+``.  The Weyl
quantization of ``z^alpha zb^beta`` is ``(2h)^(|alpha|+|beta|)/2`` times the
symmetrized product of ``a^alpha`` and ``(a^+)^beta`` in each mode, and

    sym(a^m (a^+)^n) = sum_k k! C(m,k) C(n,k) 2^-k (a^+)^(n-k) a^(m-k).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp

from .symbols import FrequencyVector, PolySymbol, float_coeff


class TruncationError(ValueError):
    pass


@dataclass(frozen=True)
class FockBasis:
    """States ``|n1, n2>`` with ``n1 + n2 <= n_max``, ordered by cluster then ``n1``."""

    n_max: int
    h: float

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")

    @property
    def dim(self) -> int:
        return (self.n_max + 1) * (self.n_max + 2) // 2

    @cached_property
    def states(self) -> np.ndarray:
        out = [(n1, k - n1) for k in range(self.n_max + 1) for n1 in range(k + 1)]
        return np.array(out, dtype=int)

    @property
    def cluster(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def index(self, n1, n2):
        n1 = np.asarray(n1)
        k = n1 + np.asarray(n2)
        return k * (k + 1) // 2 + n1

    def cluster_slice(self, k: int) -> slice:
        if not 0 <= k <= self.n_max:
            raise IndexError(f"cluster {k} outside 0..{self.n_max}")
        start = k * (k + 1) // 2
        return slice(start, start + k + 1)

    @classmethod
    def for_energy(cls, h: float, E_max: float = 1.0, margin: float = 0.25,
                   degree: int = 4) -> "FockBasis":
        """Smallest basis whose interior clusters reach ``E_max (1 + margin)``."""
        return cls(n_max=int(math.ceil(E_max * (1 + margin) / h)) + 2 * degree, h=h)


def _falling(a: int, count: int) -> float:
    out = 1.0
    for i in range(count):
        out *= a - i
    return out


@lru_cache(maxsize=None)
def _weyl_1d(m: int, n: int, size: int) -> np.ndarray:
    """``<s - m + n| sym(a^m (a^+)^n) |s>`` for ``s = 0..size-1`` (0 where undefined)."""
    out = np.zeros(size)
    for s in range(size):
        t = s - m + n
        if t < 0:
            continue
        val = 0.0
        for k in range(min(m, n) + 1):
            if s - m + k < 0:
                continue
            coef = math.factorial(k) * math.comb(m, k) * math.comb(n, k) / 2 ** k
            # a^(m-k)|s> then (a^+)^(n-k)
            val += coef * math.sqrt(_falling(s, m - k) * _falling(t, n - k))
        out[s] = val
    return out


@dataclass(frozen=True)
class FockOperator:
    """Hermitian matrix of a quantized symbol, stored sparse."""

    basis: FockBasis
    matrix: sp.csr_matrix = field(repr=False)
    symbol_degree: int
    symbol_hash: str = ""

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @property
    def is_real(self) -> bool:
        return not np.any(self.matrix.data.imag)

    def block(self, k: int, kk: int | None = None) -> np.ndarray:
        kk = k if kk is None else kk
        return self.matrix[self.basis.cluster_slice(k), self.basis.cluster_slice(kk)].toarray()

    def hermiticity_error(self) -> float:
        d = self.matrix - self.matrix.conj().T
        scale = max(abs(self.matrix).max(), 1e-300)
        return float(abs(d).max() / scale) if d.nnz else 0.0

    def norm(self) -> float:
        return float(abs(self.matrix).max()) if self.matrix.nnz else 0.0

    def __add__(self, other: "FockOperator") -> "FockOperator":
        if other.basis != self.basis:
            raise ValueError("operators live on different bases")
        return FockOperator(self.basis, (self.matrix + other.matrix).tocsr(),
                            max(self.symbol_degree, other.symbol_degree))

    def scale(self, c: float) -> "FockOperator":
        return FockOperator(self.basis, (self.matrix * c).tocsr(), self.symbol_degree,
                            self.symbol_hash)

    def interior_clusters(self) -> range:
        """Clusters whose matrix elements are untouched by the truncation."""
        return range(0, self.basis.n_max - self.symbol_degree + 1)

    def invariant_blocks(self) -> list[np.ndarray]:
        """Index sets of the decoupled subspaces (cluster residues mod the shift gcd)."""
        coo = self.matrix.tocoo()
        k = self.basis.cluster
        shifts = np.unique(np.abs(k[coo.row] - k[coo.col]))
        g = 0
        for s in shifts:
            g = math.gcd(g, int(s))
        if g <= 1:
            return [np.arange(self.basis.dim)]
        return [np.nonzero(k % g == r)[0] for r in range(g)]

    def save(self, path) -> None:
        header = {"n_max": self.basis.n_max, "h": self.basis.h,
                  "symbol_degree": self.symbol_degree, "symbol_hash": self.symbol_hash}
        coo = self.matrix.tocoo()
        np.savez(path, header=json.dumps(header), row=coo.row, col=coo.col, data=coo.data)

    @classmethod
    def load(cls, path) -> "FockOperator":
        with np.load(path) as f:
            header = json.loads(str(f["header"]))
            basis = FockBasis(header["n_max"], header["h"])
            m = sp.coo_matrix((f["data"], (f["row"], f["col"])), shape=(basis.dim, basis.dim))
        return cls(basis, m.tocsr(), header["symbol_degree"], header["symbol_hash"])


def symbol_hash(symbol: PolySymbol) -> str:
    blob = json.dumps(symbol.to_records(), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def weyl_quantize(symbol: PolySymbol, basis: FockBasis, check_real: bool = True) -> FockOperator:
    """Matrix of the h-Weyl quantization of ``symbol`` on ``basis``."""
    deg = symbol.degree
    if basis.n_max < deg:
        raise TruncationError(f"n_max={basis.n_max} below symbol degree {deg}")
    if check_real and not symbol.is_real(tol=1e-14):
        raise ValueError("symbol must be real-valued")
    h = basis.h
    st = basis.states
    size = basis.n_max + 1 + deg
    rows, cols, vals = [], [], []
    for (a1, a2, b1, b2), c in symbol.items():
        c = float_coeff(c) * (2 * h) ** ((a1 + a2 + b1 + b2) / 2)
        t1 = st[:, 0] - a1 + b1
        t2 = st[:, 1] - a2 + b2
        ok = (t1 >= 0) & (t2 >= 0) & (t1 + t2 <= basis.n_max)
        src = np.nonzero(ok)[0]
        v = _weyl_1d(a1, b1, size)[st[src, 0]] * _weyl_1d(a2, b2, size)[st[src, 1]]
        nz = v != 0
        rows.append(basis.index(t1[src[nz]], t2[src[nz]]))
        cols.append(src[nz])
        vals.append(c * v[nz])
    if rows:
        m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(basis.dim, basis.dim), dtype=complex).tocsr()
    else:
        m = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    m.sum_duplicates()
    m.eliminate_zeros()
    return FockOperator(basis, m, deg, symbol_hash(symbol))


def harmonic_eigenvalues(basis: FockBasis, lam=(1, 1)) -> np.ndarray:
    """``h (lambda . n + (lambda1 + lambda2)/2)`` in basis order."""
    lam = FrequencyVector.coerce(lam).as_floats()
    return basis.h * (basis.states @ lam + lam.sum() / 2)


def cluster_projector(basis: FockBasis, k: int) -> sp.csr_matrix:
    """Orthogonal projector onto ``span{|n1, n2> : n1 + n2 = k}``."""
    sl = basis.cluster_slice(k)
    d = np.zeros(basis.dim)
    d[sl] = 1.0
    return sp.diags(d, format="csr")


def quantum_time_average(Q: FockOperator, lam=(1, 1)) -> FockOperator:
    """Average of ``exp(it P2/h) Q exp(-it P2/h)`` over one period.

    Conjugation multiplies the ``(m, n)`` entry by ``exp(it lambda.(n_m - n_n))``,
    so the average keeps exactly the entries between degenerate states.
    """
    lam = FrequencyVector.coerce(lam)
    lam_int = np.array([float(v) for v in lam.lam])
    level = Q.basis.states @ lam_int
    coo = Q.matrix.tocoo()
    keep = np.isclose(level[coo.row], level[coo.col], rtol=0, atol=1e-12)
    m = sp.coo_matrix((coo.data[keep], (coo.row[keep], coo.col[keep])), shape=coo.shape).tocsr()
    return FockOperator(Q.basis, m, Q.symbol_degree, Q.symbol_hash)
