"""Deterministic dense-array math used by every other module.

Arrays are plain ``numpy.float64`` ndarrays. Every reduction here runs in a
fixed, ascending index order, so results are bit-stable across runs and do
not depend on BLAS blocking or threading. ``matmul`` uses a compiled i-k-j
loop when numba is importable and an equivalent NumPy reduction otherwise;
the two agree bit for bit.

PRNG
----
``Rng`` is SplitMix64 in counter mode. Draw ``i`` (1-based, counting every
64-bit word ever produced by the instance) is::

    z = (seed + i * 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    z = z ^ (z >> 31)

which is exactly the reference SplitMix64 output stream for ``seed``.
Uniforms are ``(z >> 11) * 2**-53`` in [0, 1). Each normal consumes two
consecutive uniforms ``u1, u2`` (Box-Muller, cosine branch only):
``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``. Permutations are Fisher-Yates from
the top: for ``i = n-1 .. 1`` swap ``i`` with ``floor(u * (i + 1))``.
"""

from __future__ import annotations

import io
import math
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import ContractViolation, FormatError

_MASK64 = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class Rng:
    """Counter-based SplitMix64 generator (see module docstring)."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def next_u64(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * _GAMMA
            z = (z ^ (z >> np.uint64(30))) * _M1
            z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))

    def uniform(self, n: int) -> np.ndarray:
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        u = self.uniform(2 * n)
        u1, u2 = u[0::2], u[1::2]
        return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * math.pi * u2)

    def gaussian(self, shape: tuple[int, ...], std: float = 1.0) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        return (self.normal(n) * std).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        perm = np.arange(n)
        if n < 2:
            return perm
        u = self.uniform(n - 1)
        for step, i in enumerate(range(n - 1, 0, -1)):
            j = int(u[step] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm


def as_matrix(x, name: str = "tensor") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ContractViolation(f"{name} must be rank 2, got shape {a.shape}")
    return a


def seqsum(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Sum along ``axis`` strictly in ascending index order."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[axis] == 0:
        return np.zeros(x.shape[:axis] + x.shape[axis + 1:])
    front = np.ascontiguousarray(np.moveaxis(x, axis, 0))
    if front[0].size < 2:
        # reduced axis would be the fast axis, where numpy sums pairwise
        return np.cumsum(front, axis=0)[-1]
    return np.add.reduce(front, axis=0)


def _matmul_loops(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for kk in range(k):
            aik = a[i, kk]
            for j in range(n):
                out[i, j] += aik * b[kk, j]
    return out


try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    _matmul_kernel = None
else:
    # no fastmath: keeps a*b and + as separate roundings (no FMA contraction)
    _matmul_kernel = numba.njit(cache=True)(_matmul_loops)


def matmul_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same ordering as the compiled kernel, using an outer-axis reduce."""
    m, k = a.shape
    n = b.shape[1]
    if k == 0:
        return np.zeros((m, n))
    terms = np.ascontiguousarray(a.T)[:, :, None] * b[:, None, :]
    if m * n < 2:
        return np.cumsum(terms, axis=0)[-1]
    # outer-axis reduce of a C-contiguous array adds slices one at a time
    return np.add.reduce(terms, axis=0)


def matmul(a, b) -> np.ndarray:
    """Matrix product with the inner index accumulated in ascending order."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractViolation(
            f"matmul needs (m x k) @ (k x n), got {a.shape} x {b.shape}")
    if _matmul_kernel is None:
        return matmul_numpy(a, b)
    return _matmul_kernel(np.ascontiguousarray(a), np.ascontiguousarray(b))


def dot(u, v) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ContractViolation(f"dot length mismatch: {u.shape} vs {v.shape}")
    return float(seqsum(u * v))


def norm(u) -> float:
    return math.sqrt(dot(u, u))


def cosine_similarity(u, v, with_flag: bool = False):
    """u.v / (|u| |v|), clamped to [-1, 1].

    An all-zero argument is not an error: the result is 0.0 and, when
    ``with_flag`` is set, the returned ``degenerate`` flag is True.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ContractViolation(
            f"cosine_similarity length mismatch: {u.shape} vs {v.shape}")
    nu, nv = norm(u), norm(v)
    if nu == 0.0 or nv == 0.0:
        return (0.0, True) if with_flag else 0.0
    c = dot(u, v) / (nu * nv)
    c = min(1.0, max(-1.0, c))
    return (c, False) if with_flag else c


def mean_pool(x) -> np.ndarray:
    """Token-axis mean of an N x D array, summed in row order."""
    x = as_matrix(x, "mean_pool input")
    if x.shape[0] == 0:
        raise ContractViolation("mean_pool needs at least one row")
    return seqsum(x, axis=0) / x.shape[0]


def pca_embed(x, k: int, tol: float = 1e-10, max_iter: int = 10_000):
    """Top-``k`` principal axes by power iteration with deflation.

    Returns ``(components k x d, projected n x k, explained_variance k)``.
    Variances are of the centered data (denominator n - 1); eigenvalues
    below ``1e-12 * trace`` are reported as exactly 0.
    """
    x = as_matrix(x, "pca input")
    n, d = x.shape
    if n < 2:
        raise ContractViolation(f"pca_embed needs n >= 2 rows, got {n}")
    if not 1 <= k <= min(n, d):
        raise ContractViolation(f"pca_embed k={k} must be in [1, min(n, d)={min(n, d)}]")
    xc = x - mean_pool(x)[None, :]
    cov = matmul(xc.T, xc) / (n - 1)
    floor = 1e-12 * max(float(np.trace(cov)), np.finfo(float).tiny)

    rng = Rng(0)
    comps: list[np.ndarray] = []
    variances: list[float] = []
    resid = cov.copy()
    for _ in range(k):
        v = _orthonormalize(rng.normal(d), comps)
        if v is None:
            v = _basis_fallback(d, comps)
        for _ in range(max_iter):
            w = matmul(resid, v[:, None])[:, 0]
            w = _orthonormalize(w, comps, floor=floor)
            if w is None:
                break
            delta = norm(w - v)
            v = w
            if delta < tol:
                break
        lam = dot(v, matmul(resid, v[:, None])[:, 0])
        if lam < floor:
            lam = 0.0
        # sign: largest-magnitude entry positive
        if v[int(np.argmax(np.abs(v)))] < 0:
            v = -v
        comps.append(v)
        variances.append(lam)
        resid = resid - lam * np.outer(v, v)

    components = np.vstack(comps)
    projected = matmul(xc, components.T)
    return components, projected, np.asarray(variances)


def _orthonormalize(w, basis, floor: float = 0.0):
    w = np.asarray(w, dtype=np.float64).copy()
    for _ in range(2):
        for c in basis:
            w = w - dot(w, c) * c
    nw = norm(w)
    if nw <= floor or nw == 0.0:
        return None
    return w / nw


def _basis_fallback(d, basis):
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        v = _orthonormalize(e, basis)
        if v is not None:
            return v
    raise ContractViolation("no orthogonal direction left")


# --- EVMF binary tensor files -------------------------------------------------

EVMF_MAGIC = b"EVMF"
EVMF_VERSION = 1


def dump_evmf(array) -> bytes:
    a = np.ascontiguousarray(array, dtype="<f8")
    head = EVMF_MAGIC + struct.pack("<II", EVMF_VERSION, a.ndim)
    head += struct.pack(f"<{a.ndim}Q", *a.shape)
    return head + a.tobytes(order="C")


def read_evmf_stream(fh: BinaryIO) -> np.ndarray:
    magic = fh.read(4)
    if magic != EVMF_MAGIC:
        raise FormatError(f"bad EVMF magic {magic!r}")
    hdr = fh.read(8)
    if len(hdr) != 8:
        raise FormatError("truncated EVMF header")
    version, rank = struct.unpack("<II", hdr)
    if version != EVMF_VERSION:
        raise FormatError(f"unsupported EVMF version {version}")
    raw = fh.read(8 * rank)
    if len(raw) != 8 * rank:
        raise FormatError("truncated EVMF dims")
    shape = struct.unpack(f"<{rank}Q", raw)
    count = int(np.prod(shape)) if rank else 1
    body = fh.read(8 * count)
    if len(body) != 8 * count:
        raise FormatError(f"truncated EVMF body: want {count} values")
    return np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(shape)


def load_evmf(data: bytes) -> np.ndarray:
    buf = io.BytesIO(data)
    arr = read_evmf_stream(buf)
    if buf.read(1):
        raise FormatError("trailing bytes after EVMF tensor")
    return arr


def write_evmf(path, array) -> None:
    Path(path).write_bytes(dump_evmf(array))


def read_evmf(path) -> np.ndarray:
    return load_evmf(Path(path).read_bytes())
