"""Small dense-matrix helpers shared by the rest of the package.

Matrices are plain 2-D ``numpy`` float arrays; vectors are 1-D arrays.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

DEFAULT_TOL = 1e-9


class DimensionError(ValueError):
    """Raised when matrix shapes do not conform."""


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce ``M`` to a 2-D float array with at least one row and column."""
    arr = np.array(M, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    return arr


def as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.array(v, dtype=float).reshape(-1)
    if arr.size == 0:
        raise DimensionError(f"{name} must be non-empty")
    return arr


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus of a square matrix.

    Eigenvalues come from LAPACK's balanced Hessenberg-QR routine (``geev``).
    A defective eigenvalue splits into a cluster whose spread is about
    ``eps ** (1 / block size)``, but the cluster mean stays accurate to
    ``O(eps)``. Clusters of close eigenvalues with numerically parallel
    eigenvectors are therefore replaced by their mean; well-conditioned
    spectra are left untouched.
    """
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"spectral radius needs a square matrix, got {M.shape}")
    vals, vecs = np.linalg.eig(M)
    return float(np.max(np.abs(_merge_defective_clusters(vals, vecs, np.abs(M).max()))))


def _merge_defective_clusters(vals, vecs, scale, spread=1e-6, parallel=1e-6):
    n = vals.shape[0]
    if n < 2:
        return vals
    tau = spread * max(scale, 1.0)
    close = np.abs(vals[:, None] - vals[None, :]) <= tau
    # union-find over "close" pairs
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(*np.nonzero(np.triu(close, 1))):
        parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = vals.copy()
    unit = vecs / np.linalg.norm(vecs, axis=0)
    for idx in groups.values():
        if len(idx) < 2:
            continue
        G = np.abs(unit[:, idx].conj().T @ unit[:, idx])
        np.fill_diagonal(G, 0.0)
        if G.max() > 1 - parallel:
            out[idx] = vals[idx].mean()
    return out


def is_nonnegative(M, tol: float = 0.0) -> bool:
    if tol < 0:
        raise ValueError("tol must be >= 0")
    return bool(np.all(np.asarray(M, dtype=float) >= -tol))


def kron(A, B) -> np.ndarray:
    return np.kron(as_matrix(A, "A"), as_matrix(B, "B"))


def solve_linear_least_squares(A, b) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares solution of ``A x = b``.

    Uses a complete orthogonal factorization with column pivoting
    (LAPACK ``gelsy``), so rank-deficient and wide systems get the
    minimum-norm solution.

    Returns
    -------
    x : ndarray
        Solution vector of length ``A.shape[1]``.
    residual : float
        ``||A x - b||_2``.
    """
    A = as_matrix(A, "A")
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] != A.shape[0]:
        raise DimensionError(f"b has length {b.shape[0]}, expected {A.shape[0]}")
    x, *_ = scipy.linalg.lstsq(A, b, lapack_driver="gelsy")
    with np.errstate(all="ignore"):
        residual = float(np.linalg.norm(A @ x - b))
    # subnormal-scale A can defeat the relative rank cutoff
    if not residual <= np.linalg.norm(b):
        x, residual = np.zeros(A.shape[1]), float(np.linalg.norm(b))
    return x, residual
