"""Dense linear algebra kernels: row restriction, QR least squares, projection.

Index sets are numpy integer arrays holding 0-based, strictly increasing
coordinates. Only the text interfaces (CSV files, CLI) use 1-based indices;
see :func:`to_one_based` / :func:`from_one_based`.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy.linalg import qr, solve_triangular

from .errors import DomainError, RankDeficientError, ZeroVectorError

RANK_TOL = 1e-10


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a finite 2-D float array, raising DomainError otherwise."""
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DomainError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    return m


def as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 2 and 1 in v.shape:
        v = v.ravel()
    if v.ndim != 1 or v.size < 1:
        raise DomainError(f"expected a non-empty vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError("vector has non-finite entries")
    return v


def as_index_set(idx, dim: int) -> np.ndarray:
    """Validate a 0-based index set against ambient dimension ``dim``."""
    out = np.asarray(idx, dtype=np.intp).ravel()
    if out.size == 0:
        raise DomainError("index set is empty")
    if out.size > 1 and np.any(np.diff(out) <= 0):
        raise DomainError("index set must be strictly increasing")
    if out[0] < 0 or out[-1] >= dim:
        raise DomainError(f"index out of range for dimension {dim}")
    return out


def to_one_based(idx) -> list[int]:
    return [int(i) + 1 for i in idx]


def from_one_based(idx) -> np.ndarray:
    return np.asarray([int(i) - 1 for i in idx], dtype=np.intp)


def complement(idx, dim: int) -> np.ndarray:
    mask = np.ones(dim, dtype=bool)
    mask[np.asarray(idx, dtype=np.intp)] = False
    return np.flatnonzero(mask)


def restrict_rows(m, idx) -> np.ndarray:
    """Rows of ``m`` selected by the 0-based index set ``idx``."""
    m = as_matrix(m)
    return m[as_index_set(idx, m.shape[0])]


def restrict(v, idx) -> np.ndarray:
    v = as_vector(v)
    return v[as_index_set(idx, v.size)]


def _factor(a: np.ndarray):
    q, rr, piv = qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(rr))
    cutoff = RANK_TOL * diag[0] if diag.size else 0.0
    rank = int(np.count_nonzero(diag > cutoff))
    if diag.size == 0 or diag[0] == 0.0:
        rank = 0
    return q, rr, piv, rank


def least_squares(a, b) -> np.ndarray:
    """Minimize ``||a @ theta - b||`` through a column-pivoted QR factorization.

    Raises
    ------
    RankDeficientError
        If ``a`` has fewer rows than columns or its numerical rank, judged at
        ``RANK_TOL`` times the largest diagonal of R, is below ``a.shape[1]``.
    """
    a = as_matrix(a)
    b = as_vector(b)
    if a.shape[0] != b.size:
        raise DomainError(f"shape mismatch: {a.shape} vs {b.size}")
    n, r = a.shape
    if n < r:
        raise RankDeficientError(n, r)
    q, rr, piv, rank = _factor(a)
    if rank < r:
        raise RankDeficientError(rank, r)
    y = solve_triangular(rr, q.T @ b)
    theta = np.empty(r)
    theta[piv] = y
    return theta


def project_onto_subspace(u, v) -> np.ndarray:
    """Orthogonal projection of ``v`` onto the column space of ``u``."""
    u = as_matrix(u)
    return u @ least_squares(u, v)


def projection_ratio(u, v) -> float:
    """``||P_u v|| / ||v||``; raises ZeroVectorError when ``v`` is zero."""
    v = as_vector(v)
    vmax = np.max(np.abs(v)) if v.size else 0.0
    if vmax == 0.0:
        raise ZeroVectorError("projection ratio undefined for the zero vector")
    # rescale first so tiny or huge vectors keep full precision
    v = v / vmax
    return float(np.linalg.norm(project_onto_subspace(u, v)) / np.linalg.norm(v))


def read_csv_matrix(path) -> np.ndarray:
    """Read a header-less numeric CSV, one matrix row per line."""
    with open(path, newline="") as fh:
        rows = [[float(t) for t in row] for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise DomainError(f"{path}: no numeric rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DomainError(f"{path}: ragged rows")
    return as_matrix(rows)


def read_csv_vector(path) -> np.ndarray:
    """Read a vector stored either as one column or as one row."""
    m = read_csv_matrix(path)
    if m.shape[1] != 1 and m.shape[0] != 1:
        raise DomainError(f"{path}: expected a single row or column, got {m.shape}")
    return m.ravel()


def write_csv_matrix(path, m) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        for row in m:
            w.writerow([repr(float(t)) for t in row])


def write_csv_vector(path, v) -> None:
    write_csv_matrix(path, np.asarray(v, dtype=float).reshape(-1, 1))
