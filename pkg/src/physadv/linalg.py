"""Dense matrix helpers: row reduction, rank, null-space dependency, WLS.

Matrices are plain 2-D float64 numpy arrays. ``as_matrix`` is the single
validation point; everything downstream assumes finite float64 input.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    DegenerateConstraint,
    DimensionMismatch,
    EmptyConstraint,
    MalformedFile,
    NonFiniteEntries,
    SingularSystem,
)

PIVOT_TOL = 1e-9


def as_matrix(m) -> np.ndarray:
    a = np.array(m, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteEntries("matrix contains NaN or Inf")
    return a


def _scaled_tol(m: np.ndarray, tol: float) -> float:
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    return tol * max(1.0, scale)


def rref(m, pivot_tol: float = PIVOT_TOL) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form and pivot columns.

    ``pivot_tol`` is absolute: candidate pivots below it count as zero.
    """
    if pivot_tol <= 0:
        raise ValueError("pivot_tol must be positive")
    a = as_matrix(m)
    if a.size == 0:
        return a.copy(), []
    return kernels.rref(a, pivot_tol)


def rank(m, pivot_tol: float = PIVOT_TOL) -> int:
    a = as_matrix(m)
    if a.size == 0:
        return 0
    return len(rref(a, _scaled_tol(a, pivot_tol))[1])


@dataclass(frozen=True)
class DependencyDecomposition:
    """Split of the null space of phi into free and determined coordinates.

    Any x with ``x[dependent] = dependency @ x[independent]`` solves
    ``phi @ x = 0``.
    """

    independent: tuple[int, ...]
    dependent: tuple[int, ...]
    dependency: np.ndarray

    @property
    def ncols(self) -> int:
        return len(self.independent) + len(self.dependent)

    def complete(self, free: np.ndarray) -> np.ndarray:
        """Fill in the dependent coordinates for the given free values."""
        x = np.zeros(self.ncols)
        idx_i = list(self.independent)
        x[idx_i] = free
        x[list(self.dependent)] = self.dependency @ np.asarray(free, dtype=np.float64)
        return x

    def basis(self) -> np.ndarray:
        """Null-space basis, one column per independent coordinate."""
        k = len(self.independent)
        cols = [self.complete(np.eye(k)[j]) for j in range(k)]
        return np.column_stack(cols) if cols else np.zeros((self.ncols, 0))


def dependency(phi, pivot_tol: float = PIVOT_TOL) -> DependencyDecomposition:
    """Pivot columns become dependent, free columns independent."""
    a = as_matrix(phi)
    ncols = a.shape[1]
    reduced, pivots = rref(a, _scaled_tol(a, pivot_tol)) if a.size else (a, [])
    if not pivots:
        raise EmptyConstraint("constraint matrix has rank 0")
    if len(pivots) == ncols:
        raise DegenerateConstraint(
            f"constraint matrix has full column rank {ncols}; only the zero perturbation is valid"
        )
    pivot_set = set(pivots)
    free = [j for j in range(ncols) if j not in pivot_set]
    # pivot row p reads x[d_p] + sum_f R[p, f] x[f] = 0
    b = -reduced[: len(pivots)][:, free]
    b = np.ascontiguousarray(b)
    b.setflags(write=False)
    return DependencyDecomposition(tuple(free), tuple(pivots), b)


def least_squares(h, w, z) -> np.ndarray:
    """Weighted least squares ``(H^T W H)^-1 H^T W z`` via QR of ``sqrt(W) H``."""
    h = as_matrix(h)
    w = as_matrix(w)
    z = np.asarray(z, dtype=np.float64)
    m, n = h.shape
    if z.shape != (m,) or w.shape != (m, m):
        raise DimensionMismatch(f"H is {h.shape}, W is {w.shape}, z has {z.shape}")
    d = np.diag(w)
    if np.any(d <= 0) or np.count_nonzero(w - np.diag(d)):
        raise ValueError("W must be diagonal with positive entries")
    s = np.sqrt(d)
    q, r = np.linalg.qr(s[:, None] * h)
    diag = np.abs(np.diag(r))
    if n > m or diag.size < n or diag.min() <= 1e-12 * max(1.0, diag.max()):
        raise SingularSystem("H^T W H is rank deficient")
    return np.linalg.solve(r, q.T @ (s * z)) if n else np.zeros(0)


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for i, rec in enumerate(csv.reader(fh)):
            if not rec or all(not c.strip() for c in rec):
                continue
            if i == 0 and not _is_number(rec[0]):
                continue
            try:
                rows.append([float(c) for c in rec])
            except ValueError as exc:
                raise MalformedFile(f"{path}: line {i + 1}: {exc}") from None
    if not rows:
        raise MalformedFile(f"{path}: no numeric rows")
    if len({len(r) for r in rows}) != 1:
        raise MalformedFile(f"{path}: ragged rows")
    try:
        return as_matrix(rows)
    except NonFiniteEntries as exc:
        raise MalformedFile(f"{path}: {exc}") from None


def write_matrix_csv(path, m, header: list[str] | None = None) -> None:
    a = as_matrix(m)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        if header:
            wr.writerow(header)
        for row in a:
            wr.writerow([repr(float(v)) for v in row])


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True
