"""Linear physical constraints over the compromised measurements."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import linalg
from .errors import DimensionMismatch, IndexOutOfBounds, MalformedFile

EQ_TOL = 1e-6
SLACK_TOL = 0.0

EQUALITY = "equality"
INEQUALITY = "inequality"


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """``phi @ m[compromised] (= or <=) phi_tilde``.

    Columns of ``phi`` line up with ``compromised``, which indexes the full
    measurement vector.
    """

    phi: np.ndarray
    phi_tilde: np.ndarray
    kind: str
    compromised: tuple[int, ...]

    def __post_init__(self):
        phi = linalg.as_matrix(self.phi) if np.size(self.phi) else np.zeros((0, len(self.compromised)))
        tilde = np.asarray(self.phi_tilde, dtype=np.float64).reshape(-1)
        comp = tuple(int(c) for c in self.compromised)
        if self.kind not in (EQUALITY, INEQUALITY):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if phi.shape[1] != len(comp):
            raise DimensionMismatch(f"phi has {phi.shape[1]} columns for {len(comp)} compromised sensors")
        if tilde.shape[0] != phi.shape[0]:
            raise DimensionMismatch("phi_tilde length differs from row count of phi")
        if any(b <= a for a, b in zip(comp, comp[1:])) or any(c < 0 for c in comp):
            raise ValueError("compromised indices must be strictly increasing and non-negative")
        phi.setflags(write=False)
        tilde.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "phi_tilde", tilde)
        object.__setattr__(self, "compromised", comp)

    @property
    def n_rows(self) -> int:
        return self.phi.shape[0]

    @cached_property
    def decomposition(self) -> linalg.DependencyDecomposition:
        return linalg.dependency(self.phi)

    @cached_property
    def rank(self) -> int:
        return linalg.rank(self.phi) if self.n_rows else 0

    def residual(self, m_c) -> np.ndarray:
        m_c = np.asarray(m_c, dtype=np.float64)
        if m_c.shape != (self.phi.shape[1],):
            raise DimensionMismatch(f"expected {self.phi.shape[1]} compromised values, got {m_c.shape}")
        return self.phi @ m_c - self.phi_tilde


def subvector(values, idx) -> np.ndarray:
    """Gather ``values`` at ``idx`` in the order given."""
    values = np.asarray(values, dtype=np.float64)
    idx = [int(i) for i in idx]
    n = values.shape[0]
    bad = [i for i in idx if not 0 <= i < n]
    if bad:
        raise IndexOutOfBounds(f"indices {bad} outside [0, {n})")
    return values[idx] if idx else np.zeros(0)


def scatter(values, idx, sub) -> np.ndarray:
    """Copy of ``values`` with ``sub`` written back at ``idx``."""
    out = np.array(values, dtype=np.float64, copy=True)
    idx = [int(i) for i in idx]
    if any(not 0 <= i < out.shape[0] for i in idx):
        raise IndexOutOfBounds("scatter index out of range")
    out[idx] = sub
    return out


def complement(idx, d: int) -> list[int]:
    s = set(int(i) for i in idx)
    return [i for i in range(d) if i not in s]


def check_equality(cs: ConstraintSet, m_c, tol: float = EQ_TOL) -> list[int]:
    if cs.kind != EQUALITY:
        raise ValueError("check_equality needs an equality constraint set")
    return [int(i) for i in np.flatnonzero(np.abs(cs.residual(m_c)) > tol)]


def chk_iq(cs: ConstraintSet, m_c, slack_tol: float = SLACK_TOL) -> list[int]:
    """Indices of violated rows of ``phi @ m_c <= phi_tilde`` (boundary counts as satisfied)."""
    if cs.kind != INEQUALITY:
        raise ValueError("chk_iq needs an inequality constraint set")
    return [int(i) for i in np.flatnonzero(cs.residual(m_c) > slack_tol)]


def validate_perturbation(cs: ConstraintSet, delta_c, tol: float = EQ_TOL) -> bool:
    """A perturbation keeps an equality system satisfied iff ``phi @ delta_c = 0``."""
    if cs.kind != EQUALITY:
        raise ValueError("validate_perturbation needs an equality constraint set")
    delta_c = np.asarray(delta_c, dtype=np.float64)
    if delta_c.shape != (cs.phi.shape[1],):
        raise DimensionMismatch("perturbation length differs from column count")
    if cs.n_rows == 0:
        return True
    return bool(np.max(np.abs(cs.phi @ delta_c)) <= tol)


def row_subset(cs: ConstraintSet, rows) -> ConstraintSet:
    """Homogeneous equality set from the given rows, duplicates dropped."""
    seen: list[int] = []
    for r in rows:
        r = int(r)
        if not 0 <= r < cs.n_rows:
            raise IndexOutOfBounds(f"row {r} outside [0, {cs.n_rows})")
        if r not in seen:
            seen.append(r)
    phi = cs.phi[seen] if seen else np.zeros((0, cs.phi.shape[1]))
    return ConstraintSet(phi, cs.phi_tilde[seen], EQUALITY, cs.compromised)


def as_inequalities(cs: ConstraintSet) -> ConstraintSet:
    """Rewrite an equality system as pairs of opposing inequalities."""
    if cs.kind != EQUALITY:
        raise ValueError("already an inequality set")
    return ConstraintSet(
        np.vstack([cs.phi, -cs.phi]), np.r_[cs.phi_tilde, -cs.phi_tilde], INEQUALITY, cs.compromised
    )


def save_constraints(cs: ConstraintSet, path) -> None:
    """Matrix rows as CSV, then one sidecar line ``#phi_tilde=...;kind=...;C=...``."""
    path = Path(path)
    linalg.write_matrix_csv(path, cs.phi) if cs.n_rows else path.write_text("")
    tilde = " ".join(repr(float(v)) for v in cs.phi_tilde)
    comp = " ".join(str(c) for c in cs.compromised)
    with open(path, "a") as fh:
        fh.write(f"#phi_tilde={tilde};kind={cs.kind};C={comp}\n")


def load_constraints(path) -> ConstraintSet:
    lines = Path(path).read_text().splitlines()
    side = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    if len(side) != 1:
        raise MalformedFile(f"{path}: expected exactly one sidecar line")
    try:
        fields = dict(part.split("=", 1) for part in side[0][1:].split(";"))
        tilde = [float(v) for v in fields["phi_tilde"].split()]
        comp = [int(v) for v in fields["C"].split()]
        kind = fields["kind"].strip()
        rows = [[float(v) for v in ln.split(",")] for ln in body]
    except (KeyError, ValueError) as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    phi = np.array(rows) if rows else np.zeros((0, len(comp)))
    try:
        return ConstraintSet(phi, tilde, kind, comp)
    except ValueError as exc:
        raise MalformedFile(f"{path}: {exc}") from None
