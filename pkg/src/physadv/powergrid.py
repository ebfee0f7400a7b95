"""DC state estimation, residual bad-data detection and false data injection.

The bundled grid is a small synthetic system (7 buses, bus 0 as angle
reference, 12 branches) whose measurement matrix rows are branch incidence
vectors. Larger systems can be loaded from a CSV measurement matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import constraints as cons
from . import linalg
from .constraints import ConstraintSet
from .errors import DegenerateConstraint, DimensionMismatch, RankDeficientH, SingularSystem
from .nn import LabeledDataset

BUNDLED_SEED = 39
BUNDLED_BUSES = 7
BUNDLED_BRANCHES = 12


@dataclass(frozen=True, eq=False)
class GridSystem:
    h: np.ndarray
    w: np.ndarray
    tau: float = np.inf

    def __post_init__(self):
        h = linalg.as_matrix(self.h)
        m, n = h.shape
        if m <= n or linalg.rank(h) < n:
            raise RankDeficientH(f"H must be tall with full column rank, got {m}x{n}")
        w = np.eye(m) if self.w is None else linalg.as_matrix(self.w)
        if w.shape != (m, m):
            raise DimensionMismatch("W must be m x m")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "w", w)

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def n(self) -> int:
        return self.h.shape[1]


@dataclass(frozen=True)
class PowerProfile:
    """Distribution of clean and attacked measurements on a grid.

    States are Gaussian around ``operating_point``; meters add Gaussian noise.
    Injections ``a = H c`` are scaled to ``attack_factor`` times the norm of
    the nominal flows, jittered by ``attack_jitter``.
    """

    operating_point: np.ndarray
    state_std: float = 1.0
    noise_std: float = 0.2
    attack_factor: float = 0.3
    attack_jitter: float = 0.1


def _incidence(n_bus: int, n_branch: int, rng) -> np.ndarray:
    order = rng.permutation(n_bus)
    edges = [(int(order[rng.integers(i)]), int(order[i])) for i in range(1, n_bus)]
    candidates = [(i, j) for i in range(n_bus) for j in range(i + 1, n_bus)]
    present = {tuple(sorted(e)) for e in edges}
    rest = [e for e in candidates if e not in present]
    extra = rng.choice(len(rest), size=n_branch - len(edges), replace=False)
    edges += [rest[k] for k in sorted(extra)]
    h = np.zeros((n_branch, n_bus - 1))
    for row, (i, j) in enumerate(edges):
        if i > 0:
            h[row, i - 1] = 1.0
        if j > 0:
            h[row, j - 1] = -1.0
    return h


def bundled_grid() -> GridSystem:
    """12-branch, 6-state grid with tau calibrated on the default profile."""
    rng = np.random.default_rng(BUNDLED_SEED)
    h = _incidence(BUNDLED_BUSES, BUNDLED_BRANCHES, rng)
    g = GridSystem(h, None)
    return calibrate_tau(g, default_profile(g), seed=BUNDLED_SEED)


def default_profile(g: GridSystem) -> PowerProfile:
    rng = np.random.default_rng([BUNDLED_SEED, g.m, g.n])
    return PowerProfile(operating_point=rng.uniform(-30.0, 30.0, size=g.n))


def load_grid(path, tau: float | None = None) -> GridSystem:
    """Grid from a CSV measurement matrix; tau is calibrated when not given."""
    g = GridSystem(linalg.read_matrix_csv(path), None)
    if tau is None:
        return calibrate_tau(g, default_profile(g), seed=BUNDLED_SEED)
    return replace(g, tau=float(tau))


def save_grid(g: GridSystem, path) -> None:
    linalg.write_matrix_csv(path, g.h)


def estimate_state(g: GridSystem, z) -> np.ndarray:
    return linalg.least_squares(g.h, g.w, z)


def residual_norm(g: GridSystem, z) -> float:
    z = np.asarray(z, dtype=np.float64)
    return float(np.linalg.norm(z - g.h @ estimate_state(g, z)))


def detect_bad(g: GridSystem, z) -> bool:
    return residual_norm(g, z) > g.tau


def fdia_b(g: GridSystem) -> np.ndarray:
    """``H (H^T H)^-1 H^T - I``; any ``a`` with ``B a = 0`` lies in the range of H."""
    gram = g.h.T @ g.h
    if linalg.rank(gram) < g.n:
        raise SingularSystem("H^T H is singular")
    return g.h @ np.linalg.solve(gram, g.h.T) - np.eye(g.m)


def make_fdia_vector(g: GridSystem, c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (g.n,):
        raise DimensionMismatch(f"state offset must have length {g.n}")
    return g.h @ c


def fdia_constraint(g: GridSystem, compromised) -> ConstraintSet:
    """Equality set ``B[:, C] v_C = 0`` for perturbations supported on C."""
    comp = sorted(int(i) for i in compromised)
    cs = ConstraintSet(fdia_b(g)[:, comp], np.zeros(g.m), cons.EQUALITY, comp)
    if cs.rank >= len(comp):
        raise DegenerateConstraint(
            f"compromising {len(comp)} meters leaves no stealthy direction (rank {cs.rank})"
        )
    return cs


def calibrate_tau(g: GridSystem, profile: PowerProfile, seed: int, count: int = 2000,
                  quantile: float = 99.0) -> GridSystem:
    """Set tau to a percentile of clean residual norms."""
    z = clean_measurements(g, profile, count, np.random.default_rng([seed, 7]))
    res = [residual_norm(g, zi) for zi in z]
    return replace(g, tau=float(np.percentile(res, quantile)))


def clean_measurements(g: GridSystem, profile: PowerProfile, count: int, rng) -> np.ndarray:
    x = profile.operating_point + profile.state_std * rng.standard_normal((count, g.n))
    return x @ g.h.T + profile.noise_std * rng.standard_normal((count, g.m))


def _scale_to(a: np.ndarray, target: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    return a * (target[:, None] / np.where(norms > 0, norms, 1.0))


def random_injections(g: GridSystem, profile: PowerProfile, count: int, rng,
                      basis: np.ndarray | None = None) -> np.ndarray:
    """Injections ``a = H c`` (or combinations of ``basis`` columns) at attack magnitude."""
    nominal = float(np.linalg.norm(g.h @ profile.operating_point))
    target = profile.attack_factor * nominal * (1.0 + profile.attack_jitter * rng.standard_normal(count))
    target = np.abs(target)
    if basis is None:
        a = rng.standard_normal((count, g.n)) @ g.h.T
    else:
        a = rng.standard_normal((count, basis.shape[1])) @ basis.T
    return _scale_to(a, target)


@dataclass
class FdiaTestSet:
    """Attack-only measurements for one compromised set.

    ``clean`` are the pre-attack readings, ``injection`` the FDIA vectors
    (supported on the compromised meters), and ``features = clean + injection``.
    """

    compromised: list[int]
    constraint: ConstraintSet
    clean: np.ndarray
    injection: np.ndarray

    @property
    def features(self) -> np.ndarray:
        return self.clean + self.injection

    def __len__(self) -> int:
        return self.clean.shape[0]


@dataclass
class FdiaData:
    defender: LabeledDataset
    attacker: LabeledDataset
    attacker_normals: np.ndarray
    tests: dict[int, FdiaTestSet] = field(default_factory=dict)


def choose_compromised(g: GridSystem, size: int, rng, attempts: int = 200) -> list[int]:
    """Random meter set of the given size that admits a stealthy perturbation."""
    for _ in range(attempts):
        comp = sorted(rng.choice(g.m, size=size, replace=False).tolist())
        try:
            fdia_constraint(g, comp)
        except DegenerateConstraint:
            continue
        return comp
    raise DegenerateConstraint(f"no compromised set of size {size} admits a stealthy perturbation")


def _labeled(g, profile, count, rng) -> tuple[LabeledDataset, np.ndarray]:
    n_attack = count // 2
    z = clean_measurements(g, profile, count, rng)
    a = random_injections(g, profile, n_attack, rng)
    z[:n_attack] += a
    labels = np.r_[np.ones(n_attack, dtype=int), np.zeros(count - n_attack, dtype=int)]
    order = rng.permutation(count)
    return LabeledDataset(z[order], labels[order]), z[n_attack:]


def synthesize_fdia_dataset(g: GridSystem, count: int, profile: PowerProfile, seed: int,
                            cases=(8, 9, 10), test_size: int = 200) -> FdiaData:
    """Defender and attacker training sets plus per-case FDIA-only test sets.

    Each training set is half clean, half injected. Test readings are clean
    measurements that pass the residual detector, each with an injection
    drawn from the stealthy subspace of a seeded compromised set.
    """
    ss = np.random.SeedSequence(seed)
    s_def, s_att, s_case = ss.spawn(3)
    defender, _ = _labeled(g, profile, count, np.random.default_rng(s_def))
    attacker, normals = _labeled(g, profile, count, np.random.default_rng(s_att))
    out = FdiaData(defender, attacker, normals)
    for size, s in zip(cases, s_case.spawn(len(cases))):
        rng = np.random.default_rng(s)
        comp = choose_compromised(g, size, rng)
        cs = fdia_constraint(g, comp)
        basis = np.zeros((g.m, len(cs.decomposition.independent)))
        basis[comp] = cs.decomposition.basis()
        clean = []
        while len(clean) < test_size:
            z = clean_measurements(g, profile, test_size, rng)
            clean.extend(zi for zi in z if not detect_bad(g, zi))
        clean = np.array(clean[:test_size])
        inj = random_injections(g, profile, test_size, rng, basis=basis)
        out.tests[size] = FdiaTestSet(comp, cs, clean, inj)
    return out
