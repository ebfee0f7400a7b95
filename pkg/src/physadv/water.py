"""Flow-meter inequality constraints of a six-stage water treatment plant.

Seven flow transmitters obey

    FIT301 <= FIT201
    |FIT401 - FIT501| <= 0.0403
    |(FIT502 + FIT503) - (FIT501 + FIT504)| <= 0.153

Records have the 25 analog sensors of the plant in the order of
``SENSORS``. Values are synthetic draws from per-sensor Gaussian profiles;
only the flow columns carry constraints.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import constraints as cons
from .constraints import ConstraintSet
from .errors import GenerationStall, InvalidCase
from .nn import LabeledDataset

SENSORS = (
    "FIT101", "LIT101", "AIT201", "AIT202", "AIT203", "FIT201", "DPIT301", "FIT301",
    "LIT301", "AIT401", "AIT402", "FIT401", "LIT401", "AIT501", "AIT502", "AIT503",
    "AIT504", "FIT501", "FIT502", "FIT503", "FIT504", "PIT501", "PIT502", "PIT503",
    "FIT601",
)  # fmt: skip
FITS = ("FIT201", "FIT301", "FIT401", "FIT501", "FIT502", "FIT503", "FIT504")
FIT_INDEX = tuple(SENSORS.index(f) for f in FITS)

EPS1 = 0.0403
EPS2 = 0.153
SWAT_PHI = np.array(
    [
        [-1, 1, 0, 0, 0, 0, 0],
        [0, 0, 1, -1, 0, 0, 0],
        [0, 0, -1, 1, 0, 0, 0],
        [0, 0, 0, -1, 1, 1, -1],
        [0, 0, 0, 1, -1, -1, 1],
    ],
    dtype=np.float64,
)
SWAT_TILDE = np.array([0.0, EPS1, EPS1, EPS2, EPS2])

# compromised flow meters (positions in FITS) and constraint rows per case
CASES = {
    2: ((0, 1), (0,)),
    5: ((2, 3, 4, 5, 6), (1, 2, 3, 4)),
    7: (tuple(range(7)), tuple(range(5))),
}

# (mean, std) per sensor, loosely shaped on steady-state plant readings
PROFILE = {
    "FIT101": (2.55, 0.03), "LIT101": (600.0, 8.0), "AIT201": (260.0, 2.5),
    "AIT202": (8.40, 0.05), "AIT203": (330.0, 4.0), "FIT201": (2.45, 0.01),
    "DPIT301": (20.0, 0.3), "FIT301": (2.24, 0.01), "LIT301": (900.0, 10.0),
    "AIT401": (150.0, 1.5), "AIT402": (155.0, 1.5), "FIT401": (1.71, 0.01),
    "LIT401": (880.0, 10.0), "AIT501": (7.80, 0.05), "AIT502": (140.0, 1.5),
    "AIT503": (260.0, 2.5), "AIT504": (12.0, 0.2), "FIT501": (1.71, 0.01),
    "FIT502": (1.29, 0.01), "FIT503": (0.735, 0.01), "FIT504": (0.315, 0.01),
    "PIT501": (250.0, 2.5), "PIT502": (1.20, 0.02), "PIT503": (190.0, 2.0),
    "FIT601": (0.05, 0.005),
}  # fmt: skip


def swat_constraints() -> ConstraintSet:
    """The 5x7 inequality system over the flow meters, indexed into the 25-sensor record."""
    return ConstraintSet(SWAT_PHI, SWAT_TILDE, cons.INEQUALITY, FIT_INDEX)


def scenario_constraints(case: int) -> ConstraintSet:
    if case not in CASES:
        raise InvalidCase(f"case must be one of {sorted(CASES)}, got {case}")
    cols, rows = CASES[case]
    phi = SWAT_PHI[np.ix_(rows, cols)]
    return ConstraintSet(phi, SWAT_TILDE[list(rows)], cons.INEQUALITY, [FIT_INDEX[c] for c in cols])


def satisfies_all(records: np.ndarray) -> np.ndarray:
    """Boolean mask of records whose flow columns meet every constraint."""
    fit = np.atleast_2d(records)[:, list(FIT_INDEX)]
    return np.all(fit @ SWAT_PHI.T <= SWAT_TILDE, axis=1)


@dataclass(frozen=True)
class WaterParams:
    noise_fraction: float = 0.10  # anomaly noise std as a fraction of the sensor mean
    max_retries: int = 10_000


def _means_stds():
    means = np.array([PROFILE[s][0] for s in SENSORS])
    stds = np.array([PROFILE[s][1] for s in SENSORS])
    return means, stds


def normal_records(count: int, rng, params: WaterParams = WaterParams()) -> np.ndarray:
    means, stds = _means_stds()
    out = np.empty((0, len(SENSORS)))
    tries = 0
    while out.shape[0] < count:
        draw = means + stds * rng.standard_normal((2 * count, len(SENSORS)))
        out = np.vstack([out, draw[satisfies_all(draw)]])
        tries += 1
        if tries > 100:
            raise GenerationStall("normal profile rarely satisfies the flow constraints")
    return out[:count]


def _noise(rng, count: int, cols, params: WaterParams) -> np.ndarray:
    means, _ = _means_stds()
    idx = [FIT_INDEX[c] for c in cols]
    noise = np.zeros((count, len(SENSORS)))
    noise[:, idx] = params.noise_fraction * np.abs(means[idx]) * rng.standard_normal((count, len(idx)))
    return noise


def polluted_training_set(count: int, rng, params: WaterParams = WaterParams()):
    """Half clean, half noisy records; noisy flows may break the constraints."""
    clean = normal_records(count, rng, params)
    n_bad = count // 2
    which = rng.choice(sorted(CASES), size=n_bad)
    for case in CASES:
        rows = np.flatnonzero(which == case)
        clean[rows] += _noise(rng, rows.size, CASES[case][0], params)
    labels = np.r_[np.ones(n_bad, dtype=int), np.zeros(count - n_bad, dtype=int)]
    order = rng.permutation(count)
    normals = clean[n_bad:]
    return LabeledDataset(clean[order], labels[order]), normals


@dataclass
class WaterTestSet:
    """Anomalous records for one case whose noisy flows still meet every constraint."""

    case: int
    constraint: ConstraintSet
    clean: np.ndarray
    features: np.ndarray

    @property
    def compromised(self) -> list[int]:
        return list(self.constraint.compromised)

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass
class WaterData:
    defender: LabeledDataset
    attacker: LabeledDataset
    attacker_normals: np.ndarray
    tests: dict[int, WaterTestSet] = field(default_factory=dict)


def constrained_anomalies(case: int, clean: np.ndarray, rng, params: WaterParams = WaterParams()):
    """Add noise to the case's flow meters, redrawing until the record stays feasible."""
    cols = CASES[case][0]
    out = clean.copy()
    for i in range(clean.shape[0]):
        for _ in range(params.max_retries):
            cand = clean[i] + _noise(rng, 1, cols, params)[0]
            if satisfies_all(cand)[0]:
                out[i] = cand
                break
        else:
            raise GenerationStall(f"case {case}: no feasible noise after {params.max_retries} draws")
    return out


def synthesize_water_dataset(count: int, seed: int, cases=(2, 5, 7), test_size: int = 200,
                             params: WaterParams = WaterParams()) -> WaterData:
    ss = np.random.SeedSequence(seed)
    s_def, s_att, s_case = ss.spawn(3)
    defender, _ = polluted_training_set(count, np.random.default_rng(s_def), params)
    attacker, normals = polluted_training_set(count, np.random.default_rng(s_att), params)
    out = WaterData(defender, attacker, normals)
    for case, s in zip(cases, s_case.spawn(len(cases))):
        rng = np.random.default_rng(s)
        clean = normal_records(test_size, rng, params)
        out.tests[case] = WaterTestSet(case, scenario_constraints(case), clean,
                                       constrained_anomalies(case, clean, rng, params))
    return out


def header_comment() -> str:
    pos = ", ".join(f"{f}@{i}" for f, i in zip(FITS, FIT_INDEX))
    return f"flow meter columns: {pos}"
