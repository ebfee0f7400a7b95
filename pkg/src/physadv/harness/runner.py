"""Dataset and model preparation plus per-scenario attack runs."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .. import attack as atk
from .. import constraints as cons
from .. import nn, powergrid, water
from ..constraints import ConstraintSet
from .config import SURROGATE, UNIVERSAL, ScenarioConfig

log = logging.getLogger(__name__)

TEST_FRACTION = 0.25


@dataclass
class Bundle:
    """Everything a scenario run needs for one (domain, case, seed)."""

    domain: str
    seed: int
    data: object  # FdiaData or WaterData
    defender: nn.Network
    attacker: nn.Network
    defender_accuracy: float
    attacker_accuracy: float
    grid: powergrid.GridSystem | None = None

    @property
    def test(self):
        (ts,) = self.data.tests.values()
        return ts


_CACHE: dict[tuple, Bundle] = {}


def clear_cache() -> None:
    _CACHE.clear()


def _seeds(seed: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence([seed, 2024]).spawn(5)]


def grid_for(cfg: ScenarioConfig) -> powergrid.GridSystem:
    return powergrid.load_grid(cfg.grid) if cfg.grid else powergrid.bundled_grid()


def synthesize(cfg: ScenarioConfig, seed: int):
    if cfg.domain == "power":
        g = grid_for(cfg)
        data = powergrid.synthesize_fdia_dataset(
            g, cfg.records, powergrid.default_profile(g), seed, cases=(cfg.case,), test_size=cfg.test_size
        )
        return data, g
    data = water.synthesize_water_dataset(cfg.records, seed, cases=(cfg.case,), test_size=cfg.test_size)
    return data, None


def train_pair(cfg: ScenarioConfig, data, seed: int):
    """Defender on its own records, surrogate on the disjoint attacker records."""
    s = _seeds(seed)
    hidden = {
        "power": (nn.FDIA_DEFENDER, nn.FDIA_ATTACKER),
        "water": (nn.WATER_DEFENDER, nn.WATER_ATTACKER),
    }[cfg.domain]
    ts = cfg.train
    out = []
    for k, (layers, ds) in enumerate(zip(hidden, (data.defender, data.attacker))):
        tr, te = ds.split(1.0 - TEST_FRACTION, seed=s[k])
        net = nn.build_network(nn.mlp_spec(ds.dim, layers, seed=s[2 + k]))
        if ts.standardize:
            net = nn.standardize(net, tr.features)
        tc = nn.TrainConfig(learning_rate=ts.learning_rate, batch_size=ts.batch_size, epochs=ts.epochs,
                            seed=s[4] + k, patience=ts.patience)
        net = nn.train_sgd(net, tr, tc)
        out.append((net, nn.class_accuracy(net, te)))
    return out


def prepare(cfg: ScenarioConfig, seed: int) -> Bundle:
    key = (cfg.domain, cfg.case, seed, cfg.records, cfg.test_size, cfg.grid, cfg.train)
    if key not in _CACHE:
        data, g = synthesize(cfg, seed)
        (d, dacc), (a, aacc) = train_pair(cfg, data, seed)
        log.info("%s seed %d: defender %.3f, surrogate %.3f", cfg.domain, seed, dacc, aacc)
        _CACHE[key] = Bundle(cfg.domain, seed, data, d, a, dacc, aacc, g)
    return _CACHE[key]


def violation(cs: ConstraintSet, m: np.ndarray, adv: np.ndarray) -> bool:
    """True when ``adv`` leaves the uncompromised values or breaks ``cs``."""
    delta = adv - m
    u = cons.complement(cs.compromised, m.shape[0])
    if np.any(delta[u] != 0.0):
        return True
    c = list(cs.compromised)
    if cs.kind == cons.EQUALITY:
        return cs.n_rows > 0 and float(np.max(np.abs(cs.phi @ delta[c]))) >= cons.EQ_TOL
    return bool(cons.chk_iq(cs, adv[c]))


@dataclass
class ExampleOutcome:
    adversarial: np.ndarray
    detected: bool
    violated: bool
    stealth_broken: bool
    elapsed: float


def attack_one(cfg: ScenarioConfig, b: Bundle, i: int) -> ExampleOutcome:
    ts = b.test
    m = ts.features[i]
    cs = ts.constraint
    a = cfg.attack
    model = b.attacker if cfg.scenario in SURROGATE else b.defender
    y = 1
    if cfg.scenario == "supreme":
        res = atk.supreme_attack(model, m, y, a.step, a.size)
    elif cfg.scenario in UNIVERSAL:
        pool = b.data.attacker_normals
        rng = np.random.default_rng([b.seed, i, 1])
        mu = pool[rng.choice(pool.shape[0], size=min(a.sample_count, pool.shape[0]), replace=False)]
        res = atk.uni_adv_measur(model, mu, m, a.lambda_threshold, y, a.max_itera, cs, a.step, a.size)
    else:
        res = atk.constrained_attack(model, m, y, cs, a.step, a.size)
    adv = res.adversarial
    broken = False
    if b.domain == "power" and not powergrid.detect_bad(b.grid, m):
        broken = powergrid.detect_bad(b.grid, adv)
    return ExampleOutcome(
        adv, int(b.defender.predict(adv)) == y, violation(cs, m, adv), broken, res.elapsed
    )


def run_seed(cfg: ScenarioConfig, seed: int) -> dict:
    b = prepare(cfg, seed)
    ts = b.test
    feats = ts.features
    outs = [attack_one(cfg, b, i) for i in range(len(ts))]
    adv = np.array([o.adversarial for o in outs])
    det = np.array([o.detected for o in outs])
    times = np.array([o.elapsed * 1e3 for o in outs])
    l2 = np.linalg.norm(adv - feats, axis=1)
    rel = l2 / np.maximum(np.linalg.norm(feats, axis=1), np.finfo(float).tiny)
    evaded = ~det
    enforced = cfg.scenario != "supreme"
    violations = int(sum(o.violated for o in outs))
    return {
        "seed": seed,
        "examples": len(outs),
        "compromised": list(ts.compromised),
        "defenderCleanAccuracy": b.defender_accuracy,
        "surrogateCleanAccuracy": b.attacker_accuracy,
        "baseDetectionAccuracy": float(np.mean(b.defender.predict(feats) == 1)),
        "detectionAccuracy": float(np.mean(det)),
        "meanL2": float(np.mean(l2[evaded])) if evaded.any() else None,
        "meanRelativeL2": float(np.mean(rel[evaded])) if evaded.any() else None,
        "constraintViolations": violations if enforced else 0,
        "unenforcedViolations": 0 if enforced else violations,
        "stealthViolations": int(sum(o.stealth_broken for o in outs)) if enforced else 0,
        "meanTimeMs": float(np.mean(times)),
        "medianTimeMs": float(np.median(times)),
        "deadlineMisses": int(np.sum(times > cfg.deadline_ms)),
    }


def run_scenario(cfg: ScenarioConfig) -> dict:
    """Per-seed metrics plus medians across seeds."""
    per_seed = [run_seed(cfg, s) for s in cfg.seeds]
    return summarize(cfg, per_seed)


TIMING_KEYS = ("meanTimeMs", "medianTimeMs", "deadlineMisses")


def _median(rows, key):
    vals = [r[key] for r in rows if r[key] is not None]
    return float(np.median(vals)) if vals else None


def summarize(cfg: ScenarioConfig, per_seed: list[dict]) -> dict:
    return {
        "domain": cfg.domain,
        "case": cfg.case,
        "scenario": cfg.scenario,
        "constraintsEnforced": cfg.scenario != "supreme",
        "config": cfg.to_dict(),
        "detectionAccuracy": _median(per_seed, "detectionAccuracy"),
        "defenderCleanAccuracy": _median(per_seed, "defenderCleanAccuracy"),
        "meanL2": _median(per_seed, "meanL2"),
        "meanRelativeL2": _median(per_seed, "meanRelativeL2"),
        "meanTimeMs": _median(per_seed, "meanTimeMs"),
        "medianTimeMs": _median(per_seed, "medianTimeMs"),
        "constraintViolations": sum(r["constraintViolations"] for r in per_seed),
        "stealthViolations": sum(r["stealthViolations"] for r in per_seed),
        "deadlineMisses": sum(r["deadlineMisses"] for r in per_seed),
        "perSeed": per_seed,
    }


def sweep_lambda(cfg: ScenarioConfig, grid) -> list[dict]:
    """One row per (lambda, seed)."""
    rows = []
    for lam in grid:
        c = cfg.with_lambda(lam)
        for s in c.seeds:
            r = run_seed(c, s)
            rows.append({"lambda": float(lam), **r})
    return rows


def sweep_cases(cfg: ScenarioConfig, cases) -> list[dict]:
    rows = []
    for case in cases:
        c = replace(cfg, case=int(case))
        for s in c.seeds:
            rows.append({"case": int(case), **run_seed(c, s)})
    return rows

