"""Scenario configuration and its JSON form."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..attack import AttackConfig
from ..errors import InvalidCase, InvalidSpec, MalformedFile

DOMAINS = ("power", "water")
SCENARIOS = ("supreme", "white-box", "gray-box1", "gray-box2", "black-box")
UNIVERSAL = ("gray-box2", "black-box")
SURROGATE = ("gray-box1", "black-box")
POWER_CASES = (8, 9, 10)
WATER_CASES = (2, 5, 7)

# desk-scale attack defaults; power size is in the desk grid's measurement units
ATTACK_DEFAULTS = {
    "power": dict(step=40, size=1.0, lambda_threshold=0.1, max_itera=3, sample_count=10),
    "water": dict(step=50, size=0.06, lambda_threshold=0.1, max_itera=3, sample_count=10),
}


@dataclass(frozen=True)
class TrainSettings:
    learning_rate: float
    batch_size: int
    epochs: int
    patience: int
    standardize: bool


TRAIN_DEFAULTS = {
    "power": TrainSettings(0.05, 32, 100, 10, True),
    "water": TrainSettings(0.05, 32, 100, 10, True),
}


@dataclass(frozen=True)
class ScenarioConfig:
    domain: str = "power"
    case: int = 8
    scenario: str = "white-box"
    attack: AttackConfig = field(default_factory=AttackConfig)
    lambda_grid: tuple[float, ...] | None = None
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    records: int = 3000  # per training set (defender and attacker each)
    test_size: int = 100
    deadline_ms: float = 2000.0
    grid: str | None = None  # CSV measurement matrix; bundled grid when None
    train: TrainSettings | None = None

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise InvalidSpec(f"domain must be one of {DOMAINS}")
        if self.scenario not in SCENARIOS:
            raise InvalidSpec(f"scenario must be one of {SCENARIOS}")
        if self.domain == "water" and self.case not in WATER_CASES:
            raise InvalidCase(f"water case must be one of {WATER_CASES}")
        if self.domain == "power" and self.case < 1:
            raise InvalidCase("power case is a positive compromised-set size")
        if not self.seeds:
            raise InvalidSpec("at least one seed is needed")
        if self.records < 20 or self.test_size < 1:
            raise InvalidSpec("records must be >= 20 and test_size >= 1")
        if self.lambda_grid is not None and any(not 0 < x <= 1 for x in self.lambda_grid):
            raise InvalidSpec("lambda grid values must lie in (0, 1]")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.lambda_grid is not None:
            object.__setattr__(self, "lambda_grid", tuple(float(x) for x in self.lambda_grid))
        if self.train is None:
            object.__setattr__(self, "train", TRAIN_DEFAULTS[self.domain])

    @classmethod
    def for_domain(cls, domain: str, **kw) -> "ScenarioConfig":
        """Config with the domain's attack defaults; ``attack`` entries in kw override them."""
        attack = dict(ATTACK_DEFAULTS.get(domain, {}))
        attack.update(kw.pop("attack", {}) or {})
        kw.setdefault("case", 8 if domain == "power" else 2)
        return cls(domain=domain, attack=AttackConfig(**attack), **kw)

    def with_lambda(self, lam: float) -> "ScenarioConfig":
        return replace(self, attack=replace(self.attack, lambda_threshold=float(lam)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["lambda_grid"] = None if self.lambda_grid is None else list(self.lambda_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InvalidSpec(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        domain = d.get("domain", "power")
        attack = d.pop("attack", None) or {}
        train = d.pop("train", None)
        if train is not None:
            d["train"] = TrainSettings(**train)
        for key in ("seeds", "lambda_grid"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls.for_domain(domain, attack=attack, **{k: v for k, v in d.items() if k != "domain"})


def load_config(path) -> ScenarioConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise MalformedFile(f"{path}: top level must be an object")
    try:
        return ScenarioConfig.from_dict(raw)
    except TypeError as exc:
        raise InvalidSpec(str(exc)) from None


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
