"""Gradient searches for adversarial measurements that respect linear constraints.

Every function takes a ``model`` exposing ``input_gradient(x, label)`` and
``predict(x)`` (single vector -> int, batch -> int array). The loss being
ascended is the model's loss for the true label ``y``.

Perturbations are full-length vectors that stay exactly zero at the
uncompromised positions. Equality searches keep ``phi @ v[C] = 0``;
inequality searches only ever return a point that satisfies every row.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import constraints as cons
from .constraints import ConstraintSet
from .errors import DegenerateConstraint, EmptyConstraint, EmptyDataset, InvalidSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttackConfig:
    step: int = 40
    size: float = 20.0
    lambda_threshold: float = 0.5
    max_itera: int = 3
    sample_count: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.step < 1:
            raise InvalidSpec("step must be at least 1")
        if self.size <= 0:
            raise InvalidSpec("size must be positive")
        if not 0 < self.lambda_threshold <= 1:
            raise InvalidSpec("lambda_threshold must lie in (0, 1]")
        if self.max_itera < 1 or self.sample_count < 1:
            raise InvalidSpec("max_itera and sample_count must be at least 1")


@dataclass
class AttackResult:
    adversarial: np.ndarray
    perturbation: np.ndarray
    succeeded: bool
    steps_used: int
    elapsed: float  # seconds


def _scaled(g: np.ndarray, ref: np.ndarray, size: float) -> np.ndarray:
    peak = float(np.max(np.abs(ref))) if ref.size else 0.0
    if peak == 0.0 or not np.isfinite(peak):
        # flat (or overflowed) loss: no direction to follow
        return np.zeros_like(g)
    # divide first so subnormal gradients cannot overflow size / peak
    return (g / peak) * size


def supreme_attack(model, m, y: int, step: int, size: float) -> AttackResult:
    """Unconstrained iterative raw-gradient attack over every feature."""
    t0 = time.perf_counter()
    m = np.asarray(m, dtype=np.float64)
    x = m.copy()
    steps = 0
    while steps < step and model.predict(x) == y:
        g = model.input_gradient(x, y)
        x = x + _scaled(g, g, size)
        steps += 1
    return AttackResult(x, x - m, model.predict(x) != y, steps, time.perf_counter() - t0)


def free_step(model, u, m, size: float, y: int) -> np.ndarray:
    """One gradient step with the uncompromised entries masked out."""
    g = model.input_gradient(np.asarray(m, dtype=np.float64), y)
    g[list(u)] = 0.0
    return _scaled(g, g, size)


def eq_one_step(model, m, size: float, cs: ConstraintSet, y: int) -> np.ndarray:
    """One gradient step whose compromised part lies in the null space of ``cs.phi``.

    The free coordinates keep their gradient values; the dependent ones are
    recomputed from them and written back before scaling.
    """
    dep = cs.decomposition
    c = list(cs.compromised)
    g = model.input_gradient(np.asarray(m, dtype=np.float64), y)
    gc = g[c]
    gc[list(dep.dependent)] = dep.dependency @ gc[list(dep.independent)]
    r = np.zeros_like(g)
    r[c] = gc
    return _scaled(r, gc, size)


def gen_eq_per(delta, model, m, step: int, size: float, cs: ConstraintSet, y: int):
    """Best-effort search under equality constraints.

    Starts from ``delta`` and accumulates constrained steps until the model
    stops predicting ``y`` or ``step`` steps are spent. Returns
    ``(v, steps_used)``.
    """
    m = np.asarray(m, dtype=np.float64)
    v = np.array(delta, dtype=np.float64, copy=True)
    n = 0
    while n < step:
        if model.predict(m + v) != y:
            break
        v += eq_one_step(model, m + v, size, cs, y)
        n += 1
    return v, n


def gen_iq_per(delta, model, u, m, step: int, size: float, cs: ConstraintSet, y: int):
    """Best-effort search under inequality constraints.

    A probe point (``pioneer``) takes a free gradient step from the last
    feasible point. When the probe breaks some rows, those rows are held as
    equalities and the step is retaken parallel to them from the feasible
    point; the held set grows until a feasible probe is found and is cleared
    after every successful move. Returns ``(v, steps_used)`` with ``v`` always
    feasible.
    """
    m = np.asarray(m, dtype=np.float64)
    c = list(cs.compromised)
    pioneer = np.array(delta, dtype=np.float64, copy=True)
    valid = pioneer.copy()
    held: list[int] = []
    subsets: dict[tuple[int, ...], ConstraintSet] = {}
    n = 0
    while n < step:
        if model.predict(m + valid) != y:
            break
        violated = cons.chk_iq(cs, (m + pioneer)[c])
        if not violated:
            valid = pioneer
            pioneer = valid + free_step(model, u, m + valid, size, y)
            held = []
        else:
            held.extend(i for i in violated if i not in held)
            key = tuple(held)
            if key not in subsets:
                subsets[key] = cons.row_subset(cs, held)
            try:
                r = eq_one_step(model, m + valid, size, subsets[key], y)
            except (DegenerateConstraint, EmptyConstraint):
                log.debug("held rows %s pin every compromised value; stopping", held)
                break
            pioneer = valid + r
        n += 1
    return valid, n


def sample_eva(model, y: int, muc, delta) -> float:
    """Fraction of ``muc + delta`` still classified as ``y``."""
    muc = np.atleast_2d(np.asarray(muc, dtype=np.float64))
    if muc.shape[0] == 0:
        raise EmptyDataset("no crafted vectors to evaluate")
    return float(np.mean(np.asarray(model.predict(muc + delta)) == y))


def constrained_attack(model, m, y: int, cs: ConstraintSet, step: int, size: float) -> AttackResult:
    """Single-sample search with the uncompromised values known."""
    t0 = time.perf_counter()
    m = np.asarray(m, dtype=np.float64)
    zero = np.zeros_like(m)
    if cs.kind == cons.EQUALITY:
        v, n = gen_eq_per(zero, model, m, step, size, cs, y)
    else:
        u = cons.complement(cs.compromised, m.shape[0])
        v, n = gen_iq_per(zero, model, u, m, step, size, cs, y)
    return AttackResult(m + v, v, model.predict(m + v) != y, n, time.perf_counter() - t0)


def uni_adv_measur(
    model, mu, m, lam: float, y: int, max_itera: int, cs: ConstraintSet, step: int, size: float
) -> AttackResult:
    """Perturbation that works across sampled guesses of the unknown readings.

    Only ``m[cs.compromised]`` is read; the rows of ``mu`` supply candidate
    values for every other position. ``succeeded`` reports whether the sample
    accuracy dropped below ``lam``; the returned example is ``m + delta``.
    """
    t0 = time.perf_counter()
    m = np.asarray(m, dtype=np.float64)
    c = list(cs.compromised)
    muc = np.array(np.atleast_2d(mu), dtype=np.float64, copy=True)
    if muc.shape[0] == 0:
        raise EmptyDataset("need at least one sampled uncompromised vector")
    muc[:, c] = m[c]
    u = cons.complement(c, m.shape[0])
    delta = np.zeros_like(m)
    steps = 0
    done = False
    for _ in range(max_itera):
        for crafted in muc:
            if cs.kind == cons.EQUALITY:
                delta, n = gen_eq_per(delta, model, crafted, step, size, cs, y)
            else:
                delta, n = gen_iq_per(delta, model, u, crafted, step, size, cs, y)
            steps += n
            if sample_eva(model, y, muc, delta) < lam:
                done = True
                break
        if done:
            break
    return AttackResult(m + delta, delta, done, steps, time.perf_counter() - t0)
