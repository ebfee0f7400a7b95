"""Adversarial measurements that respect the linear physics of a cyber-physical system."""
from . import attack, constraints, linalg, nn, powergrid, water
from .attack import AttackConfig, AttackResult, constrained_attack, gen_eq_per, gen_iq_per, supreme_attack, uni_adv_measur
from .constraints import ConstraintSet
from .errors import PhysAdvError
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "attack", "constraints", "linalg", "nn", "powergrid", "water",
    "AttackConfig", "AttackResult", "ConstraintSet", "PhysAdvError", "BACKEND",
    "constrained_attack", "gen_eq_per", "gen_iq_per", "supreme_attack", "uni_adv_measur",
]  # fmt: skip
