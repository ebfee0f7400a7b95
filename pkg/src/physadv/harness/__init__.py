"""Experiment runner: synthesis, training, scenario attacks and reports."""
from .config import ScenarioConfig, TrainSettings, load_config, save_config
from .report import load_report, render_table, rows_to_csv, to_json, write_report
from .runner import clear_cache, prepare, run_scenario, run_seed, sweep_cases, sweep_lambda

__all__ = [
    "ScenarioConfig", "TrainSettings", "load_config", "save_config",
    "load_report", "render_table", "rows_to_csv", "to_json", "write_report",
    "clear_cache", "prepare", "run_scenario", "run_seed", "sweep_cases", "sweep_lambda",
]  # fmt: skip
