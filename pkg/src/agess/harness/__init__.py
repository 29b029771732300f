"""Experiment harness: configs, presets, the multi-chain runner and the CLI."""

from .config import (
    Arm,
    BuiltTarget,
    ExperimentConfig,
    build_target,
    chain_seed,
    config_from_dict,
    load_config,
    splitmix64,
)
from .presets import PRESETS, preset
from .runner import ExperimentResult, diagnose_traces, read_trace_csv, run_chain, run_experiment, write_trace_csv

__all__ = [
    "Arm", "BuiltTarget", "ExperimentConfig", "ExperimentResult", "PRESETS", "build_target", "chain_seed",
    "config_from_dict", "diagnose_traces", "load_config", "preset", "read_trace_csv", "run_chain",
    "run_experiment", "splitmix64", "write_trace_csv",
]
