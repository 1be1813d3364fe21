"""Discrete-event simulation of SBP networks."""

from .engine import (Estimate, ExperimentResult, ReplicationStats, SimConfig,
                     run_experiment, simulate_replication)
from .kernels import AVAILABLE as KERNELS, DEFAULT as DEFAULT_KERNEL

__all__ = ["Estimate", "ExperimentResult", "ReplicationStats", "SimConfig",
           "run_experiment", "simulate_replication", "KERNELS", "DEFAULT_KERNEL"]
