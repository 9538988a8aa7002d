"""Discrete-event simulator for WDM all-optical networks that reserve a subset
of wavelengths for electronically processed control traffic and route the
remaining wavelengths optically."""

from wdmsim.errors import ConfigError, InvariantViolation, WdmSimError
from wdmsim.topology import NetworkGraph, build_graph, builtin_topology
from wdmsim.simkernel import Mode, SimConfig, TimingConfig, run
from wdmsim.workload import BaselineConfig, WorkloadSpec, generate
from wdmsim.metrics import Metrics

__all__ = [
    "BaselineConfig",
    "ConfigError",
    "InvariantViolation",
    "Metrics",
    "Mode",
    "NetworkGraph",
    "SimConfig",
    "TimingConfig",
    "WdmSimError",
    "WorkloadSpec",
    "build_graph",
    "builtin_topology",
    "generate",
    "run",
]

__version__ = "0.1.0"
