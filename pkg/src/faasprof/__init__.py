"""Profiling-campaign orchestrator and performance-model toolchain for serverless workflows."""

__version__ = "0.1.0"
