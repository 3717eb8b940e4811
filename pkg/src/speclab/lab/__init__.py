"""Experiment orchestration: configuration, acceptance checks and the ``lab`` command."""
from .checks import CHECKS, CheckResult, Context, run_checks

__all__ = ["CHECKS", "CheckResult", "Context", "run_checks"]
