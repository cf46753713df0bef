"""
Invariant suites: gradient check, matrix oracle, weight sharing, hierarchies.
"""

from .suites import SUITES, CheckResult, run_suite

__all__ = ["SUITES", "CheckResult", "run_suite"]
