"""Exception types shared across modules, mapped to CLI exit codes."""

__all__ = ["ScenarioError", "DataError", "CalibrationError"]


class ScenarioError(ValueError):
    """Invalid or inconsistent scenario configuration (exit code 2)."""


class DataError(ValueError):
    """Malformed or incomplete input data table (exit code 3)."""


class CalibrationError(RuntimeError):
    """Calibration targets are infeasible or underdetermined (exit code 4)."""
