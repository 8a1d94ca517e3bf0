"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, data/ingestion problems with 3, numeric failures with 4.
"""


class ConfigError(ValueError):
    """A run configuration is invalid or internally inconsistent."""


class DataError(ValueError):
    """A data file could not be parsed or violates the ingestion contract."""


class DivergenceError(RuntimeError):
    """A numeric integration step produced a non-finite value.

    Carries the index of the offending integrator step.
    """

    def __init__(self, step_index: int, message: str = ""):
        self.step_index = step_index
        super().__init__(message or f"non-finite gradient at leapfrog step {step_index}")
