"""Exception hierarchy shared by every ffqwalk module."""


class FFQWalkError(Exception):
    """Base class; ``record()`` gives the machine-readable form the CLI prints."""

    code = "error"

    def record(self) -> dict:
        rec = {"error": self.code, "type": type(self).__name__, "message": str(self)}
        rec.update(self._extra())
        return rec

    def _extra(self) -> dict:
        return {}


class ConfigurationError(FFQWalkError, ValueError):
    code = "configuration"


class UnsupportedParameterError(ConfigurationError):
    code = "unsupported_parameter"


class NumericOverflowError(FFQWalkError, ArithmeticError):
    code = "numeric_overflow"

    def __init__(self, message: str, site: int | None = None):
        super().__init__(message)
        self.site = site

    def _extra(self) -> dict:
        return {"site": self.site}


class ModelViolationError(FFQWalkError, ArithmeticError):
    """Raised when a quantity the model guarantees non-negative goes clearly negative."""

    code = "model_violation"

    def __init__(self, message: str, site: int | None = None, value: float | None = None):
        super().__init__(message)
        self.site = site
        self.value = value

    def _extra(self) -> dict:
        return {"site": self.site, "value": self.value}


class DomainError(FFQWalkError, ValueError):
    code = "domain"


class InsufficientDataError(FFQWalkError, ValueError):
    code = "insufficient_data"


class FitError(FFQWalkError, RuntimeError):
    """Fit did not converge. ``best`` holds the best-so-far parameters."""

    code = "fit_failure"

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best

    def _extra(self) -> dict:
        best = self.best
        if best is not None and hasattr(best, "as_dict"):
            best = best.as_dict()
        return {"best": best}


class CheckpointError(FFQWalkError, RuntimeError):
    code = "checkpoint"


class RunAbortedError(FFQWalkError, OSError):
    code = "run_aborted"

    def __init__(self, message: str, manifest: str | None = None):
        super().__init__(message)
        self.manifest = manifest

    def _extra(self) -> dict:
        return {"manifest": self.manifest}
