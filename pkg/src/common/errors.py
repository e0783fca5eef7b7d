class RioError(Exception):
    """Base class for every error raised by the suite."""

    exit_code: int = 1


# Validation side: bad inputs, bad files, bad configs.

class ConfigError(RioError):
    pass

class DatasetError(RioError):
    pass

class FrameMismatchError(RioError, ValueError):
    pass

class LengthMismatchError(RioError, ValueError):
    pass

class NoSolutionError(RioError, ValueError):
    pass

class CfarWindowError(RioError, ValueError):
    pass


# Estimator side: failures while the filter or the smoother is running.

class EstimatorError(RioError):
    exit_code = 2

class NonFiniteInputError(EstimatorError):
    pass

class DegenerateGeometryError(EstimatorError):
    pass

class StaleCloneError(EstimatorError):
    pass

class SingularSystemError(EstimatorError):
    pass
