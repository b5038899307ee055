"""Far-field simulation and factorization-method defect reconstruction."""

from .errors import DefectScanError

__all__ = ["DefectScanError"]
__version__ = "0.1.0"
