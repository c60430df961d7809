"""Single-scale fermionic renormalization group toolkit.

Norm-domain arithmetic, kernel seminorms, an exact Grassmann Gaussian calculus,
momentum-space propagator bounds and an insulator pipeline, driven by the
``fermirg`` command line.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, FermiRGError, NumericError, UsageError  # noqa: E402

__all__ = ["__version__", "ConfigError", "DomainError", "FermiRGError", "NumericError", "UsageError"]
