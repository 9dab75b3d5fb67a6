"""PAC-Bayes certificates with data-dependent priors, plus an exact
verification harness for small finite worlds and least-squares problems."""

__version__ = "0.1.0"

from .errors import InapplicableBoundError, ParameterError
from .certificate import Certificate

__all__ = [
    "__version__",
    "Certificate",
    "InapplicableBoundError",
    "ParameterError",
]
