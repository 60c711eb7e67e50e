__version__ = "0.1.0"

from delayfit.errors import DelayfitError

__all__ = ["DelayfitError", "__version__"]
