from .errors import ConfigError, DataIOError, NumericAbortError, SSPFError
from .logger import setup_logging

__all__ = ["ConfigError", "DataIOError", "NumericAbortError", "SSPFError", "setup_logging"]
