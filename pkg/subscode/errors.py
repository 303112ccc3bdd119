"""
exception types shared by the pipeline stages
"""
from typing import Optional


class SubscodeError(Exception):
    """base class for pipeline errors"""


class ConfigError(ValueError):
    """invalid configuration value, always names the offending key"""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class FormatError(SubscodeError):
    """malformed artifact file"""

    def __init__(self, path: str, line: Optional[int], message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")
