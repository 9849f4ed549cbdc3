from app.models.query import PERCENT, QMARK, STAR, Bit, Wildcard
from app.models.version import Version, VersionCompare

__all__ = [
    "STAR",
    "QMARK",
    "PERCENT",
    "Bit",
    "Wildcard",
    "Version",
    "VersionCompare",
]
