__version__ = "0.3.1"

__all__ = [
    "__version__",
    "config",
    "domain",
    "engine",
    "summaries",
    "storage",
]
