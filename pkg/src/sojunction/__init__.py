"""
Exact many-particle and mean-field dynamics of a non-Hermitian
spin-orbit-coupled bosonic Josephson junction.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("so-junction")
except PackageNotFoundError:  # pragma: no cover - fallback during local dev
    __version__ = "0.0.0"


__all__ = ["__version__"]
