"""Semi-supervised in-context learning estimators, theory and experiments."""

try:
    from ._ssicl import *  # noqa: F401,F403  (installed wheel layout)
    from ._ssicl import SsiclError, __version__
except ImportError:
    from _ssicl import *  # noqa: F401,F403  (build-tree layout)
    from _ssicl import SsiclError, __version__

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
