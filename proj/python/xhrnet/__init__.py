"""Lightweight pose backbone with stripe attention: python surface."""

try:
    from xhrnet._xhrnet import *  # noqa: F401,F403  (installed layout)
    from xhrnet._xhrnet import __version__  # noqa: F401
except ImportError:  # in-tree build: module sits next to the package on PYTHONPATH
    from _xhrnet import *  # noqa: F401,F403
    from _xhrnet import __version__  # noqa: F401
