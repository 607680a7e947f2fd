"""Neuro-symbolic search for conjunctive queries over incomplete knowledge graphs."""

try:
    from ._anycq import *  # noqa: F401,F403
    from ._anycq import __version__  # noqa: F401
except ImportError:
    # Build-tree layout: the extension sits on sys.path instead of in the package.
    from _anycq import *  # noqa: F401,F403
    from _anycq import __version__  # noqa: F401
