"""per-packet recurrent intrusion classifier with a learned packet sampler."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc

__doc__ = _core_doc
__version__ = "1.0.0"
