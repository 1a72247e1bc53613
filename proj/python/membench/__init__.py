from ._membench import *  # noqa: F401,F403
from ._membench import __version__  # noqa: F401
