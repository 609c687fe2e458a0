from ._cfnoma import *  # noqa: F401,F403
