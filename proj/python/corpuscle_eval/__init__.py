from ._corpuscle import *  # noqa: F401,F403
