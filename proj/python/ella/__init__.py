try:
    from ella._ella import *  # noqa: F401,F403
except ImportError:
    from _ella import *  # noqa: F401,F403
