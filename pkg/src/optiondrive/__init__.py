"""Safe hierarchical decision making for highway driving.

A closed-loop multi-lane highway simulator with scripted traffic, a safety
layer of state-dependent action bounds built on an emergency-braking
criterion, manoeuvre options with initiation/termination sets, and four
learning architectures over them (discrete single/combined options, a
hybrid continuous-discrete scheme, and a continuous twin-critic baseline).
"""

from .dynamics import ActionRef
from .env import EnvParams, HighwayEnv
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["ActionRef", "EnvParams", "HighwayEnv", "BACKEND", "__version__"]
