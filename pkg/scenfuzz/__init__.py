"""
scenfuzz
Falsification of driving controllers over probabilistic scenario programs:
- a small scenario language with parallel, sequential and opportunistic composition
- random, Halton and multi-armed bandit samplers over the semantic feature space
- a 2D kinematic simulator with a baseline autopilot or an external SUT
- robustness monitors, epsilon-coverage and a resumable error table
"""

# Version info
__version__ = "1.0.0"

default_app_config = "scenfuzz.apps.ScenfuzzConfig"

__all__ = [
    "__version__",
]
