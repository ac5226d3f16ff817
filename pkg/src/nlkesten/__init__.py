"""Non-linear Kesten process toolkit.

Simulation of household wealth under the recursion W' = W + alpha * W**gamma + S
with heavy-tailed returns, plus the estimation pipeline that parametrises it
from survey and rich-list data, inequality and tail analytics, and numerical
checks of the model's asymptotic behaviour.
"""
from nlkesten import errors
from nlkesten.rng import RngStream

__version__ = "0.1.0"

__all__ = ["errors", "RngStream", "__version__"]
