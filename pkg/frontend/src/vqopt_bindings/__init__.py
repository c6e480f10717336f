"""Scripting bindings for the vqopt optimizer suite.

Exposes ``minimize`` over a user-supplied Python callback so the optimizers
can drive objectives living in any Python-based stack, without that code
having to know the native interfaces.
"""

from .api import (
    BoundObjective,
    CallbackError,
    available_methods,
    available_problems,
    minimize,
)

__version__ = "0.1.0"

__all__ = [
    "BoundObjective",
    "CallbackError",
    "available_methods",
    "available_problems",
    "minimize",
    "__version__",
]
