from . import tensor as ops
from .gradcheck import GradCheckReport, finite_difference_check, near_threshold
from .tensor import *  # noqa: F401,F403
from .tensor import __all__ as _tensor_all

__all__ = list(_tensor_all) + [
    "ops", "GradCheckReport", "finite_difference_check", "near_threshold",
]
