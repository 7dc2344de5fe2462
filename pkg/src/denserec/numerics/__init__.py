from . import ops
from .gradcheck import finite_difference_check
from .optim import Adam, adam_step
from .tensor import Parameter, Tensor, backward, zero_grads

__all__ = ["ops", "Tensor", "Parameter", "backward", "zero_grads", "Adam", "adam_step", "finite_difference_check"]
