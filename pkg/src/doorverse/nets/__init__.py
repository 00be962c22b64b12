"""Tensor/autodiff substrate and the neural building blocks."""

from .autodiff import (REGISTERED_OPS, Tensor, check_registered_ops, grad_check)  # noqa: F401
from .checkpoint import load_checkpoint, save_checkpoint  # noqa: F401
from .layers import MLP, Linear, Module, PointEncoder, point_encode  # noqa: F401
from .losses import (ACTION_DIM, CVAE, LATENT_DIM, LossWeights, cvae_loss, cvae_loss_t,  # noqa: F401
                     kl_loss, l1_loss, mse_loss, rotation_matrix_loss)
from .optim import Adam  # noqa: F401
from .rotations import matrix_to_rot6d, rot6d_to_matrix, rot6d_to_matrix_t  # noqa: F401
