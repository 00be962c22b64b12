"""Continuous 6D rotation representation and Gram-Schmidt recovery."""
from __future__ import annotations

import numpy as np

from ..errors import DegenerateInputError
from . import autodiff as ad
from .autodiff import Tensor

DEGENERACY_TOL = 1e-6


def matrix_to_rot6d(rot: np.ndarray) -> np.ndarray:
    """First two columns of a rotation matrix, flattened to 6 values."""
    rot = np.asarray(rot, dtype=np.float64)
    return np.concatenate([rot[:, 0], rot[:, 1]])


def rot6d_to_matrix(v: np.ndarray) -> np.ndarray:
    """Gram-Schmidt a 6-vector into a rotation matrix (columns a1, a2, a1 x a2)."""
    v = np.asarray(v, dtype=np.float64).reshape(6)
    n1 = np.linalg.norm(v[:3])
    if n1 < DEGENERACY_TOL:
        raise DegenerateInputError("first triple of the 6D rotation is near zero")
    a1 = v[:3] / n1
    r = v[3:] - (a1 @ v[3:]) * a1
    n2 = np.linalg.norm(r)
    if n2 < DEGENERACY_TOL:
        raise DegenerateInputError("6D rotation triples are near parallel")
    a2 = r / n2
    a3 = np.cross(a1, a2)
    return np.column_stack([a1, a2, a3])


def _cross_t(a: Tensor, b: Tensor) -> Tensor:
    """Cross product of (..., 3) tensors via slicing."""
    ax, ay, az = a[..., 0:1], a[..., 1:2], a[..., 2:3]
    bx, by, bz = b[..., 0:1], b[..., 1:2], b[..., 2:3]
    return ad.concat([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=-1)


def rot6d_to_matrix_t(v: Tensor, eps: float = 1e-8) -> Tensor:
    """Differentiable Gram-Schmidt: (B, 6) -> (B, 3, 3), columns stacked on the last axis.

    Uses an epsilon-guarded norm so gradients stay finite; callers that need
    degeneracy REJECTION should validate with the numpy version first.
    """
    b1 = v[..., 0:3]
    b2 = v[..., 3:6]
    n1 = ad.sqrt(ad.tsum(b1 * b1, axis=-1, keepdims=True) + Tensor(np.float64(eps)))
    a1 = b1 / n1
    proj = ad.tsum(a1 * b2, axis=-1, keepdims=True)
    r = b2 - proj * a1
    n2 = ad.sqrt(ad.tsum(r * r, axis=-1, keepdims=True) + Tensor(np.float64(eps)))
    a2 = r / n2
    a3 = _cross_t(a1, a2)
    cols = ad.concat([a1, a2, a3], axis=-1)           # (..., 9) as [a1 a2 a3]
    batch_shape = v.data.shape[:-1]
    stacked = ad.reshape(cols, batch_shape + (3, 3))  # rows = column index
    # transpose rows/columns so matrix columns are a1, a2, a3
    perm = tuple(range(len(batch_shape))) + (len(batch_shape) + 1, len(batch_shape))
    out = Tensor(np.transpose(stacked.data, perm), (stacked,))

    def backward(g):
        stacked.grad += np.transpose(g, perm)

    out._backward = backward
    return out
