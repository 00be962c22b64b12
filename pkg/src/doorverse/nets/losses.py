"""cVAE action generator and the losses used to train the stage policies."""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import autodiff as ad
from .autodiff import Tensor
from .layers import MLP, Module
from .rotations import rot6d_to_matrix_t

ACTION_DIM = 9     # position (3) + rotation 6D (6)
LATENT_DIM = 32


class LossWeights:
    """Balance factors for the generator loss terms."""

    def __init__(self, kl: float = 0.1, pos: float = 1.0, rot: float = 1.0):
        if min(kl, pos, rot) < 0.0:
            raise ShapeError("loss weights must be non-negative")
        self.kl = kl
        self.pos = pos
        self.rot = rot

    def to_dict(self) -> dict:
        return {"kl": self.kl, "pos": self.pos, "rot": self.rot}

    @staticmethod
    def from_dict(d: dict) -> "LossWeights":
        return LossWeights(kl=d["kl"], pos=d["pos"], rot=d["rot"])


class CVAE(Module):
    """Conditional VAE over 9D actions: encoder to a Gaussian latent, decoder back."""

    def __init__(self, cond_dim: int, rng: np.random.Generator,
                 latent_dim: int = LATENT_DIM, hidden: int = 128):
        self.cond_dim = cond_dim
        self.latent_dim = latent_dim
        self.enc = MLP([ACTION_DIM + cond_dim, hidden, hidden, 2 * latent_dim], rng)
        self.dec = MLP([latent_dim + cond_dim, hidden, hidden, ACTION_DIM], rng)

    def encode(self, action: Tensor, cond: Tensor) -> tuple[Tensor, Tensor]:
        h = self.enc(ad.concat([action, cond], axis=-1))
        return h[..., : self.latent_dim], h[..., self.latent_dim:]

    def decode(self, z: Tensor, cond: Tensor) -> Tensor:
        return self.dec(ad.concat([z, cond], axis=-1))

    def sample_actions(self, cond: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
        """Decode k seeded latents for one condition vector; forward only.

        The first latent is the prior mode (z = 0), the rest are N(0, 1) draws.
        """
        cond_t = Tensor(np.broadcast_to(np.asarray(cond, dtype=np.float32), (k, self.cond_dim)).copy())
        z = rng.standard_normal((k, self.latent_dim)).astype(np.float32)
        z[0] = 0.0
        return self.decode(Tensor(z), cond_t).data.copy()


def kl_loss(mu: Tensor, logvar: Tensor) -> Tensor:
    """KL(N(mu, sigma) || N(0, 1)), summed over the latent axis, mean over batch."""
    lv = ad.clamp(logvar, -10.0, 10.0)
    one = Tensor(np.array(1.0, dtype=mu.data.dtype))
    half = Tensor(np.array(-0.5, dtype=mu.data.dtype))
    per = ad.tsum(one + lv - mu * mu - ad.exp(lv), axis=-1) * half
    if per.data.ndim == 0:
        return per
    return ad.tmean(per)


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    return ad.tmean(ad.absolute(pred - target))


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    diff = pred - target
    return ad.tmean(diff * diff)


def rotation_matrix_loss(pred6: Tensor, target_mats: np.ndarray) -> Tensor:
    """Mean squared element-wise error between recovered and target matrices."""
    mats = rot6d_to_matrix_t(pred6)
    return mse_loss(mats, Tensor(np.asarray(target_mats, dtype=np.float32)))


def cvae_loss_t(action_gt: np.ndarray, target_mats: np.ndarray, cond: Tensor,
                cvae: CVAE, weights: LossWeights,
                rng: np.random.Generator) -> tuple[Tensor, dict[str, float]]:
    """Total generator loss: weighted KL + position L1 + rotation matrix error.

    `action_gt` is (B, 9) with rot6d in columns 3:9; `target_mats` the matching
    (B, 3, 3) rotation matrices; `cond` the (B, cond_dim) condition (a Tensor,
    so encoder gradients flow). The latent is reparameterized with seeded
    noise from `rng`.
    """
    a = np.asarray(action_gt, dtype=np.float32)
    if a.ndim != 2 or a.shape[1] != ACTION_DIM:
        raise ShapeError(f"expected (B, {ACTION_DIM}) actions, got {a.shape}")
    if cond.data.shape != (a.shape[0], cvae.cond_dim):
        raise ShapeError(f"expected (B, {cvae.cond_dim}) condition, got {cond.data.shape}")

    act_t = Tensor(a)
    cond_t = cond
    mu, logvar = cvae.encode(act_t, cond_t)
    eps = Tensor(rng.standard_normal(mu.data.shape).astype(np.float32))
    sigma = ad.exp(ad.clamp(logvar, -10.0, 10.0) * Tensor(np.float32(0.5)))
    z = mu + sigma * eps
    recon = cvae.decode(z, cond_t)

    l_kl = kl_loss(mu, logvar)
    l_pos = l1_loss(recon[:, :3], act_t[:, :3])
    l_rot = rotation_matrix_loss(recon[:, 3:], target_mats)
    total = (Tensor(np.float32(weights.kl)) * l_kl
             + Tensor(np.float32(weights.pos)) * l_pos
             + Tensor(np.float32(weights.rot)) * l_rot)
    components = {"kl": l_kl.item(), "pos": l_pos.item(), "rot": l_rot.item(),
                  "total": total.item()}
    return total, components


def cvae_loss(action_gt: np.ndarray, target_mats: np.ndarray, cond: np.ndarray,
              cvae: CVAE, weights: LossWeights,
              rng: np.random.Generator) -> tuple[Tensor, dict[str, float]]:
    """cvae_loss_t with a plain-array condition (no encoder gradient path)."""
    return cvae_loss_t(action_gt, target_mats,
                       Tensor(np.asarray(cond, dtype=np.float32)), cvae, weights, rng)
