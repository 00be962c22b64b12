"""Network building blocks: linear layers, MLPs and the point-cloud encoder."""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import autodiff as ad
from .autodiff import Tensor


class Module:
    """Tracks parameters by name for optimizers and checkpoints."""

    def named_parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for key, value in vars(self).items():
            if isinstance(value, Tensor):
                params[key] = value
            elif isinstance(value, Module):
                for sub, t in value.named_parameters().items():
                    params[f"{key}.{sub}"] = t
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        for sub, t in item.named_parameters().items():
                            params[f"{key}.{i}.{sub}"] = t
        return params

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        if set(params) != set(state):
            missing = set(params) ^ set(state)
            raise ShapeError(f"state dict keys do not match parameters: {sorted(missing)}")
        for k, t in params.items():
            if t.data.shape != state[k].shape:
                raise ShapeError(f"shape mismatch for {k}: {t.data.shape} vs {state[k].shape}")
            t.data = state[k].astype(t.data.dtype).copy()


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        scale = np.sqrt(2.0 / n_in)
        self.weight = Tensor((rng.standard_normal((n_in, n_out)) * scale).astype(np.float32))
        self.bias = Tensor(np.zeros(n_out, dtype=np.float32))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.add(ad.matmul(x, self.weight), self.bias)


class MLP(Module):
    """Fully-connected stack with relu between layers, linear output."""

    def __init__(self, dims: list[int], rng: np.random.Generator, activation: str = "relu"):
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.activation = activation

    def __call__(self, x: Tensor) -> Tensor:
        act = ad.relu if self.activation == "relu" else ad.tanh
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i + 1 < len(self.layers):
                x = act(x)
        return x


class PointEncoder(Module):
    """Shared per-point MLP 3 -> 64 -> 128, max-pool, and a per-point head.

    The global feature is the coordinate-wise max over the 128-dim pre-pool
    features; the per-point head mixes each local feature with the pooled
    global one back to 128 dims.
    """

    FEATURE_DIM = 128

    def __init__(self, rng: np.random.Generator, n_points: int = 4096):
        self.n_points = n_points
        self.lin1 = Linear(3, 64, rng)
        self.lin2 = Linear(64, 128, rng)
        self.head = Linear(256, 128, rng)

    def prepool(self, cloud: Tensor) -> Tensor:
        """(..., N, 3) -> (..., N, 128) pre-pool per-point features."""
        return self.lin2(ad.relu(self.lin1(cloud)))

    def global_feature(self, cloud: Tensor, axis: int = -2) -> Tensor:
        return ad.tmax(self.prepool(cloud), axis=axis)

    def __call__(self, cloud: Tensor) -> tuple[Tensor, Tensor]:
        """Full encode of one cloud (N, 3) -> (per-point (N, 128), global (128,))."""
        if cloud.data.ndim != 2 or cloud.data.shape != (self.n_points, 3):
            raise ShapeError(f"expected cloud of shape ({self.n_points}, 3), got {cloud.data.shape}")
        pre = self.prepool(cloud)
        global_feat = ad.tmax(pre, axis=0)
        tiled = Tensor(np.broadcast_to(global_feat.data, pre.data.shape).copy(), (global_feat,))

        def backward(g):
            global_feat.grad += g.sum(axis=0)

        tiled._backward = backward
        per_point = ad.relu(self.head(ad.concat([pre, tiled], axis=1)))
        return per_point, global_feat


def point_encode(cloud: np.ndarray, encoder: PointEncoder) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic forward pass of the point encoder on a raw cloud array."""
    arr = np.asarray(cloud, dtype=np.float32)
    if arr.ndim != 2 or arr.shape != (encoder.n_points, 3):
        raise ShapeError(f"expected ({encoder.n_points}, 3) cloud, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError("cloud must be finite")
    per_point, global_feat = encoder(Tensor(arr))
    return per_point.data.copy(), global_feat.data.copy()
