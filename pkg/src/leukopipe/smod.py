"""Convolutional spatial feature extractor.

Token features from the global module are rearranged into a square
feature map and passed through five spatial learning blocks, each
conv(3x3, same) -> batchnorm -> ReLU -> maxpool(2x2/2) -> dropout(0.2),
with the filter ladder fixed at (32, 64, 128, 256, 256). The final map is
flattened into the spatial feature vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import DimensionError, ParameterError
from .tensor import Tensor

FILTER_LADDER = (32, 64, 128, 256, 256)


@dataclass(frozen=True)
class SModConfig:
    in_channels: int
    grid: int                       # square map side length
    filters: tuple[int, ...] = FILTER_LADDER
    dropout_rate: float = 0.2

    def __post_init__(self):
        if tuple(self.filters) != FILTER_LADDER:
            raise ParameterError(f"filter ladder is fixed at {FILTER_LADDER}, "
                                 f"got {tuple(self.filters)}")
        if self.in_channels < 1 or self.grid < 1:
            raise ParameterError(f"invalid map extents ({self.in_channels}, {self.grid})")

    @property
    def flat_dim(self) -> int:
        side = self.grid
        for _ in self.filters:
            side = max(side // 2, 1)
        return self.filters[-1] * side * side


@dataclass
class SflBlockParams:
    kernels: Tensor                 # (f, c_in, 3, 3)
    bn_gamma: Tensor
    bn_beta: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass
class SModParams:
    blocks: list[SflBlockParams] = field(default_factory=list)


def init_params(config: SModConfig, rng: np.random.Generator,
                requires_grad: bool = True) -> SModParams:
    """He-normal conv kernels (no conv bias; batchnorm supplies the shift)."""
    params = SModParams()
    c_in = config.in_channels
    for f in config.filters:
        std = math.sqrt(2.0 / (c_in * 9))
        params.blocks.append(SflBlockParams(
            kernels=Tensor(rng.normal(0.0, std, size=(f, c_in, 3, 3)),
                           requires_grad=requires_grad),
            bn_gamma=Tensor(np.ones(f), requires_grad=requires_grad),
            bn_beta=Tensor(np.zeros(f), requires_grad=requires_grad),
            running_mean=np.zeros(f),
            running_var=np.ones(f),
        ))
        c_in = f
    return params


def named_parameters(params: SModParams) -> dict[str, Tensor]:
    out: dict[str, Tensor] = {}
    for i, blk in enumerate(params.blocks):
        out[f"smod.block{i}.kernels"] = blk.kernels
        out[f"smod.block{i}.bn.gamma"] = blk.bn_gamma
        out[f"smod.block{i}.bn.beta"] = blk.bn_beta
    return out


def state_arrays(params: SModParams) -> dict[str, np.ndarray]:
    """Trainable tensors plus batchnorm running statistics, for persistence."""
    out = {name: t.data for name, t in named_parameters(params).items()}
    for i, blk in enumerate(params.blocks):
        out[f"smod.block{i}.bn.running_mean"] = blk.running_mean
        out[f"smod.block{i}.bn.running_var"] = blk.running_var
    return out


def load_state(config: SModConfig, values: dict[str, np.ndarray],
               requires_grad: bool = False) -> SModParams:
    params = init_params(config, np.random.default_rng(0), requires_grad=requires_grad)
    for name, tens in named_parameters(params).items():
        if name not in values:
            raise ParameterError(f"missing parameter '{name}'")
        tens.data = np.asarray(values[name], dtype=np.float64).copy()
    for i, blk in enumerate(params.blocks):
        blk.running_mean = np.asarray(values[f"smod.block{i}.bn.running_mean"]).copy()
        blk.running_var = np.asarray(values[f"smod.block{i}.bn.running_var"]).copy()
    return params


# ---------------------------------------------------------------------------
# operations


def token_grid(tokens: Tensor) -> Tensor:
    """(n, d) tokens -> (d, sqrt(n), sqrt(n)) map in row-major patch order.

    The readout token must already be excluded; ``n`` must be square.
    """
    if tokens.ndim != 2:
        raise DimensionError(f"token_grid expects (n, d), got {tokens.shape}")
    n, d = tokens.shape
    side = math.isqrt(n)
    if side * side != n:
        raise DimensionError(f"token count {n} is not a perfect square")
    return tokens.transpose((1, 0)).reshape(d, side, side)


def grid_tokens(grid: Tensor) -> Tensor:
    """Inverse of :func:`token_grid`."""
    d, side, _ = grid.shape
    return grid.reshape(d, side * side).transpose((1, 0))


def sfl_block(x: Tensor, params: SflBlockParams, rng: np.random.Generator,
              training: bool = False, dropout_rate: float = 0.2,
              skip_pool_if_small: bool = False) -> Tensor:
    """One spatial learning block on a (b, c, h, w) map.

    Halves both spatial extents; with ``skip_pool_if_small`` the pooling
    step becomes the identity once an extent has shrunk below 2 instead of
    raising.
    """
    if x.ndim != 4:
        raise DimensionError(f"sfl_block expects (b, c, h, w), got {x.shape}")
    y = T.conv2d(x, params.kernels, padding="same")
    y = T.batchnorm(y, params.bn_gamma, params.bn_beta,
                    params.running_mean, params.running_var, training=training)
    y = T.relu(y)
    if y.shape[2] >= 2 and y.shape[3] >= 2:
        y = T.maxpool2d(y)
    elif not skip_pool_if_small:
        raise DimensionError(f"spatial extents {y.shape[2:]} too small to pool")
    return T.dropout(y, dropout_rate, rng, training=training)


def smod_forward(feature_map: Tensor, config: SModConfig, params: SModParams,
                 rng: np.random.Generator, training: bool = False) -> Tensor:
    """Run all five blocks and flatten row-major.

    Accepts a single (c, h, w) map or a (b, c, h, w) batch; returns a flat
    vector or a (b, flat) matrix accordingly.
    """
    single = feature_map.ndim == 3
    x = feature_map.reshape(1, *feature_map.shape) if single else feature_map
    if x.shape[1] != config.in_channels:
        raise DimensionError(
            f"map has {x.shape[1]} channels, config expects {config.in_channels}")
    for blk in params.blocks:
        x = sfl_block(x, blk, rng, training=training,
                      dropout_rate=config.dropout_rate, skip_pool_if_small=True)
    flat = x.reshape(x.shape[0], x.shape[1] * x.shape[2] * x.shape[3])
    return flat.reshape(flat.shape[1]) if single else flat
