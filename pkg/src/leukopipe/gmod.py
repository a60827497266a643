"""Transformer-based global feature extractor.

An image is cut into non-overlapping patches, linearly projected, summed
with positional embeddings behind a learnable readout token, and passed
through a stack of pre-norm attention/MLP blocks. The normalized readout
row is the global feature vector; the remaining token rows feed the
spatial module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import DimensionError, ParameterError
from .tensor import Tensor


@dataclass(frozen=True)
class GModConfig:
    image_height: int = 32
    image_width: int = 32
    channels: int = 1
    patch_size: int = 4
    embed_dim: int = 64
    depth: int = 4
    heads: int = 4
    mlp_hidden: int = 128

    def __post_init__(self):
        if self.image_height % self.patch_size or self.image_width % self.patch_size:
            raise ParameterError(
                f"patch size {self.patch_size} must divide image extents "
                f"({self.image_height}, {self.image_width})")
        if self.embed_dim % self.heads:
            raise ParameterError(
                f"embed_dim {self.embed_dim} must be divisible by heads {self.heads}")

    @property
    def tokens(self) -> int:
        return (self.image_height * self.image_width) // self.patch_size ** 2

    @property
    def patch_dim(self) -> int:
        return self.patch_size ** 2 * self.channels

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads


@dataclass
class BlockParams:
    ln1_gamma: Tensor
    ln1_beta: Tensor
    heads: list[tuple[Tensor, Tensor, Tensor]]  # per head (wq, wk, wv)
    out_proj: Tensor
    ln2_gamma: Tensor
    ln2_beta: Tensor
    mlp_w1: Tensor
    mlp_b1: Tensor
    mlp_w2: Tensor
    mlp_b2: Tensor


@dataclass
class GModParams:
    patch_proj: Tensor          # (p*p*c, d)
    pos_embed: Tensor           # (n+1, d)
    cls_token: Tensor           # (1, d)
    blocks: list[BlockParams] = field(default_factory=list)
    final_gamma: Tensor = None
    final_beta: Tensor = None


def truncated_normal(rng: np.random.Generator, shape: tuple[int, ...],
                     std: float = 0.02) -> np.ndarray:
    """Normal draws with magnitude capped at two standard deviations."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out


def init_params(config: GModConfig, rng: np.random.Generator,
                requires_grad: bool = True) -> GModParams:
    """Truncated-normal projections, zero biases and readout token."""
    d, hd = config.embed_dim, config.head_dim

    def proj(shape):
        return Tensor(truncated_normal(rng, shape), requires_grad=requires_grad)

    def zeros(shape):
        return Tensor(np.zeros(shape), requires_grad=requires_grad)

    def ones(shape):
        return Tensor(np.ones(shape), requires_grad=requires_grad)

    params = GModParams(
        patch_proj=proj((config.patch_dim, d)),
        pos_embed=proj((config.tokens + 1, d)),
        cls_token=zeros((1, d)),
        final_gamma=ones((d,)),
        final_beta=zeros((d,)),
    )
    for _ in range(config.depth):
        params.blocks.append(BlockParams(
            ln1_gamma=ones((d,)), ln1_beta=zeros((d,)),
            heads=[(proj((d, hd)), proj((d, hd)), proj((d, hd)))
                   for _ in range(config.heads)],
            out_proj=proj((d, d)),
            ln2_gamma=ones((d,)), ln2_beta=zeros((d,)),
            mlp_w1=proj((d, config.mlp_hidden)), mlp_b1=zeros((config.mlp_hidden,)),
            mlp_w2=proj((config.mlp_hidden, d)), mlp_b2=zeros((d,)),
        ))
    return params


def named_parameters(params: GModParams) -> dict[str, Tensor]:
    out = {
        "gmod.patch_proj": params.patch_proj,
        "gmod.pos_embed": params.pos_embed,
        "gmod.cls_token": params.cls_token,
        "gmod.final_ln.gamma": params.final_gamma,
        "gmod.final_ln.beta": params.final_beta,
    }
    for i, blk in enumerate(params.blocks):
        base = f"gmod.block{i}"
        out[f"{base}.ln1.gamma"] = blk.ln1_gamma
        out[f"{base}.ln1.beta"] = blk.ln1_beta
        for j, (wq, wk, wv) in enumerate(blk.heads):
            out[f"{base}.head{j}.wq"] = wq
            out[f"{base}.head{j}.wk"] = wk
            out[f"{base}.head{j}.wv"] = wv
        out[f"{base}.out_proj"] = blk.out_proj
        out[f"{base}.ln2.gamma"] = blk.ln2_gamma
        out[f"{base}.ln2.beta"] = blk.ln2_beta
        out[f"{base}.mlp.w1"] = blk.mlp_w1
        out[f"{base}.mlp.b1"] = blk.mlp_b1
        out[f"{base}.mlp.w2"] = blk.mlp_w2
        out[f"{base}.mlp.b2"] = blk.mlp_b2
    return out


def load_named_parameters(config: GModConfig, values: dict[str, np.ndarray],
                          requires_grad: bool = False) -> GModParams:
    """Rebuild parameters from a ``named_parameters``-style mapping."""
    rng = np.random.default_rng(0)
    params = init_params(config, rng, requires_grad=requires_grad)
    for name, tens in named_parameters(params).items():
        if name not in values:
            raise ParameterError(f"missing parameter '{name}'")
        if values[name].shape != tens.shape:
            raise DimensionError(
                f"parameter '{name}' has shape {values[name].shape}, expected {tens.shape}")
        tens.data = np.asarray(values[name], dtype=np.float64).copy()
    return params


# ---------------------------------------------------------------------------
# operations


def patchify(image: Tensor, patch_size: int) -> Tensor:
    """(h, w, c) -> (n, p*p*c): row-major patches, each flattened row-major."""
    if image.ndim != 3:
        raise DimensionError(f"patchify expects (h, w, c), got {image.shape}")
    h, w, c = image.shape
    p = patch_size
    if h % p or w % p:
        raise DimensionError(f"patch size {p} does not divide image extents ({h}, {w})")
    n = (h * w) // (p * p)
    grid = image.reshape(h // p, p, w // p, p, c)
    return grid.transpose((0, 2, 1, 3, 4)).reshape(n, p * p * c)


def unpatchify(patches: Tensor, patch_size: int, h: int, w: int, c: int) -> Tensor:
    """Inverse of :func:`patchify`."""
    p = patch_size
    grid = patches.reshape(h // p, w // p, p, p, c)
    return grid.transpose((0, 2, 1, 3, 4)).reshape(h, w, c)


def embed(patches: Tensor, params: GModParams) -> Tensor:
    """Project patches and prepend the readout token, plus positional terms."""
    if patches.shape[1] != params.patch_proj.shape[0]:
        raise DimensionError(
            f"patch width {patches.shape[1]} does not match projection "
            f"{params.patch_proj.shape}")
    if patches.shape[0] + 1 != params.pos_embed.shape[0]:
        raise DimensionError(
            f"{patches.shape[0]} patches do not match positional table "
            f"{params.pos_embed.shape}")
    projected = patches @ params.patch_proj
    return T.concat([params.cls_token, projected], axis=0) + params.pos_embed


def self_attention(tokens: Tensor, wq: Tensor, wk: Tensor, wv: Tensor) -> Tensor:
    """Scaled dot-product attention of every token over all tokens."""
    q = tokens @ wq
    k = tokens @ wk
    v = tokens @ wv
    scale = 1.0 / math.sqrt(wk.shape[1])
    weights = T.softmax((q @ k.T) * scale)
    return weights @ v


def msa(tokens: Tensor, block: BlockParams) -> Tensor:
    """Concatenate all attention heads and mix them linearly."""
    outs = [self_attention(tokens, wq, wk, wv) for wq, wk, wv in block.heads]
    return T.concat(outs, axis=1) @ block.out_proj


def transformer_block(z: Tensor, block: BlockParams) -> Tensor:
    """Pre-norm residual attention followed by a pre-norm residual MLP."""
    h = z + msa(T.layernorm(z, block.ln1_gamma, block.ln1_beta), block)
    mid = T.layernorm(h, block.ln2_gamma, block.ln2_beta)
    mlp = T.gelu(mid @ block.mlp_w1 + block.mlp_b1) @ block.mlp_w2 + block.mlp_b2
    return h + mlp


def gmod_tokens(image: Tensor, config: GModConfig, params: GModParams) -> Tensor:
    """Full token matrix (n+1, d) after all blocks and the final norm."""
    if image.shape != (config.image_height, config.image_width, config.channels):
        raise DimensionError(
            f"image shape {image.shape} does not match config "
            f"({config.image_height}, {config.image_width}, {config.channels})")
    z = embed(patchify(image, config.patch_size), params)
    for block in params.blocks:
        z = transformer_block(z, block)
    return T.layernorm(z, params.final_gamma, params.final_beta)


def gmod_forward(image: Tensor, config: GModConfig, params: GModParams) -> Tensor:
    """Global feature vector (d,): the normalized readout-token row."""
    return gmod_tokens(image, config, params)[0]
