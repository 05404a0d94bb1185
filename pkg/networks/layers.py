"""Parameterized building blocks: MLPs, the gated recurrent cell, conv encoder/decoder."""
from dataclasses import dataclass

import torch
from torch import nn

from core.errors import NonFiniteError, ShapeMismatchError


@dataclass(frozen=True)
class MlpSpec:
    """Hidden stack of ``layers`` x ``units`` (Linear, LayerNorm, ELU) plus an optional head."""

    layers: int = 4
    units: int = 512
    out_dim: int | None = None
    zero_head: bool = False


class Mlp(nn.Module):
    def __init__(self, in_dim: int, spec: MlpSpec):
        super().__init__()
        self.in_dim = in_dim
        self.spec = spec
        blocks: list[nn.Module] = []
        width = in_dim
        for _ in range(spec.layers):
            linear = nn.Linear(width, spec.units)
            nn.init.xavier_uniform_(linear.weight)
            nn.init.zeros_(linear.bias)
            blocks += [linear, nn.LayerNorm(spec.units), nn.ELU()]
            width = spec.units
        self.hidden = nn.Sequential(*blocks)
        self.head: nn.Linear | None = None
        self.out_dim = width
        if spec.out_dim is not None:
            self.head = nn.Linear(width, spec.out_dim)
            if spec.zero_head:
                nn.init.zeros_(self.head.weight)
            else:
                nn.init.xavier_uniform_(self.head.weight)
            nn.init.zeros_(self.head.bias)
            self.out_dim = spec.out_dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeMismatchError("input", f"expected last dimension {self.in_dim}, got {x.shape[-1]}")
        x = self.hidden(x)
        if self.head is not None:
            x = self.head(x)
        return x


def mlp_apply(mlp: Mlp, x: torch.Tensor) -> torch.Tensor:
    return mlp(x)


class GRUCell(nn.Module):
    """Gated recurrent cell with layer normalization on the fused gate pre-activations.

    The update gate is biased towards keeping the previous state.
    """

    def __init__(self, input_size: int, hidden_size: int, norm: bool = True, update_bias: float = -1.0):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.update_bias = update_bias
        self.linear = nn.Linear(input_size + hidden_size, 3 * hidden_size, bias=not norm)
        nn.init.xavier_uniform_(self.linear.weight)
        self.norm = nn.LayerNorm(3 * hidden_size) if norm else None

    def forward(self, x: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        if not torch.isfinite(h).all():
            raise NonFiniteError("h", "recurrent state contains NaN or infinity")
        parts = self.linear(torch.cat([x, h], dim=-1))
        if self.norm is not None:
            parts = self.norm(parts)
        reset, cand, update = torch.split(parts, self.hidden_size, dim=-1)
        reset = torch.sigmoid(reset)
        cand = torch.tanh(reset * cand)
        update = torch.sigmoid(update + self.update_bias)
        return update * cand + (1 - update) * h


def recurrent_step(cell: GRUCell, h: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    return cell(x, h)


class ConvEncoder(nn.Module):
    """Four stride-2 convolutions; ``(..., H, W, C)`` in ``[0, 1]`` to a flat vector."""

    def __init__(self, image_shape: tuple[int, int, int], depth: int = 32):
        super().__init__()
        height, width, channels = image_shape
        if height % 16 or width % 16:
            raise ShapeMismatchError("image", f"sides must be multiples of 16, got {height}x{width}")
        self.image_shape = tuple(image_shape)
        layers: list[nn.Module] = []
        in_ch = channels
        for i in range(4):
            out_ch = depth * 2 ** i
            layers += [nn.Conv2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1), nn.ELU()]
            in_ch = out_ch
        self.net = nn.Sequential(*layers)
        self.out_dim = in_ch * (height // 16) * (width // 16)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        batch = image.shape[:-3]
        if batch.numel() == 0:
            return image.new_zeros((*batch, self.out_dim))
        x = image.reshape(batch.numel(), *self.image_shape).permute(0, 3, 1, 2) - 0.5
        x = self.net(x)
        return x.reshape(*batch, self.out_dim)


class ConvDecoder(nn.Module):
    """Mirror of :class:`ConvEncoder` with transposed convolutions; returns the image mean."""

    def __init__(self, in_dim: int, image_shape: tuple[int, int, int], depth: int = 32):
        super().__init__()
        height, width, channels = image_shape
        self.image_shape = tuple(image_shape)
        self._seed_shape = (depth * 8, height // 16, width // 16)
        self.project = nn.Linear(in_dim, depth * 8 * (height // 16) * (width // 16))
        layers: list[nn.Module] = []
        in_ch = depth * 8
        for i in range(3):
            out_ch = depth * 2 ** (2 - i)
            layers += [nn.ConvTranspose2d(in_ch, out_ch, kernel_size=4, stride=2, padding=1), nn.ELU()]
            in_ch = out_ch
        layers.append(nn.ConvTranspose2d(in_ch, channels, kernel_size=4, stride=2, padding=1))
        self.net = nn.Sequential(*layers)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        batch = features.shape[:-1]
        count = batch.numel()
        if count == 0:
            return features.new_zeros((*batch, *self.image_shape))
        x = self.project(features.reshape(count, features.shape[-1]))
        x = self.net(x.reshape(count, *self._seed_shape))
        x = x.permute(0, 2, 3, 1) + 0.5
        return x.reshape(*batch, *self.image_shape)
