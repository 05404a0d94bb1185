"""Sampling helpers and action distributions driven by explicit torch generators."""
import math

import torch
import torch.nn.functional as F


def sample_categorical(probs: torch.Tensor, generator: torch.Generator | None = None) -> torch.Tensor:
    """Indices drawn row-wise from ``probs`` (``(..., classes)``) by inverse CDF.

    Consumes exactly one uniform per row regardless of the probabilities.
    """
    flat = probs.detach().reshape(-1, probs.shape[-1])
    cdf = torch.cumsum(flat, dim=-1)
    u = torch.rand(flat.shape[0], 1, generator=generator, dtype=flat.dtype, device=flat.device)
    index = torch.searchsorted(cdf, u * cdf[:, -1:], right=True).clamp_(max=flat.shape[-1] - 1)
    return index.reshape(probs.shape[:-1])


def straight_through_sample(logits: torch.Tensor, generator: torch.Generator | None = None) -> torch.Tensor:
    """One-hot sample per row whose gradient flows as if it were the softmax probabilities."""
    probs = torch.softmax(logits, dim=-1)
    index = sample_categorical(probs, generator)
    onehot = F.one_hot(index, logits.shape[-1]).to(probs.dtype)
    return onehot + (probs - probs.detach())


def categorical_entropy(logits: torch.Tensor) -> torch.Tensor:
    logp = torch.log_softmax(logits, dim=-1)
    return -(logp.exp() * logp).sum(-1)


class OneHotDist:
    """Categorical over ``n`` actions with one-hot samples."""

    def __init__(self, logits: torch.Tensor):
        self.logits = logits

    def sample(self, generator: torch.Generator | None = None) -> torch.Tensor:
        index = sample_categorical(torch.softmax(self.logits, -1), generator)
        return F.one_hot(index, self.logits.shape[-1]).to(self.logits.dtype)

    def rsample(self, generator: torch.Generator | None = None) -> torch.Tensor:
        return straight_through_sample(self.logits, generator)

    def mode(self) -> torch.Tensor:
        return F.one_hot(self.logits.argmax(-1), self.logits.shape[-1]).to(self.logits.dtype)

    def log_prob(self, action: torch.Tensor) -> torch.Tensor:
        return (torch.log_softmax(self.logits, -1) * action).sum(-1)

    def entropy(self) -> torch.Tensor:
        return categorical_entropy(self.logits)


class TanhNormal:
    """Gaussian squashed through ``tanh``; entropy is that of the base Gaussian."""

    def __init__(self, mean: torch.Tensor, log_std: torch.Tensor):
        self.mean = mean
        self.log_std = log_std

    def rsample(self, generator: torch.Generator | None = None) -> torch.Tensor:
        eps = torch.randn(self.mean.shape, generator=generator, dtype=self.mean.dtype, device=self.mean.device)
        return torch.tanh(self.mean + self.log_std.exp() * eps)

    def sample(self, generator: torch.Generator | None = None) -> torch.Tensor:
        return self.rsample(generator).detach()

    def mode(self) -> torch.Tensor:
        return torch.tanh(self.mean)

    def log_prob(self, action: torch.Tensor) -> torch.Tensor:
        action = action.clamp(-1 + 1e-6, 1 - 1e-6)
        pre = torch.atanh(action)
        base = -0.5 * ((pre - self.mean) / self.log_std.exp()) ** 2 - self.log_std - 0.5 * math.log(2 * math.pi)
        return (base - torch.log1p(-action.pow(2) + 1e-6)).sum(-1)

    def entropy(self) -> torch.Tensor:
        return (0.5 * math.log(2 * math.pi * math.e) + self.log_std).sum(-1)
