"""Recurrent state-space model with categorical stochastic codes."""
from dataclasses import dataclass

import torch
from torch import nn

from core.errors import NonFiniteError
from core.types import LatentState
from networks.distributions import straight_through_sample
from networks.layers import GRUCell, Mlp, MlpSpec


@dataclass(frozen=True)
class DistPair:
    """Prior and posterior logits, each shaped ``(..., latents, classes)``."""

    prior: torch.Tensor
    posterior: torch.Tensor


def categorical_kl(lhs_logits: torch.Tensor, rhs_logits: torch.Tensor) -> torch.Tensor:
    """KL(lhs || rhs) summed over latents and classes."""
    lhs_logp = torch.log_softmax(lhs_logits, -1)
    rhs_logp = torch.log_softmax(rhs_logits, -1)
    return (lhs_logp.exp() * (lhs_logp - rhs_logp)).sum((-2, -1))


def kl_balanced(posterior: torch.Tensor, prior: torch.Tensor, alpha: float = 0.8) -> torch.Tensor:
    """Balanced KL: ``alpha`` of the gradient trains the prior, the rest the posterior."""
    train_prior = categorical_kl(posterior.detach(), prior)
    train_posterior = categorical_kl(posterior, prior.detach())
    return alpha * train_prior + (1 - alpha) * train_posterior


class RSSM(nn.Module):
    def __init__(
        self,
        embed_dim: int,
        action_dim: int,
        deter: int = 512,
        latents: int = 32,
        classes: int = 32,
        hidden: int = 512,
    ):
        super().__init__()
        self.deter = deter
        self.latents = latents
        self.classes = classes
        self.action_dim = action_dim
        stoch = latents * classes
        self.img_in = Mlp(stoch + action_dim, MlpSpec(layers=1, units=hidden))
        self.cell = GRUCell(hidden, deter)
        self.prior_head = Mlp(deter, MlpSpec(layers=1, units=hidden, out_dim=stoch))
        self.post_head = Mlp(deter + embed_dim, MlpSpec(layers=1, units=hidden, out_dim=stoch))
        self.h0 = nn.Parameter(torch.zeros(deter))

    @property
    def feature_dim(self) -> int:
        return self.deter + self.latents * self.classes

    def _logits(self, head: Mlp, x: torch.Tensor) -> torch.Tensor:
        return head(x).reshape(*x.shape[:-1], self.latents, self.classes)

    def initial(self, batch: int, generator: torch.Generator | None = None) -> LatentState:
        """Learned ``h0`` with ``z0`` sampled from the prior at ``h0``."""
        h = torch.tanh(self.h0).expand(batch, self.deter)
        logits = self._logits(self.prior_head, h)
        return LatentState(h, straight_through_sample(logits, generator))

    def _deterministic(self, prev: LatentState, action: torch.Tensor) -> torch.Tensor:
        x = self.img_in(torch.cat([prev.z.flatten(-2), action], dim=-1))
        return self.cell(x, prev.h)

    def _reset(
        self, prev: LatentState, action: torch.Tensor, is_first: torch.Tensor, generator: torch.Generator | None
    ) -> tuple[LatentState, torch.Tensor]:
        init = self.initial(action.shape[0], generator)
        mask = is_first.reshape(-1, 1).bool()
        h = torch.where(mask, init.h, prev.h)
        z = torch.where(mask[..., None], init.z, prev.z)
        action = torch.where(mask, torch.zeros_like(action), action)
        return LatentState(h, z), action

    def posterior_step(
        self,
        prev: LatentState,
        action: torch.Tensor,
        embed: torch.Tensor,
        is_first: torch.Tensor,
        generator: torch.Generator | None = None,
    ) -> tuple[LatentState, DistPair]:
        """Filter one step: reset on ``is_first``, advance ``h``, sample ``z`` from the posterior."""
        prev, action = self._reset(prev, action, is_first, generator)
        h = self._deterministic(prev, action)
        prior = self._logits(self.prior_head, h)
        posterior = self._logits(self.post_head, torch.cat([h, embed], dim=-1))
        z = straight_through_sample(posterior, generator)
        if not torch.isfinite(posterior).all():
            raise NonFiniteError("z", "posterior logits contain NaN or infinity")
        return LatentState(h, z), DistPair(prior=prior, posterior=posterior)

    def prior_step(
        self, prev: LatentState, action: torch.Tensor, generator: torch.Generator | None = None
    ) -> tuple[LatentState, torch.Tensor]:
        """Advance without an observation; ``z`` comes from the prior."""
        h = self._deterministic(prev, action)
        prior = self._logits(self.prior_head, h)
        if not torch.isfinite(prior).all():
            raise NonFiniteError("z", "prior logits contain NaN or infinity")
        return LatentState(h, straight_through_sample(prior, generator)), prior

    def observe(
        self,
        embed: torch.Tensor,
        action: torch.Tensor,
        is_first: torch.Tensor,
        generator: torch.Generator | None = None,
        start: LatentState | None = None,
    ) -> tuple[LatentState, DistPair]:
        """Posterior filtering over ``(B, T, ...)`` inputs; returns ``(B, T)`` states and logits."""
        batch, length = embed.shape[:2]
        state = start if start is not None else self.initial(batch, generator)
        states, priors, posteriors = [], [], []
        for t in range(length):
            state, dists = self.posterior_step(state, action[:, t], embed[:, t], is_first[:, t], generator)
            states.append(state)
            priors.append(dists.prior)
            posteriors.append(dists.posterior)
        return (
            LatentState.stack(states, dim=1),
            DistPair(prior=torch.stack(priors, 1), posterior=torch.stack(posteriors, 1)),
        )

    def imagine(
        self, start: LatentState, actions: torch.Tensor, generator: torch.Generator | None = None
    ) -> LatentState:
        """Open-loop prior rollout for ``actions`` shaped ``(B, H, A)``; returns ``(B, H)`` states."""
        state, states = start, []
        if actions.shape[1] == 0:
            return LatentState(start.h[:, None][:, :0], start.z[:, None][:, :0])
        for t in range(actions.shape[1]):
            state, _ = self.prior_step(state, actions[:, t], generator)
            states.append(state)
        return LatentState.stack(states, dim=1)
