"""World model: multi-modal encoder, RSSM dynamics, decoders, reward head and joint loss."""
from typing import Any, Callable, Mapping

import torch
from torch import nn

from config.run_config import RunConfig
from core.errors import MissingModalityError, NonFiniteLossError
from core.spaces import IMAGE, SpaceSpec
from core.types import LatentState
from networks.layers import ConvDecoder, ConvEncoder, Mlp, MlpSpec
from networks.optim import ParamSet
from replay.buffer import SequenceBatch, TensorBatch
from worldmodel.rssm import RSSM, DistPair, kl_balanced


def gaussian_nll(pred: torch.Tensor, target: torch.Tensor, event_dims: int) -> torch.Tensor:
    """Unit-variance Gaussian negative log-likelihood without its constant, summed over the event."""
    sq = 0.5 * (pred - target).pow(2)
    return sq.sum(dim=tuple(range(-event_dims, 0))) if event_dims else sq


class WorldModel(nn.Module):
    """Encoder fusion, latent dynamics, reconstruction and reward prediction.

    Submodules ``encoders``, ``fuse`` and ``rssm`` are all the actor needs
    for belief updates; decoders and the reward head are learner-only.
    """

    def __init__(self, spec: SpaceSpec, config: RunConfig):
        super().__init__()
        wm, general = config.world_model, config.general
        self.spec = spec
        self.kl_balance = wm.kl_balance
        self.kl_scale = wm.kl_scale
        self.free_nats = wm.free_nats
        self.reward_from_successor = wm.reward_from_successor
        hidden = MlpSpec(layers=general.mlp_layers, units=general.mlp_units)

        self.encoders = nn.ModuleDict()
        width = 0
        for modality in spec.modalities:
            if modality.kind == IMAGE:
                encoder = ConvEncoder(modality.shape, wm.cnn_depth)
            else:
                encoder = Mlp(modality.size, hidden)
            self.encoders[modality.name] = encoder
            width += encoder.out_dim
        self.fuse = Mlp(width, MlpSpec(layers=1, units=wm.embed_size))

        self.rssm = RSSM(
            embed_dim=wm.embed_size,
            action_dim=spec.action.size,
            deter=wm.rssm_size,
            latents=wm.latents,
            classes=wm.classes,
            hidden=general.mlp_units,
        )
        feature_dim = self.rssm.feature_dim

        self.decoders = nn.ModuleDict()
        for modality in spec.modalities:
            if modality.kind == IMAGE:
                self.decoders[modality.name] = ConvDecoder(feature_dim, modality.shape, wm.cnn_depth)
            else:
                self.decoders[modality.name] = Mlp(
                    feature_dim, MlpSpec(general.mlp_layers, general.mlp_units, out_dim=modality.size)
                )
        self.reward_head = Mlp(
            feature_dim, MlpSpec(general.mlp_layers, general.mlp_units, out_dim=1, zero_head=True)
        )

    @property
    def device(self) -> torch.device:
        return self.rssm.h0.device

    def encode(self, observation: Mapping[str, torch.Tensor]) -> torch.Tensor:
        """Fuse every modality into one embedding; leading batch dims are preserved.

        Raises:
            MissingModalityError: If a declared modality is absent.
        """
        parts = []
        for modality in self.spec.modalities:
            if modality.name not in observation:
                raise MissingModalityError(modality.name, "missing from observation")
            value = observation[modality.name]
            if value.dtype == torch.uint8:
                value = value.to(torch.float32) / 255.0
            parts.append(self.encoders[modality.name](value.to(torch.float32)))
        return self.fuse(torch.cat(parts, dim=-1))

    def decode(self, state: LatentState) -> tuple[dict[str, torch.Tensor], torch.Tensor]:
        """Per-modality reconstruction means and the reward mean for ``state``."""
        features = state.features()
        recon = {}
        for modality in self.spec.modalities:
            out = self.decoders[modality.name](features)
            recon[modality.name] = out.reshape(*features.shape[:-1], *modality.shape)
        return recon, self.reward(state)

    def reward(self, state: LatentState) -> torch.Tensor:
        return self.reward_head(state.features()).squeeze(-1)

    def initial(self, batch: int, generator: torch.Generator | None = None) -> LatentState:
        return self.rssm.initial(batch, generator)

    @torch.no_grad()
    def imagine_decode(
        self,
        start: LatentState,
        policy: torch.Tensor | Callable[[torch.Tensor], Any],
        horizon: int,
        generator: torch.Generator | None = None,
    ) -> dict[str, torch.Tensor]:
        """Roll the prior open-loop from ``start`` and decode every imagined state.

        ``policy`` is either an action tensor ``(B, >=horizon, A)`` or a module
        mapping features to an action distribution, whose mode is followed.
        Returns per-modality reconstructions ``(B, horizon, ...)`` and ``reward``.
        """
        if isinstance(policy, torch.Tensor):
            states = self.rssm.imagine(start, policy[:, :horizon], generator)
        elif horizon == 0:
            states = self.rssm.imagine(start, start.h.new_zeros(start.h.shape[0], 0, self.spec.action.size))
        else:
            state, collected = start, []
            for _ in range(horizon):
                state, _ = self.rssm.prior_step(state, policy(state.features()).mode(), generator)
                collected.append(state)
            states = LatentState.stack(collected, dim=1)
        recon, reward = self.decode(states)
        return {**recon, "reward": reward}

    def observe(
        self, batch: TensorBatch | SequenceBatch, generator: torch.Generator | None = None
    ) -> tuple[LatentState, DistPair, dict[str, torch.Tensor]]:
        """Filter the batch with the posterior and evaluate every loss component.

        Returns ``(states, dists, losses)`` where ``losses["total"]`` is the sum of
        the remaining entries, each averaged over ``B * T``.

        Raises:
            NonFiniteLossError: If any component is NaN or infinite.
        """
        if isinstance(batch, SequenceBatch):
            batch = batch.to_torch(self.device)
        embed = self.encode(batch.observation)
        states, dists = self.rssm.observe(embed, batch.action, batch.is_first, generator)
        features = states.features()

        components: dict[str, torch.Tensor] = {}
        for modality in self.spec.modalities:
            pred = self.decoders[modality.name](features).reshape(*features.shape[:-1], *modality.shape)
            target = batch.observation[modality.name]
            components[f"recon_{modality.name}"] = gaussian_nll(pred, target, len(modality.shape)).mean()

        reward_pred = self.reward_head(features).squeeze(-1)
        if self.reward_from_successor:
            # state t observed x_t, which arrived together with the reward of a_{t-1}
            pred, target = reward_pred, batch.reward
        else:
            pred, target = reward_pred[:, :-1], batch.reward[:, 1:]
        if pred.numel():
            components["reward"] = gaussian_nll(pred, target, 0).mean()
        else:
            components["reward"] = reward_pred.sum() * 0.0

        kl = kl_balanced(dists.posterior, dists.prior, self.kl_balance).mean()
        if self.free_nats > 0:
            kl = torch.clamp(kl, min=self.free_nats)
        components["kl"] = self.kl_scale * kl

        total = sum(components.values())
        if not torch.isfinite(total):
            raise NonFiniteLossError({k: float(v) for k, v in components.items()})
        return states, dists, {"total": total, **components}

    def loss(
        self, batch: TensorBatch | SequenceBatch, generator: torch.Generator | None = None
    ) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
        _, _, losses = self.observe(batch, generator)
        components = {k: v for k, v in losses.items() if k != "total"}
        return losses["total"], components

    def train_step(
        self,
        batch: TensorBatch | SequenceBatch,
        optimizer: ParamSet,
        generator: torch.Generator | None = None,
    ) -> tuple[LatentState, dict[str, float]]:
        """One clipped Adam update of every world-model parameter.

        Returns the detached posterior states (imagination starts) and metrics.
        """
        states, dists, losses = self.observe(batch, generator)
        metrics = optimizer.step(losses["total"])
        metrics.update({f"wm_{k}": float(v.detach()) for k, v in losses.items()})
        with torch.no_grad():
            prior_probs = torch.softmax(dists.prior, -1)
            post_probs = torch.softmax(dists.posterior, -1)
            metrics["wm_prior_entropy"] = float(-(prior_probs * prior_probs.clamp_min(1e-8).log()).sum((-2, -1)).mean())
            metrics["wm_posterior_entropy"] = float(-(post_probs * post_probs.clamp_min(1e-8).log()).sum((-2, -1)).mean())
        metrics["wm_version"] = optimizer.version
        return states.detach(), metrics
