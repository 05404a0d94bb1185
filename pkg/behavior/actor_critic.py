"""Actor-critic learning on imagined latent rollouts."""
import copy
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator

import torch
from torch import nn

from behavior.returns import lambda_returns
from config.run_config import RunConfig
from core.errors import NonFiniteError
from core.spaces import ActionSpace
from core.types import LatentState
from networks.distributions import OneHotDist, TanhNormal
from networks.layers import Mlp, MlpSpec
from networks.optim import ParamSet


class Actor(nn.Module):
    """Policy head: categorical for discrete spaces, tanh-squashed Gaussian otherwise."""

    def __init__(
        self,
        feature_dim: int,
        action_space: ActionSpace,
        mlp: MlpSpec,
        min_log_std: float = -5.0,
        max_log_std: float = 2.0,
    ):
        super().__init__()
        self.discrete = action_space.is_discrete
        out_dim = action_space.n if self.discrete else 2 * action_space.dim
        self.net = Mlp(feature_dim, MlpSpec(mlp.layers, mlp.units, out_dim=out_dim))
        self.min_log_std = min_log_std
        self.max_log_std = max_log_std

    def forward(self, features: torch.Tensor) -> OneHotDist | TanhNormal:
        out = self.net(features)
        if self.discrete:
            return OneHotDist(out)
        mean, raw_std = out.chunk(2, dim=-1)
        return TanhNormal(mean, torch.clamp(raw_std, self.min_log_std, self.max_log_std))


class Critic(nn.Module):
    def __init__(self, feature_dim: int, mlp: MlpSpec):
        super().__init__()
        self.net = Mlp(feature_dim, MlpSpec(mlp.layers, mlp.units, out_dim=1, zero_head=True))

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.net(features).squeeze(-1)


@dataclass
class ImaginedRollout:
    """Time-major rollout of ``N`` parallel trajectories over ``H`` steps.

    ``values`` come from the target critic; ``log_probs`` and ``entropy`` keep
    the actor's graph, and in the reparameterized case so do ``returns``.
    """

    states: LatentState
    features: torch.Tensor
    actions: torch.Tensor
    rewards: torch.Tensor
    values: torch.Tensor
    returns: torch.Tensor
    log_probs: torch.Tensor
    entropy: torch.Tensor

    @property
    def horizon(self) -> int:
        return int(self.rewards.shape[0])


@contextmanager
def frozen(*modules: nn.Module) -> Iterator[None]:
    """Temporarily stop gradients into the parameters of ``modules``."""
    params = [p for module in modules for p in module.parameters()]
    flags = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad_(False)
    try:
        yield
    finally:
        for p, flag in zip(params, flags):
            p.requires_grad_(flag)


def imagine(
    world: nn.Module,
    actor: Actor,
    target_critic: nn.Module,
    starts: LatentState,
    horizon: int = 15,
    generator: torch.Generator | None = None,
    reparam: bool = False,
    gamma: float = 0.95,
    lam: float = 0.95,
) -> ImaginedRollout:
    """Roll the prior forward under the actor from every start state.

    ``world`` must expose ``rssm.prior_step`` and ``reward(state)``; no
    observation is decoded.
    """
    state = starts.detach()
    states, actions, log_probs, entropies = [state], [], [], []
    for _ in range(horizon):
        features = state.features()
        dist = actor(features if reparam else features.detach())
        if reparam:
            action = dist.rsample(generator)
            log_probs.append(torch.zeros(action.shape[:-1], dtype=action.dtype, device=action.device))
        else:
            action = dist.sample(generator)
            log_probs.append(dist.log_prob(action))
        entropies.append(dist.entropy())
        state, _ = world.rssm.prior_step(state, action, generator)
        if not reparam:
            state = state.detach()
        states.append(state)
        actions.append(action)

    trajectory = LatentState.stack(states)
    features = trajectory.features()
    batch = starts.batch_shape
    if horizon:
        successor = getattr(world, "reward_from_successor", True)
        rewards = world.reward(trajectory[1:] if successor else trajectory[:-1])
        stacked_actions = torch.stack(actions)
        stacked_log_probs = torch.stack(log_probs)
        stacked_entropy = torch.stack(entropies)
    else:
        rewards = features.new_zeros((0, *batch))
        stacked_actions = features.new_zeros((0, *batch, actor.net.out_dim if actor.discrete else actor.net.out_dim // 2))
        stacked_log_probs = features.new_zeros((0, *batch))
        stacked_entropy = features.new_zeros((0, *batch))
    values = target_critic(features)
    returns = lambda_returns(rewards, values, gamma, lam)
    if not (torch.isfinite(rewards).all() and torch.isfinite(values).all()):
        raise NonFiniteError("rollout", "imagined rewards or values are not finite")
    return ImaginedRollout(
        states=trajectory,
        features=features,
        actions=stacked_actions,
        rewards=rewards,
        values=values,
        returns=returns,
        log_probs=stacked_log_probs,
        entropy=stacked_entropy,
    )


def critic_loss(critic: Critic, rollout: ImaginedRollout) -> torch.Tensor:
    """Mean squared error between ``v(s_t)`` and the stopped lambda-return for ``t < H``."""
    prediction = critic(rollout.features[:-1].detach())
    return (prediction - rollout.returns.detach()).pow(2).mean()


def actor_loss(rollout: ImaginedRollout, eta: float, baseline: torch.Tensor | None = None) -> torch.Tensor:
    """Reinforce objective with entropy bonus; the advantage is never differentiated."""
    if baseline is None:
        baseline = rollout.values[:-1]
    advantage = (rollout.returns - baseline).detach()
    return -(rollout.log_probs * advantage + eta * rollout.entropy).mean()


def actor_loss_reparam(rollout: ImaginedRollout, eta: float) -> torch.Tensor:
    """Backpropagate returns through sampled actions and the frozen dynamics."""
    return -(rollout.returns + eta * rollout.entropy).mean()


class ActorCritic(nn.Module):
    """Actor, critic and the periodically hard-copied target critic."""

    def __init__(self, feature_dim: int, action_space: ActionSpace, config: RunConfig):
        super().__init__()
        ac, general = config.actor_critic, config.general
        mlp = MlpSpec(layers=general.mlp_layers, units=general.mlp_units)
        self.actor = Actor(feature_dim, action_space, mlp, ac.min_log_std, ac.max_log_std)
        self.critic = Critic(feature_dim, mlp)
        self.target_critic = copy.deepcopy(self.critic).requires_grad_(False)
        self.horizon = ac.horizon
        self.gamma = ac.discount
        self.lam = ac.return_lambda
        self.eta = ac.eta
        self.baseline = ac.baseline
        self.target_interval = ac.target_interval
        if ac.gradient == "auto":
            self.reparam = not action_space.is_discrete
        else:
            self.reparam = ac.gradient == "reparam"
        self.critic_updates = 0
        self.target_updates = 0

    def target_update(self) -> None:
        self.target_critic.load_state_dict(self.critic.state_dict())
        self.target_updates += 1

    def imagine(
        self, world: nn.Module, starts: LatentState, generator: torch.Generator | None = None
    ) -> ImaginedRollout:
        with frozen(world):
            return imagine(
                world, self.actor, self.target_critic, starts, self.horizon, generator,
                reparam=self.reparam, gamma=self.gamma, lam=self.lam,
            )

    def train_step(
        self,
        world: nn.Module,
        starts: LatentState,
        actor_opt: ParamSet,
        critic_opt: ParamSet,
        generator: torch.Generator | None = None,
    ) -> dict[str, float]:
        """One imagination pass and one clipped update each for actor and critic."""
        with frozen(world):
            rollout = imagine(
                world, self.actor, self.target_critic, starts.detach(), self.horizon, generator,
                reparam=self.reparam, gamma=self.gamma, lam=self.lam,
            )
            if self.reparam:
                a_loss = actor_loss_reparam(rollout, self.eta)
            else:
                baseline = rollout.values[:-1]
                if self.baseline == "online":
                    baseline = self.critic(rollout.features[:-1].detach()).detach()
                a_loss = actor_loss(rollout, self.eta, baseline)
            c_loss = critic_loss(self.critic, rollout)

            metrics = {}
            if self.horizon:
                metrics.update(actor_opt.step(a_loss))
                metrics.update(critic_opt.step(c_loss))
                self.critic_updates += 1
                if self.critic_updates % self.target_interval == 0:
                    self.target_update()

        metrics.update({
            "actor_loss": float(a_loss.detach()) if self.horizon else 0.0,
            "critic_loss": float(c_loss.detach()) if self.horizon else 0.0,
            "entropy": float(rollout.entropy.detach().mean()) if self.horizon else 0.0,
            "return_mean": float(rollout.returns.detach().mean()) if self.horizon else 0.0,
            "value_mean": float(rollout.values.detach().mean()),
            "imagined_reward_mean": float(rollout.rewards.detach().mean()) if self.horizon else 0.0,
            "actor_version": actor_opt.version,
            "critic_version": critic_opt.version,
            "critic_updates": self.critic_updates,
            "target_updates": self.target_updates,
        })
        return metrics
