"""Dreamer agent: world model, actor-critic, their optimizers and the learner's randomness."""
import numpy as np
import torch

from behavior.actor_critic import ActorCritic
from config.logging_config import get_logger
from config.run_config import RunConfig, get_device
from core.spaces import SpaceSpec
from networks.optim import ParamSet
from replay.buffer import SequenceBatch
from runtime.snapshot import PolicySnapshot
from worldmodel.model import WorldModel


class DreamerAgent:
    """Everything the learner stream owns.

    Attributes:
        world: World model trained on replayed sequences.
        behavior: Actor, critic and target critic trained in imagination.
        generator: Torch generator for latent and action sampling during training.
        sample_rng: Numpy generator for replay window sampling.
    """

    def __init__(self, config: RunConfig, spec: SpaceSpec, device: str | torch.device = "cpu"):
        self.config = config
        self.spec = spec
        self.device = torch.device(device)
        seed = config.runtime.seed
        opt = config.optimizer

        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.world = WorldModel(spec, config).to(self.device)
            self.behavior = ActorCritic(self.world.rssm.feature_dim, spec.action, config).to(self.device)

        self.world_opt = ParamSet("world_model", {"world": self.world}, opt.lr, opt.adam_eps, opt.grad_clip)
        self.actor_opt = ParamSet("actor", {"actor": self.behavior.actor}, opt.lr, opt.adam_eps, opt.grad_clip)
        self.critic_opt = ParamSet("critic", {"critic": self.behavior.critic}, opt.lr, opt.adam_eps, opt.grad_clip)

        self.generator = torch.Generator(device="cpu").manual_seed(seed)
        self.sample_rng = np.random.default_rng(seed)
        self.learner_steps = 0

    def train(self, batch: SequenceBatch) -> dict[str, float]:
        """One world-model update followed by one actor-critic update on its posterior states."""
        tensors = batch.to_torch(self.device)
        states, metrics = self.world.train_step(tensors, self.world_opt, self.generator)
        metrics.update(self.behavior.train_step(
            self.world, states.flatten(), self.actor_opt, self.critic_opt, self.generator
        ))
        self.learner_steps += 1
        metrics["learner_step"] = self.learner_steps
        return metrics

    def snapshot(self) -> PolicySnapshot:
        """Immutable copy of the encoder, dynamics and actor parameters."""
        return PolicySnapshot.capture(self.learner_steps, self.world, self.behavior.actor)

    def state_tensors(self) -> dict[str, torch.Tensor]:
        """Every parameter, target-critic weight and optimizer moment by name."""
        tensors = {}
        for param_set in (self.world_opt, self.actor_opt, self.critic_opt):
            tensors.update(param_set.state_tensors())
        for name, value in self.behavior.target_critic.state_dict().items():
            tensors[f"target_critic/{name}"] = value.detach().cpu().clone().contiguous()
        tensors["rng/torch"] = self.generator.get_state().clone()
        return tensors

    def load_state_tensors(self, tensors: dict[str, torch.Tensor], counters: dict[str, int]) -> None:
        self.world_opt.load_state_tensors(tensors, counters["world_version"])
        self.actor_opt.load_state_tensors(tensors, counters["actor_version"])
        self.critic_opt.load_state_tensors(tensors, counters["critic_version"])
        target = {
            name[len("target_critic/"):]: value
            for name, value in tensors.items() if name.startswith("target_critic/")
        }
        self.behavior.target_critic.load_state_dict(target)
        self.generator.set_state(tensors["rng/torch"].clone())
        self.behavior.critic_updates = counters["critic_updates"]
        self.behavior.target_updates = counters["target_updates"]
        self.learner_steps = counters["learner_steps"]

    def counters(self) -> dict[str, int]:
        return {
            "learner_steps": self.learner_steps,
            "world_version": self.world_opt.version,
            "actor_version": self.actor_opt.version,
            "critic_version": self.critic_opt.version,
            "critic_updates": self.behavior.critic_updates,
            "target_updates": self.behavior.target_updates,
        }


def create_dreamer_agent(config: RunConfig, spec: SpaceSpec, device: str | None = None) -> DreamerAgent:
    """Create the agent on the configured device.

    Returns:
        DreamerAgent: Freshly initialized agent.
    """
    logger = get_logger()
    device = device or get_device()
    agent = DreamerAgent(config, spec, device)
    n_world = sum(p.numel() for p in agent.world.parameters())
    n_actor = sum(p.numel() for p in agent.behavior.actor.parameters())
    n_critic = sum(p.numel() for p in agent.behavior.critic.parameters())
    logger.info(
        f"✅ Created agent on {device}: world model {n_world:,} params, "
        f"actor {n_actor:,}, critic {n_critic:,}"
    )
    return agent
