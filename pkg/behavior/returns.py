"""Bootstrapped lambda-returns over imagined trajectories."""
import torch


def lambda_returns(
    rewards: torch.Tensor, values: torch.Tensor, gamma: float = 0.95, lam: float = 0.95
) -> torch.Tensor:
    """Backward recursion ``V_t = r_t + gamma * ((1 - lam) * v_{t+1} + lam * V_{t+1})``.

    Args:
        rewards: ``(H, ...)`` rewards along the rollout.
        values: ``(H + 1, ...)`` critic values of the visited states.
        gamma: Discount.
        lam: Mixing weight between bootstrap and longer returns.

    Returns:
        torch.Tensor: ``(H, ...)`` returns; ``V_H`` is ``values[H]`` and is not included.
    """
    horizon = rewards.shape[0]
    if values.shape[0] != horizon + 1:
        raise ValueError(f"values need {horizon + 1} steps, got {values.shape[0]}")
    if horizon == 0:
        return rewards.new_zeros(rewards.shape)
    returns = []
    last = values[-1]
    for t in reversed(range(horizon)):
        last = rewards[t] + gamma * ((1 - lam) * values[t + 1] + lam * last)
        returns.append(last)
    return torch.stack(returns[::-1])
