"""Decode open-loop imagination next to the real future as image strips and an animation."""
from pathlib import Path

import imageio.v2 as imageio
import numpy as np
import torch

from config.logging_config import get_logger, print_clean_message
from config.run_config import RunConfig
from core.errors import ConfigError, DreamerError
from envs.registry import make_env
from runtime.actor import PolicyRunner
from runtime.checkpoint import read_manifest, restore_agent

DEFAULT_STRIDE = 2
SEPARATOR = 2


def imagined_frame_indices(horizon: int, stride: int = DEFAULT_STRIDE) -> list[int]:
    """Indices into an imagined sequence of ``horizon`` states kept for display."""
    if stride <= 0:
        raise ValueError(f"stride must be positive, got {stride}")
    return list(range(0, horizon, stride))


def to_uint8(frames: np.ndarray) -> np.ndarray:
    if frames.dtype == np.uint8:
        return frames
    return (np.clip(frames, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _as_rgb(frame: np.ndarray) -> np.ndarray:
    return np.repeat(frame, 3, axis=-1) if frame.shape[-1] == 1 else frame[..., :3]


def tile_strip(rows: list[np.ndarray]) -> np.ndarray:
    """Stack rows of frames ``(N, H, W, C)`` into one image with thin separators."""
    lines = []
    for frames in rows:
        pieces = []
        for frame in frames:
            pieces.append(_as_rgb(frame))
            pieces.append(np.zeros((frame.shape[0], SEPARATOR, 3), dtype=np.uint8))
        lines.append(np.concatenate(pieces[:-1], axis=1))
        lines.append(np.zeros((SEPARATOR, lines[-1].shape[1], 3), dtype=np.uint8))
    return np.concatenate(lines[:-1], axis=0)


def run_imagination(
    checkpoint: str | Path,
    context: int = 5,
    horizon: int = 15,
    stride: int = DEFAULT_STRIDE,
    rows: int = 1,
    seed: int = 0,
    device: str = "cpu",
) -> dict[str, np.ndarray]:
    """Warm the posterior on ``context`` real steps, then imagine ``horizon`` steps open-loop.

    The policy's actions drive both the real environment and the imagination,
    so the two rows of each pair are directly comparable.

    Returns:
        ``truth`` and ``imagined`` uint8 frames shaped ``(rows, frames, H, W, C)``.
    """
    if context < 1:
        raise ConfigError("context", "at least one context step is required")
    manifest = read_manifest(checkpoint)
    config = RunConfig.from_dict(manifest["config"])
    env = make_env(config.env.name, config.env.params, seed, config.world_model.image_size,
                   config.env.upright_unit_range)
    if not env.spec.image_keys:
        raise ConfigError("env.name", f"{config.env.name} has no image modality to decode")
    key = env.spec.image_keys[0]
    agent = restore_agent(checkpoint, env.spec, device=device)
    world = agent.world
    runner = PolicyRunner(env.spec, config, seed=seed, device=device)
    runner.sync(agent.snapshot())
    generator = torch.Generator(device="cpu").manual_seed(seed)
    keep = imagined_frame_indices(horizon, stride)

    truth_rows, imagined_rows = [], []
    for _ in range(rows):
        obs = env.reset()
        observations, actions, firsts = [obs], [env.spec.action.null()], [True]
        for t in range(context + horizon - 1):
            runner.observe(obs, actions[-1], t == 0)
            action = runner.act(deterministic=True)
            obs, _, _ = env.step(env.spec.action.to_env(action))
            observations.append(obs)
            actions.append(action)
            firsts.append(False)

        with torch.no_grad():
            batch = {name: torch.as_tensor(np.stack([o[name] for o in observations[:context]]))[None]
                     for name in env.spec.names}
            embed = world.encode(batch)
            action_t = torch.as_tensor(np.stack(actions), dtype=torch.float32)[None]
            first_t = torch.as_tensor(firsts[:context])[None]
            states, _ = world.rssm.observe(embed, action_t[:, :context], first_t, generator)
            decoded = world.imagine_decode(states[:, -1], action_t[:, context:], horizon, generator)
        imagined = to_uint8(decoded[key][0].cpu().numpy())
        truth = np.stack([o[key] for o in observations[context:]])
        truth_rows.append(to_uint8(truth)[keep])
        imagined_rows.append(imagined[keep])
    env.close()
    return {"truth": np.stack(truth_rows), "imagined": np.stack(imagined_rows)}


def cmd_imagine(
    checkpoint: str,
    context: int = 5,
    horizon: int = 15,
    out: str = "imagination.png",
    stride: int = DEFAULT_STRIDE,
    rows: int = 1,
    seed: int = 0,
) -> int:
    """Write a PNG strip (truth above imagination per row) and a side-by-side GIF.

    Returns:
        int: Process exit code.
    """
    logger = get_logger()
    try:
        frames = run_imagination(checkpoint, context, horizon, stride, rows, seed)
    except (DreamerError, ValueError) as e:
        print_clean_message(f"❌ Error: {e}")
        logger.error(f"Imagination failed: {e}", exc_info=True)
        return 1

    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    strip_rows = []
    for truth, imagined in zip(frames["truth"], frames["imagined"]):
        strip_rows.extend([truth, imagined])
    if frames["truth"].shape[1] == 0:
        print_clean_message("❌ Error: horizon 0 leaves nothing to decode")
        return 1
    imageio.imwrite(out_path, tile_strip(strip_rows))
    gif_frames = [
        tile_strip([frames["truth"][:, i], frames["imagined"][:, i]])
        for i in range(frames["truth"].shape[1])
    ]
    gif_path = out_path.with_suffix(".gif")
    imageio.mimsave(gif_path, gif_frames, duration=0.2)
    print_clean_message(f"✅ Wrote {out_path} and {gif_path}")
    return 0
