"""``train`` command: build the run config and launch the concurrent session."""
from config.logging_config import get_logger, print_clean_message
from config.run_config import load_run_config
from core.errors import DreamerError
from runtime.session import run_training


def cmd_train(
    config: str | None,
    logdir: str,
    overrides: list[str] | None = None,
    seed: int | None = None,
    steps: int | None = None,
    learner_steps: int | None = None,
    resume: str | None = None,
) -> int:
    """Train until a budget or a signal stops the run.

    Returns:
        int: Process exit code.
    """
    logger = get_logger()
    try:
        run_config = load_run_config(config, overrides)
        if seed is not None:
            run_config.runtime.seed = seed
        if steps is not None:
            run_config.runtime.env_steps = steps
        if learner_steps is not None:
            run_config.runtime.learner_steps = learner_steps
        run_config.validate()
        print_clean_message(f"🚀 Training {run_config.env.name} (seed {run_config.runtime.seed}) into {logdir}")
        summary = run_training(run_config, logdir, resume)
    except (DreamerError, FileNotFoundError) as e:
        print_clean_message(f"❌ Error: {e}")
        logger.error(f"Training failed: {e}", exc_info=True)
        return 1
    except KeyboardInterrupt:
        print_clean_message("\n👋 Interrupted.")
        return 130

    print_clean_message(
        f"✅ Finished after {summary.env_steps} environment steps, {summary.learner_steps} learner steps "
        f"and {summary.episodes} episodes"
    )
    print_clean_message(f"Checkpoint: {summary.checkpoint}")
    return 0
