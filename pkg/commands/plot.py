"""Learning curves binned by wall time with one-standard-deviation bands."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from config.logging_config import METRICS_FILE, get_logger, print_clean_message, read_metrics  # noqa: E402

DEFAULT_METRIC = {"episode": "return", "segment": "reward_mean", "train": "wm_total", "eval": "mean_return"}
EVENT_MARKERS = {"place": "*", "stood_up": "o", "grasp": "^"}


def compute_binned_curve(
    times: np.ndarray, values: np.ndarray, bins: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean and standard deviation of ``values`` inside equal-width time bins.

    Empty bins are dropped. Returns ``(centers, means, stds)``.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if times.size == 0:
        return np.empty(0), np.empty(0), np.empty(0)
    edges = np.linspace(times.min(), times.max(), bins + 1)
    if edges[0] == edges[-1]:
        return np.array([times[0]]), np.array([values.mean()]), np.array([values.std()])
    which = np.clip(np.digitize(times, edges[1:-1]), 0, bins - 1)
    centers, means, stds = [], [], []
    for b in range(bins):
        members = values[which == b]
        if members.size:
            centers.append(0.5 * (edges[b] + edges[b + 1]))
            means.append(members.mean())
            stds.append(members.std())
    return np.array(centers), np.array(means), np.array(stds)


def cmd_plot(
    logdir: str,
    out: str | None = None,
    bins: int = 20,
    kind: str = "episode",
    metric: str | None = None,
) -> int:
    """Plot one metric of one record kind against wall-clock hours.

    Returns:
        int: Process exit code.
    """
    logger = get_logger()
    metrics_path = Path(logdir) / METRICS_FILE
    if not metrics_path.exists():
        print_clean_message(f"❌ Error: no metrics log at {metrics_path}")
        return 1
    metric = metric or DEFAULT_METRIC.get(kind, "return")
    records = [r for r in read_metrics(metrics_path, kind) if metric in r]
    if not records:
        print_clean_message(f"❌ Error: no {kind} records with {metric!r} in {metrics_path}")
        return 1

    hours = np.array([r["wall_time"] for r in records]) / 3600.0
    values = np.array([r[metric] for r in records], dtype=np.float64)
    centers, means, stds = compute_binned_curve(hours, values, bins)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(centers, means, color="tab:blue", label=metric)
    ax.fill_between(centers, means - stds, means + stds, color="tab:blue", alpha=0.25)
    for event, marker in EVENT_MARKERS.items():
        hits = [(h, v) for h, v, r in zip(hours, values, records) if r.get(event)]
        if hits:
            xs, ys = zip(*hits)
            ax.scatter(xs, ys, marker=marker, color="black", s=18, label=event, zorder=3)
    ax.set_xlabel("Wall-clock time (hours)")
    ax.set_ylabel(metric)
    ax.set_title(f"{kind} {metric}")
    ax.legend(loc="best")
    fig.tight_layout()

    out_path = Path(out) if out else Path(logdir) / f"{kind}_{metric}.png"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    logger.info(f"Plotted {len(records)} {kind} records into {out_path}")
    print_clean_message(f"✅ Wrote {out_path}")
    return 0
