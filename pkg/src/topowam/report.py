"""Offline figures written next to the CSV outputs (Agg backend, PNG files)."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .body import LANDMARK_CURVES  # noqa: E402

plt.rcParams["figure.dpi"] = 100
plt.rcParams["savefig.dpi"] = 150
plt.rcParams["font.size"] = 10

CURVE_COLORS = {"r_r": "tab:red", "r_l": "tab:blue", "h_c": "k", "h_arm": "tab:green",
                "h_l": "tab:purple", "h_r": "tab:orange"}


def plot_training(episode_rows, eval_rows, path, smooth_fn):
    """Smoothed mean reward per episode and greedy final Γ of the online evaluations."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.8))
    if episode_rows:
        ep = np.array([int(r["episode"]) for r in episode_rows])
        rew = np.array([float(r["mean_reward"]) for r in episode_rows])
        ax1.plot(ep, rew, color="0.8", lw=0.6, label="raw")
        ax1.plot(ep, smooth_fn(rew), color="tab:blue", lw=1.2, label="smoothed")
        ax1.legend(loc="lower right")
    ax1.set_xlabel("episode")
    ax1.set_ylabel("mean reward")
    if eval_rows:
        ax2.plot([int(r["episode"]) for r in eval_rows], [float(r["greedy_final_gamma"]) for r in eval_rows],
                 "o-", ms=2, lw=0.8)
    ax2.axhline(1.5, color="0.5", ls="--", lw=0.8)
    ax2.set_xlabel("episode")
    ax2.set_ylabel("greedy final total linking")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_gamma_profile(step_rows, path, title=""):
    steps = [r["step"] for r in step_rows]
    mean = np.array([r["mean_gamma"] for r in step_rows])
    lo = np.array([r["ci_low"] for r in step_rows])
    hi = np.array([r["ci_high"] for r in step_rows])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(steps, mean, "o-", ms=3)
    ax.fill_between(steps, lo, hi, alpha=0.3)
    ax.axhline(1.5, color="0.5", ls="--", lw=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("total linking")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_ablation(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    colors = {"WL": "tab:blue", "W": "tab:orange", "P": "tab:green"}
    for variant, color in colors.items():
        mine = [r for r in rows if r["variant"] == variant]
        for seed in sorted({r["seed"] for r in mine}):
            pts = [r for r in mine if r["seed"] == seed]
            x = [r["episode"] for r in pts]
            y = [r["smoothed"] for r in pts]
            if seed == "mean":
                ax.plot(x, y, color=color, lw=1.6, label=variant)
            else:
                ax.plot(x, y, color=color, lw=0.5, alpha=0.4)
    ax.set_xlabel("episode")
    ax.set_ylabel("smoothed mean reward")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_rollout(records, scenario, path):
    """3D view of the final step's curves, with the Γ trace inset."""
    final = records[-1]
    fig = plt.figure(figsize=(9, 4.5))
    ax = fig.add_subplot(1, 2, 1, projection="3d")
    landmarks = set(LANDMARK_CURVES[scenario])
    for name, pts in final["curves"].items():
        p = np.asarray(pts)
        ax.plot(p[:, 0], p[:, 1], p[:, 2], color=CURVE_COLORS.get(name, "0.3"),
                lw=2.0 if name in landmarks else 1.0, marker="o", ms=2, label=name)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    ax.legend(fontsize=7, loc="upper left")
    ax.set_title(f"final total linking {final['gamma']:.2f}")
    ax2 = fig.add_subplot(1, 2, 2)
    ax2.plot([r["step"] for r in records], [r["gamma"] for r in records], "o-", ms=3)
    ax2.axhline(1.5, color="0.5", ls="--", lw=0.8)
    ax2.set_xlabel("step")
    ax2.set_ylabel("total linking")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
