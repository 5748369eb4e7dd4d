"""SVG figure rendering for reports.

Figures are written with a fixed hash salt and no embedded date, so the
same data always produces byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SVG_KW = dict(format="svg", metadata={"Date": None})
_RC = {"svg.hashsalt": "teegrade"}


def save_scatter(path, rows, score_label: str, title: str = "") -> None:
    """Per-video predicted-vs-true scatter with error bars of one sigma."""
    truths = [r[1] for r in rows]
    preds = [r[2] for r in rows]
    sigmas = [r[3] for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 4.2))
        lo = min(min(truths), min(preds))
        hi = max(max(truths), max(preds))
        pad = 0.05 * (hi - lo) if hi > lo else 1.0
        ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], "k--", lw=0.8, zorder=1)
        ax.errorbar(
            truths, preds, yerr=sigmas, fmt="o", ms=4, lw=0.8, capsize=2,
            color="tab:blue", ecolor="tab:gray", zorder=2,
        )
        ax.set_xlabel(f"manual {score_label}")
        ax.set_ylabel(f"estimated {score_label}")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, **_SVG_KW)
        plt.close(fig)


def save_loss_curve(path, history, title: str = "training loss") -> None:
    epochs = [st.epoch for st in history]
    losses = [st.train_loss for st in history]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        ax.plot(epochs, losses, "-o", ms=3, color="tab:blue", label="train loss")
        vals = [st.val_rmse for st in history if st.val_rmse is not None]
        if vals and len(vals) == len(history):
            ax2 = ax.twinx()
            ax2.plot(epochs, vals, "-s", ms=3, color="tab:orange", label="val RMSE")
            ax2.set_ylabel("val RMSE")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, **_SVG_KW)
        plt.close(fig)


def save_agreement_bars(path, per_view: dict, title: str = "inter-rater agreement") -> None:
    """Per-view bar chart of ICC(2,k) and alpha."""
    views = sorted(per_view, key=int)
    icc2k = [per_view[v]["icc2_k"] for v in views]
    alpha = [per_view[v]["alpha"] for v in views]
    x = np.arange(len(views))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 3.4))
        ax.bar(x - 0.18, icc2k, width=0.36, label="ICC(2,k)", color="tab:blue")
        ax.bar(x + 0.18, alpha, width=0.36, label="alpha", color="tab:orange")
        ax.set_xticks(x, [str(v) for v in views])
        ax.set_xlabel("view")
        ax.set_ylim(0.0, 1.05)
        ax.legend(loc="lower right")
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, **_SVG_KW)
        plt.close(fig)
