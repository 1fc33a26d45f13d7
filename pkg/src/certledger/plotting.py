"""Figures for the ``estimate`` and ``run-scenario`` reports.

Rendering uses the non-interactive Agg backend, and each function writes one
PNG and returns its path.
"""
from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .capacity import GB, MB, YEAR_DAYS, CapacityParams, estimate_capacity  # noqa: E402
from .sim import ScenarioReport  # noqa: E402

# fixed metadata keeps the PNG bytes stable between runs
_PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_capacity(params: CapacityParams, out_dir: str | Path) -> Path:
    """Cumulative full-node and header-chain storage over the horizon."""
    days = [d * params.horizon_days / 100 for d in range(101)]
    full, headers = [], []
    for d in days:
        rep = estimate_capacity(CapacityParams(**{**params.__dict__, "horizon_days": max(d, 1e-9)}))
        full.append(rep.full_node_bytes_per_horizon / GB)
        headers.append(rep.header_bytes_per_horizon / MB)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot([d / YEAR_DAYS for d in days], full, color="tab:blue")
    ax1.set(xlabel="years", ylabel="GB", title="full node certificate storage")
    ax2.plot([d / YEAR_DAYS for d in days], headers, color="tab:orange")
    ax2.set(xlabel="years", ylabel="MB",
            title=f"header chain ({params.header_size_bytes:.0f} B headers)")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, Path(out_dir) / "capacity.png")


def plot_scenario(report: ScenarioReport, out_dir: str | Path) -> Path:
    """Events per block, stacked by kind, with handshake outcomes underneath."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    blocks = list(range(1, report.blocks + 1))
    kinds = sorted({e["kind"] for e in report.events})
    bottom = [0] * len(blocks)
    for kind in kinds:
        per_block = Counter(e["block"] for e in report.events if e["kind"] == kind)
        counts = [per_block.get(b, 0) for b in blocks]
        ax1.bar(blocks, counts, bottom=bottom, label=kind, width=1.0)
        bottom = [a + b for a, b in zip(bottom, counts)]
    ax1.set(ylabel="events", title=f"scenario {report.name} (seed {report.seed})")
    if kinds:
        ax1.legend(fontsize=7, loc="upper right")
    accepts = Counter(h["at"] for h in report.handshakes if h["decision"] == "Accept")
    rejects = Counter(h["at"] for h in report.handshakes if h["decision"] != "Accept")
    ax2.bar(blocks, [accepts.get(b, 0) for b in blocks], color="tab:green", label="Accept", width=1.0)
    ax2.bar(blocks, [-rejects.get(b, 0) for b in blocks], color="tab:red", label="Reject", width=1.0)
    ax2.set_yscale("symlog", linthresh=1)
    ax2.set(xlabel="block", ylabel="handshakes (rejects below 0)")
    ax2.legend(fontsize=7, loc="upper right")
    fig.tight_layout()
    return _save(fig, Path(out_dir) / f"scenario-{report.name}.png")


def plot_proof_scaling(sizes: Sequence[int], means: Sequence[float], out_dir: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(sizes, means, marker="o")
    ax.set(xlabel="entries in trie", ylabel="mean proof length (nodes)",
           title="inclusion proof size")
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    return _save(fig, Path(out_dir) / "proof-scaling.png")
