"""SVG report figures, one set per opponent.

Output is byte-stable: the SVG id salt is fixed and no date is embedded.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SVG_RC = {"svg.hashsalt": "dyadlab", "svg.fonttype": "none"}
SVG_METADATA = {"Date": None, "Creator": None}


def _title(games: dict, name: str) -> str:
    return games.get(name, {}).get("title") or name


def _ordered(values) -> list:
    return list(dict.fromkeys(values))


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)


def efficacy_bars(opponent: str, cells: list, games: dict, path: Path) -> None:
    models = _ordered(e["model"] for e, _, _ in cells)
    game_names = _ordered(e["game"] for e, _, _ in cells)
    value = {(e["model"], e["game"]): s["efficacy"] for e, s, _ in cells}
    width = 0.8 / len(models)
    fig, ax = plt.subplots(figsize=(8, 4))
    for i, model in enumerate(models):
        xs = [g + (i - (len(models) - 1) / 2) * width for g in range(len(game_names))]
        ys = [value.get((model, name), 0.0) for name in game_names]
        ax.bar(xs, ys, width, label=model)
    ax.set_xticks(range(len(game_names)), [_title(games, n) for n in game_names])
    ax.set_ylabel("mean reward per round")
    ax.set_title(f"Efficacy vs {opponent}")
    ax.legend(fontsize="small")
    fig.tight_layout()
    _save(fig, path)


def series_lines(opponent: str, cells: list, games: dict, key: str, ylabel: str,
                 path: Path) -> bool:
    """One panel per game, one line per model; False if no cell has the series."""
    cells = [c for c in cells if key in c[2]]
    if not cells:
        return False
    game_names = _ordered(e["game"] for e, _, _ in cells)
    fig, axes = plt.subplots(1, len(game_names), figsize=(3.2 * len(game_names), 3.2),
                             sharey=True, squeeze=False)
    for ax, name in zip(axes[0], game_names):
        for e, _, series in cells:
            if e["game"] == name:
                ax.plot(range(len(series[key])), series[key], linewidth=0.8, label=e["model"])
        ax.set_title(_title(games, name))
        ax.set_xlabel("round")
    axes[0][0].set_ylabel(ylabel)
    axes[0][-1].legend(fontsize="small")
    fig.suptitle(f"{ylabel} vs {opponent}")
    fig.tight_layout()
    _save(fig, path)
    return True


def write_experiment_plots(cells: list, out_dir: Path, games: dict) -> list[Path]:
    """``cells`` holds ``(manifest_entry, summary, series)`` triples."""
    plot_dir = Path(out_dir) / "plots"
    plot_dir.mkdir(parents=True, exist_ok=True)
    written = []
    with plt.rc_context(SVG_RC):
        for opponent in _ordered(e["opponent"] for e, _, _ in cells):
            mine = [c for c in cells if c[0]["opponent"] == opponent]
            path = plot_dir / f"{opponent}_efficacy.svg"
            efficacy_bars(opponent, mine, games, path)
            written.append(path)
            path = plot_dir / f"{opponent}_surprisal.svg"
            if series_lines(opponent, mine, games, "surprisal", "mean surprisal (bits)", path):
                written.append(path)
            path = plot_dir / f"{opponent}_prediction_accuracy.svg"
            if series_lines(opponent, mine, games, "prediction_accuracy", "prediction accuracy", path):
                written.append(path)
    return written
