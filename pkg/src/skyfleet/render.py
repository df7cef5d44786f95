"""Rendering: top-down SVG snapshots and matplotlib training curves.

Snapshots are hand-assembled SVG so identical inputs produce identical
bytes; the per-run report figures go through matplotlib with a pinned
hash salt for the same reason.
"""

from pathlib import Path

from .config import ScenarioConfig
from .metrics import QoEReport
from .scenario import User, World

_PX_PER_M = 0.2
_MARGIN_PX = 20.0

_SERVICE_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c")  # throughput, edge, gathering
_AGENT_COLORS = ("#d62728", "#9467bd", "#17becf", "#8c564b", "#e377c2", "#bcbd22")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_snapshot(
    config: ScenarioConfig,
    world: World,
    users: list[User],
    record: dict,
    out_path: str | Path,
) -> None:
    """Draw one traced iteration: grid, buildings shaded by height,
    station markers, users, agent crosses, footprints, committed paths."""
    s = _PX_PER_M
    m = _MARGIN_PX
    cell = config.cell_size_m * s
    width = config.map_width_m * s + 2 * m
    height = config.map_height_m * s + 2 * m

    def px(x_m: float) -> str:
        return _fmt(m + x_m * s)

    def py(y_m: float) -> str:
        return _fmt(m + y_m * s)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>',
    ]

    for yy in range(config.grid_rows):
        for xx in range(config.grid_cols):
            h = float(world.building_height_m[yy, xx])
            if h <= 0:
                continue
            shade = 0.25 + 0.6 * (h / world.tallest_building_m if world.tallest_building_m else 0)
            parts.append(
                f'<rect x="{px(xx * config.cell_size_m)}" y="{py(yy * config.cell_size_m)}" '
                f'width="{_fmt(cell)}" height="{_fmt(cell)}" fill="#444444" '
                f'opacity="{_fmt(shade)}"/>'
            )

    grid_lines = []
    for xx in range(config.grid_cols + 1):
        grid_lines.append(
            f'<line x1="{px(xx * config.cell_size_m)}" y1="{py(0)}" '
            f'x2="{px(xx * config.cell_size_m)}" y2="{py(config.map_height_m)}"/>'
        )
    for yy in range(config.grid_rows + 1):
        grid_lines.append(
            f'<line x1="{px(0)}" y1="{py(yy * config.cell_size_m)}" '
            f'x2="{px(config.map_width_m)}" y2="{py(yy * config.cell_size_m)}"/>'
        )
    parts.append('<g stroke="#cccccc" stroke-width="0.5">' + "".join(grid_lines) + "</g>")

    for cx, cy in world.cs_cells:
        x0 = cx * config.cell_size_m + config.cell_size_m * 0.25
        y0 = cy * config.cell_size_m + config.cell_size_m * 0.25
        parts.append(
            f'<rect x="{px(x0)}" y="{py(y0)}" width="{_fmt(cell / 2)}" height="{_fmt(cell / 2)}" '
            f'fill="#ffd700" stroke="#806600" stroke-width="1"/>'
        )

    for u in users:
        parts.append(
            f'<circle cx="{px(u.pos_m[0])}" cy="{py(u.pos_m[1])}" r="3" '
            f'fill="{_SERVICE_COLORS[int(u.service)]}" opacity="0.9"/>'
        )

    half = config.cell_size_m / 2.0
    for i, agent in enumerate(record["agents"]):
        color = _AGENT_COLORS[i % len(_AGENT_COLORS)]
        ax = (agent["cell"][0] + 0.5) * config.cell_size_m
        ay = (agent["cell"][1] + 0.5) * config.cell_size_m
        parts.append(
            f'<circle cx="{px(ax)}" cy="{py(ay)}" r="{_fmt(config.footprint_radius_m * s)}" '
            f'fill="{color}" opacity="0.08" stroke="{color}" stroke-width="1" '
            f'stroke-opacity="0.5"/>'
        )
        if agent.get("path"):
            points = [f"{px(ax)},{py(ay)}"]
            for cx, cy, _ in agent["path"]:
                points.append(
                    f"{px((cx + 0.5) * config.cell_size_m)},{py((cy + 0.5) * config.cell_size_m)}"
                )
            parts.append(
                f'<polyline points="{" ".join(points)}" fill="none" stroke="{color}" '
                f'stroke-width="1.5" stroke-dasharray="4 3"/>'
            )
        arm = half * 0.8
        parts.append(
            f'<g stroke="{color}" stroke-width="2.5">'
            f'<line x1="{px(ax - arm)}" y1="{py(ay - arm)}" x2="{px(ax + arm)}" y2="{py(ay + arm)}"/>'
            f'<line x1="{px(ax - arm)}" y1="{py(ay + arm)}" x2="{px(ax + arm)}" y2="{py(ay - arm)}"/>'
            "</g>"
        )

    parts.append(
        f'<text x="{_fmt(m)}" y="{_fmt(m - 6)}" font-family="monospace" font-size="11" '
        f'fill="#333333">iteration {record["iteration"]}</text>'
    )
    parts.append("</svg>")
    Path(out_path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def render_training_curves(
    reports: list[QoEReport], out_path: str | Path, title: str = ""
) -> None:
    """Plot the three QoE metrics and per-agent mean reward against epochs."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "skyfleet"
    epochs = [r.epoch for r in reports]
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    axes[0, 0].plot(epochs, [r.qoe1_pct for r in reports], color="#1f77b4")
    axes[0, 0].set_ylabel("completion %")
    axes[0, 1].plot(epochs, [r.qoe2_iters for r in reports], color="#ff7f0e")
    axes[0, 1].set_ylabel("service delay [iterations]")
    axes[1, 0].plot(epochs, [r.qoe3_pct for r in reports], color="#2ca02c")
    axes[1, 0].set_ylabel("coverage %")
    n_agents = len(reports[0].mean_reward)
    for i in range(n_agents):
        axes[1, 1].plot(
            epochs,
            [r.mean_reward[i] for r in reports],
            label=f"agent {i}",
            color=_AGENT_COLORS[i % len(_AGENT_COLORS)],
        )
    axes[1, 1].set_ylabel("mean reward")
    if n_agents > 1:
        axes[1, 1].legend(fontsize=8)
    for ax in axes.flat:
        ax.set_xlabel("epoch")
        ax.grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Date": None} if str(out_path).endswith(".svg") else None)
    plt.close(fig)
