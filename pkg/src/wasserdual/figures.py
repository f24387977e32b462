"""Figure rendering for report outputs.

Every CLI command that writes tables also renders the matching figure next
to them; figures are a convenience view, the CSV files stay authoritative.
"""

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_DPI = 150


def save_constants_figure(rows, path: str) -> None:
    """K_C and K_G against p; the infinite exponent is drawn as the last tick."""
    finite = [r for r in rows if math.isfinite(r["p"])]
    inf_rows = [r for r in rows if math.isinf(r["p"])]
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [r["p"] for r in finite]
    ax.plot(xs, [r["K_C"] for r in finite], "o-", label="$K_C(p)$ (transport)")
    ax.plot(xs, [r["K_G"] for r in finite], "s--", label="$K_G(q)$ (gradient)")
    if inf_rows:
        x_inf = (max(xs) if xs else 1.0) * 1.5 + 0.5
        ax.plot([x_inf], [inf_rows[0]["K_C"]], "o", color="C0")
        ax.plot([x_inf], [inf_rows[0]["K_G"]], "s", color="C1")
        ax.set_xticks(list(xs) + [x_inf])
        ax.set_xticklabels([f"{x:g}" for x in xs] + [r"$\infty$"])
    ax.set_xlabel("p")
    ax.set_ylabel("best constant")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_wp_curve_figure(p_values, w_values, w_inf, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(p_values, w_values, "o-", label="$W_p$")
    ax.axhline(w_inf, color="C3", linestyle=":", label="$W_\\infty$")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("p")
    ax.set_ylabel("transport distance")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_field_evolution_figure(positions, fields: dict, path: str) -> None:
    """Overlay of scalar fields (label -> values) against 1-d positions."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, values in fields.items():
        ax.plot(positions, values, label=label)
    ax.set_xlabel("position")
    ax.set_ylabel("value")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_cloud_figure(cloud, path: str, max_points: int = 4000) -> None:
    """Horizontal scatter of a diffusion cloud, colored by the first area coordinate."""
    k = min(max_points, cloud.size)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    sc = ax.scatter(
        cloud.x[:k, 0],
        cloud.x[:k, 1] if cloud.n > 1 else cloud.z[:k, 0],
        c=cloud.z[:k, 0] if cloud.z.shape[1] else None,
        s=4,
        alpha=0.5,
        cmap="coolwarm",
    )
    if cloud.z.shape[1]:
        fig.colorbar(sc, ax=ax, label="area coordinate")
    ax.plot([cloud.start.x[0]], [cloud.start.x[1] if cloud.n > 1 else cloud.start.z[0]], "k*", markersize=12)
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$" if cloud.n > 1 else "$z$")
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_margin_figure(margins, path: str, title: str = "margins") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(margins, bins=40, color="C0", alpha=0.8)
    ax.axvline(0.0, color="C3", linestyle=":")
    ax.set_xlabel("margin")
    ax.set_ylabel("count")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_monotonicity_figure(p_values, rows, path: str) -> None:
    """One W_p-vs-p curve per pair from a monotonicity table."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for row in rows:
        ax.plot(p_values, row[3:-1], "o-", alpha=0.6, label=f"({row[0]},{row[1]})")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("p")
    ax.set_ylabel("$W_p(P_x, P_y)$")
    if len(rows) <= 8:
        ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
