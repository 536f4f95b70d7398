"""Optional figure rendering next to the delimited CLI output.

Matplotlib is imported lazily with the Agg backend so headless runs work;
the CSV remains the primary, schema-stable artifact and these figures are
purely a convenience for quick inspection.
"""

from __future__ import annotations


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_propagate_figure(path, times, names, values):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    if names:
        for k, name in enumerate(names):
            ax.plot(times, [row[k] for row in values], label=name)
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("t")
    ax.set_ylabel("observables")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_bench_figure(path, header, rows):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    i_scheme = header.index("scheme")
    i_err = header.index("error")
    i_mv = header.index("matvecs")
    by_scheme: dict = {}
    for row in rows:
        by_scheme.setdefault(row[i_scheme], []).append(
            (float(row[i_mv]), float(row[i_err]))
        )
    for name, pts in sorted(by_scheme.items()):
        pts.sort()
        ax.loglog([p[0] for p in pts], [max(p[1], 1e-17) for p in pts],
                  marker="o", label=name)
    ax.set_xlabel("matvecs")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_stability_figure(path, rows):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    xs = [r[0] for r in rows]
    ys = [r[1] for r in rows]
    stable = [bool(r[3]) for r in rows]
    ax.scatter(
        [x for x, s in zip(xs, stable) if s],
        [y for y, s in zip(ys, stable) if s],
        s=8, c="tab:blue", label="stable",
    )
    ax.scatter(
        [x for x, s in zip(xs, stable) if not s],
        [y for y, s in zip(ys, stable) if not s],
        s=8, c="tab:red", label="unstable",
    )
    ax.set_xlabel("(omega0/Omega)^2")
    ax.set_ylabel("xi/Omega^2")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
