"""Static figures for experiment reports (matplotlib, file output only)."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_setup", "plot_error_curves", "plot_reconstructions"]

_LABELS = {
    "cgne": "CGNE",
    "landweber": "Landweber",
    "sd": "steepest descent",
    "fbs": "FBS (quadratic)",
    "cp": "CP (TV)",
    "neumann": "Neumann series",
}


def _extent(grid):
    lo, hi = grid.coords[0], grid.coords[-1]
    return (lo, hi, lo, hi)


def _show(ax, values, grid, title, **kw):
    # axis 0 is x1, so transpose for imshow
    im = ax.imshow(values.T, origin="lower", extent=_extent(grid), **kw)
    ax.set_title(title, fontsize=9)
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    return im


def plot_setup(path, truth, obj_grid, c, a, sim_grid, sinogram=None):
    """Source, sound speed, damping and (optionally) the measured sinogram."""
    n = 4 if sinogram is not None else 3
    fig, axes = plt.subplots(1, n, figsize=(3.4 * n, 3.2))
    k = truth.shape[0]
    off = obj_grid.offset_in(sim_grid)
    crop = (slice(off, off + k), slice(off, off + k)) if off is not None else (slice(None),) * 2
    g = obj_grid if off is not None else sim_grid
    for ax, v, t in zip(axes, (truth, c[crop], a[crop]), ("source", "sound speed", "damping")):
        fig.colorbar(_show(ax, v, g, t, cmap="viridis"), ax=ax, fraction=0.046)
    if sinogram is not None:
        geom = sinogram.geom
        ax = axes[-1]
        im = ax.imshow(sinogram.values, aspect="auto", origin="lower", cmap="gray",
                       extent=(geom.s[0], geom.s[-1], geom.angles_deg[0], geom.angles_deg[-1]))
        ax.set_title("data", fontsize=9)
        ax.set_xlabel("s")
        ax.set_ylabel("angle (deg)")
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_error_curves(path, runs, title=""):
    """Relative error against iteration index, one line per run."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for name, run in runs.items():
        if not run.rel_errors:
            continue
        it = np.arange(1, len(run.rel_errors) + 1)
        ax.plot(it, run.rel_errors, label=_LABELS.get(name, name))
        k = run.best_index
        ax.plot([k], [run.best_error], "o", ms=4, color=ax.lines[-1].get_color())
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative $L^2$ error")
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_reconstructions(path, truth, images, grid):
    """Ground truth next to the best iterate of each solver, shared color scale."""
    n = len(images) + 1
    fig, axes = plt.subplots(1, n, figsize=(3.0 * n, 3.0))
    axes = np.atleast_1d(axes)
    vmin, vmax = float(truth.min()), float(truth.max())
    _show(axes[0], truth, grid, "ground truth", cmap="gray", vmin=vmin, vmax=vmax)
    for ax, (name, (img, err)) in zip(axes[1:], images.items()):
        _show(ax, img, grid, f"{_LABELS.get(name, name)}\nerror {err:.3f}", cmap="gray",
              vmin=vmin, vmax=vmax)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
