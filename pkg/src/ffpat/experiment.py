"""Run solvers on synthetic data and write a self-describing artifact directory."""
import configparser
import io
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as fio
from .pipeline import build_problem
from .recon import (StopRule, cgne, chambolle_pock_tv, fbs_quadratic, landweber,
                    neumann_series_recon, steepest_descent)

log = logging.getLogger(__name__)

__all__ = ["ExperimentResult", "run_solver", "run_experiment", "neumann_data"]

NOISE_RULE = "sigma = level * mean(|y|) over active samples, added after masking"


@dataclass
class ExperimentResult:
    out: Path
    problem: object
    runs: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


@contextmanager
def _stage(name):
    try:
        yield
    except Exception as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


def neumann_data(problem):
    """Exterior final-time pressure for the wave-only solver.

    ``exact`` uses the simulated field, ``fbp`` recovers it from the noisy
    sinogram by filtered backprojection (two-step inversion).
    """
    model = problem.model
    if problem.cfg.neumann_input == "exact":
        return model.exterior(model.forward_W(problem.truth))
    return model.exterior(problem.radon.fbp(problem.noisy.values, pad=problem.cfg.pad_filter))


def run_solver(problem, name, snapshot_every=0):
    cfg = problem.cfg
    A, y, truth = problem.A, problem.noisy.values, problem.truth
    common = dict(truth=truth, snapshot_every=snapshot_every)
    if name == "cgne":
        return cgne(A, y, stop=StopRule(cfg.cgne_iters), **common)
    if name == "landweber":
        nrm = problem.op_norm()
        return landweber(A, y, cfg.landweber_gamma / nrm**2, stop=StopRule(cfg.max_iters),
                         op_norm=nrm, **common)
    if name == "sd":
        return steepest_descent(A, y, stop=StopRule(cfg.max_iters), **common)
    if name == "fbs":
        nrm = problem.op_norm()
        return fbs_quadratic(A, y, cfg.fbs_lambda, cfg.fbs_step / nrm**2,
                             stop=StopRule(cfg.max_iters), op_norm=nrm, **common)
    if name == "cp":
        return chambolle_pock_tv(A, y, cfg.cp_lambda, stop=StopRule(cfg.max_iters),
                                 norm_iters=cfg.cp_norm_iters, seed=cfg.seed, **common)
    if name == "neumann":
        return neumann_series_recon(problem.model, neumann_data(problem), cfg.neumann_lambda,
                                    StopRule(cfg.neumann_iters), **common)
    raise ValueError(f"unknown solver {name!r}")


def _write_summary(path, cfg, summary):
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(cfg.to_ini())
    cp["summary"] = {k: str(v) for k, v in summary.items()}
    buf = io.StringIO()
    cp.write(buf)
    Path(path).write_text(buf.getvalue())


def run_experiment(cfg, out=None, figures=True):
    """Simulate data, run the configured solvers and write every artifact.

    Any exception carries a ``stage`` attribute naming the step that failed.
    """
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    with _stage("data"):
        problem = build_problem(cfg)
    obj, sim = cfg.object_grid, cfg.sim_grid
    spec = cfg.mask_spec()
    res = ExperimentResult(out, problem)
    with _stage("output"):
        (out / "config.ini").write_text(cfg.to_ini())
        fio.write_field(out / "truth.f64", problem.truth, obj, "source")
        fio.write_png(out / "truth.png", problem.truth)
        fio.write_field(out / "sound_speed.f64", problem.model.cfg.medium.c, sim, "sound speed")
        fio.write_field(out / "damping.f64", problem.model.cfg.medium.a, sim, "damping")
        fio.write_sinogram(out / "data_clean.sino", problem.clean, spec)
        fio.write_sinogram(out / "data_noisy.sino", problem.noisy, spec)
        if cfg.snapshots:
            snap_dir = out / "wave_snapshots"
            snap_dir.mkdir(exist_ok=True)
            model = problem.model
            f_sim = model.to_sim(problem.truth)

            def dump(step, u):
                fio.write_field(snap_dir / f"u_{step:05d}.f64", u, sim, f"pressure at step {step}")

            model.solve_forward(f_sim, -model.cfg.medium.c**2 * model.cfg.medium.a * f_sim,
                                snapshot=dump, snapshot_every=cfg.snapshots)
    noisy = problem.noisy
    summary = {
        "noise_rule": NOISE_RULE,
        "noise_level": cfg.noise,
        "data_mean_abs": float(np.mean(np.abs(problem.clean.values[noisy.mask]))),
        "active_samples": int(noisy.mask.sum()),
    }
    for name in cfg.solvers:
        log.info("running %s", name)
        with _stage(f"solver {name}"):
            run = run_solver(problem, name, cfg.snapshots)
        res.runs[name] = run
        with _stage("output"):
            fio.write_run_csv(out / f"{name}.csv", run)
            fio.write_timing_csv(out / f"{name}_timing.csv", run)
            fio.write_field(out / f"{name}_best.f64", run.best_x, obj, f"{name} best iterate")
            fio.write_png(out / f"{name}_best.png", run.best_x)
            for k, x in sorted(run.iterates.items()):
                fio.write_field(out / f"{name}_iter{k:04d}.f64", x, obj, f"{name} iterate {k}")
        summary[f"{name}_best_error"] = run.best_error
        summary[f"{name}_best_iter"] = run.best_index
        summary[f"{name}_final_error"] = run.rel_errors[-1]
        summary[f"{name}_iterations"] = run.iterations
        summary[f"{name}_wall_s"] = round(run.wall_times[-1], 3)
        summary[f"{name}_stop"] = run.stop_reason
        if "op_norm" in run.extra:
            summary[f"{name}_op_norm"] = run.extra["op_norm"]
    if problem._norm is not None:
        summary["op_norm_A"] = problem._norm
    summary["total_wall_s"] = round(time.perf_counter() - t_start, 3)
    if figures:
        with _stage("figures"):
            from . import plotting

            plotting.plot_setup(out / "setup.png", problem.truth, obj, problem.model.cfg.medium.c,
                                problem.model.cfg.medium.a, sim, noisy)
            lo, hi = cfg.angular_range
            plotting.plot_error_curves(out / "errors.png", res.runs,
                                       f"angles [{lo:g}, {hi:g}], noise {100 * cfg.noise:g}%")
            plotting.plot_reconstructions(
                out / "reconstructions.png", problem.truth,
                {k: (r.best_x, r.best_error) for k, r in res.runs.items()}, obj)
    with _stage("output"):
        _write_summary(out / "summary.txt", cfg, summary)
    res.summary = summary
    return res
