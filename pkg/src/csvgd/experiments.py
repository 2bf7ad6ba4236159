"""Experiment orchestration and artifact persistence.

Each command owns one output directory and emits deterministic artifacts:
a config snapshot, metrics.csv with one row per logged iteration, stage
checkpoints/graph dumps, and a summary.json.  Re-running with the same seed
overwrites byte-identical files (no timestamps anywhere).
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import condense as gc
from .engine import (Ensemble, SvgdConfig, active_param_count,
                     ensemble_distances, init_net_ensemble,
                     init_vector_ensemble, load_checkpoint, run_csvgd)
from .kernels import KernelSpec
from .likelihoods import MvnTarget, RegressionTarget, save_dataset
from .mechanics import (HyperelasticData, StressRegressionModel, TruthParams,
                        generate_data, icnn_template)
from .metrics import (GaussianSummary, bhattacharyya, moving_average,
                      pushforward_w1, sparsity_l1)
from .priors import PriorSpec

__all__ = [
    "RunConfig",
    "default_config",
    "load_config",
    "save_config",
    "cmd_mvn",
    "cmd_hyperelastic",
    "cmd_sweep",
    "cmd_condense_inspect",
    "hyperelastic_setup",
    "hyperelastic_noise_var",
    "mvn_ensemble_error",
    "MVN_MEAN",
    "MVN_PRECISION",
]

# the 3-D illustration target: a weakly identified third coordinate
MVN_MEAN = np.array([1.0, 2.0, 3.0])
MVN_PRECISION = np.array([[2.0, 1.0, 0.0],
                          [1.0, 2.0, 0.0],
                          [0.0, 0.0, 0.0025]])

METRICS_COLUMNS = ("iteration", "stage", "lambda", "mse", "w1_sum",
                   "bhattacharyya", "active_params", "median_pairwise_distance")


@dataclass
class RunConfig:
    """Complete experiment description; serializes losslessly to JSON."""

    experiment: str = "mvn"
    seed: int = 0
    out_dir: str = "runs/mvn"
    n_particles: int = 128
    # prior and kernel
    alpha: float = 1.0
    prior_lambda: float = 0.1
    beta: int = 2
    gamma: float = 1.0
    bandwidth_rule: str = "median"
    # engine
    step_size: float = 1e-2
    max_iters: int = 1500
    num_stages: int = 1
    schedule: str = "fixed"
    lambda_growth: float = 2.0
    mse_band: float = 0.1
    adagrad: bool = False
    tol: float = 1e-4
    axis_mask_threshold: float = 1e-2
    prior_dead_zone: float = 1e-3
    prune_epsilon: float = 1e-3
    condense: bool = True
    polish_iters: int | None = None
    metrics_every: int = 25
    # mvn
    init_scale: float = 1.0
    lambda_grid: tuple = ()
    # hyperelastic
    widths: tuple = (3, 30, 30, 1)
    n_train: int = 80
    n_test: int = 1001
    train_delta: float = 0.2
    test_range: float = 0.4
    noise: float = 0.1
    noise_floor: float = 0.05
    w1_ref_samples: int = 100
    # sweep
    sweep_lambdas: tuple = ()
    sweep_gammas: tuple = ()
    sweep_alphas: tuple = ()
    sweep_betas: tuple = ()

    _TUPLE_FIELDS = ("lambda_grid", "widths", "sweep_lambdas", "sweep_gammas",
                     "sweep_alphas", "sweep_betas")

    def __post_init__(self):
        for name in self._TUPLE_FIELDS:
            setattr(self, name, tuple(getattr(self, name)))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for name in self._TUPLE_FIELDS:
            d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def default_config(experiment: str) -> RunConfig:
    """Desk-scale defaults per experiment."""
    if experiment == "mvn":
        return RunConfig(experiment="mvn", out_dir="runs/mvn")
    if experiment == "hyperelastic":
        return RunConfig(
            experiment="hyperelastic", out_dir="runs/hyperelastic",
            n_particles=10, alpha=0.5, prior_lambda=0.05, beta=2,
            bandwidth_rule="median", step_size=2e-2, adagrad=True,
            max_iters=500, num_stages=8, metrics_every=50)
    if experiment == "sweep":
        return RunConfig(
            experiment="sweep", out_dir="runs/sweep", bandwidth_rule="fixed",
            n_particles=64, max_iters=800,
            sweep_lambdas=(0.01, 0.1, 1.0), sweep_gammas=(0.1, 1.0, 10.0))
    raise ValueError(f"unknown experiment {experiment!r}")


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=1))


def load_config(path) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text()))


def _engine_config(cfg: RunConfig, lam: float | None = None,
                   gamma: float | None = None, bandwidth_rule: str | None = None
                   ) -> SvgdConfig:
    lam = cfg.prior_lambda if lam is None else lam
    prior = PriorSpec(cfg.alpha, lam) if lam > 0 else None
    kernel = KernelSpec(cfg.beta, cfg.gamma if gamma is None else gamma,
                        cfg.bandwidth_rule if bandwidth_rule is None else bandwidth_rule)
    return SvgdConfig(
        step_size=cfg.step_size, max_iters=cfg.max_iters, kernel=kernel,
        prior=prior, tol=cfg.tol, axis_mask_threshold=cfg.axis_mask_threshold,
        prior_dead_zone=cfg.prior_dead_zone, adagrad=cfg.adagrad,
        schedule=cfg.schedule, lambda_growth=cfg.lambda_growth,
        mse_band=cfg.mse_band, num_stages=cfg.num_stages,
        prune_epsilon=cfg.prune_epsilon, condense_enabled=cfg.condense,
        polish_iters=cfg.polish_iters)


# ---------------------------------------------------------------------------
# small artifact helpers

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))


def _write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path, doc) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1))


def _run_stub(out_dir, cfg: RunConfig, command_line: str | None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.json")
    lines = [f"{cfg.experiment} run (seed {cfg.seed})"]
    if command_line:
        lines.append(f"command: {command_line}")
    lines.append("config snapshot: config.json")
    (out / "README.txt").write_text("\n".join(lines) + "\n")


class _MetricsLog:
    def __init__(self):
        self.rows = []

    def add(self, iteration, stage, lam, mse, w1_sum, bhatt, active, median_dist):
        self.rows.append((iteration, stage, lam, mse, w1_sum, bhatt, active,
                          median_dist))

    def write(self, path):
        _write_csv(path, METRICS_COLUMNS, self.rows)


# ---------------------------------------------------------------------------
# MVN experiment

def _mvn_moments(dims=None) -> GaussianSummary:
    cov = np.linalg.inv(MVN_PRECISION)
    if dims is None:
        return GaussianSummary(MVN_MEAN, cov)
    dims = list(dims)
    return GaussianSummary(MVN_MEAN[dims], cov[np.ix_(dims, dims)])


def mvn_ensemble_error(particles, dims=None) -> float:
    """Bhattacharyya distance of the particle cloud to the target moments.

    NaN for a single particle (no sample covariance).
    """
    P = np.atleast_2d(np.asarray(particles, dtype=float))
    if len(P) < 2:
        return float("nan")
    if dims is not None:
        P = P[:, list(dims)]
    return bhattacharyya(GaussianSummary.from_samples(P), _mvn_moments(dims))


def _run_mvn_once(cfg: RunConfig, lam: float, out_dir: Path | None,
                  gamma: float | None = None, bandwidth_rule: str | None = None):
    target = MvnTarget(MVN_MEAN, MVN_PRECISION)
    ensemble = init_vector_ensemble(MVN_MEAN.size, cfg.n_particles, cfg.seed,
                                    cfg.init_scale)
    econf = _engine_config(cfg, lam=lam, gamma=gamma, bandwidth_rule=bandwidth_rule)
    log = _MetricsLog()
    sparsity_rows = []

    def on_iteration(ens, info):
        if (ens.iteration - 1) % cfg.metrics_every:
            return
        bh = mvn_ensemble_error(ens.particles)
        log.add(ens.iteration, ens.stage, info["lam"], info["mse"], None, bh,
                active_param_count(ens, econf.prune_epsilon),
                info["median_distance"])
        sparsity_rows.append((ens.iteration, ens.stage, info["lam"],
                              sparsity_l1(ens.particles, [2])))

    def on_stage(s, ens, rep):
        if out_dir is not None:
            name = "polish" if s < 0 else f"{s:02d}"
            _write_csv(out_dir / f"particles_stage_{name}.csv",
                       [f"theta{i+1}" for i in range(ens.particles.shape[1])],
                       ens.particles)

    ensemble, report = run_csvgd(ensemble, target, econf,
                                 on_iteration=on_iteration, on_stage=on_stage)
    summary = {
        "lambda": lam,
        "bhattacharyya": mvn_ensemble_error(ensemble.particles),
        "bhattacharyya_theta12": mvn_ensemble_error(ensemble.particles, dims=(0, 1)),
        "sparsity_theta3": sparsity_l1(ensemble.particles, [2]),
        "mean": ensemble.particles.mean(axis=0).tolist(),
        "iterations": report.total_iterations,
    }
    if out_dir is not None:
        log.write(out_dir / "metrics.csv")
        _write_csv(out_dir / "sparsity.csv",
                   ("iteration", "stage", "lambda", "sparsity_theta3"),
                   sparsity_rows)
        _write_csv(out_dir / "particles_final.csv",
                   [f"theta{i+1}" for i in range(ensemble.particles.shape[1])],
                   ensemble.particles)
        _write_json(out_dir / "summary.json", summary)
    return ensemble, report, summary


def cmd_mvn(cfg: RunConfig, command_line: str | None = None) -> int:
    """Stein flow on the 3-D MVN illustration target; optional lambda grid."""
    out = Path(cfg.out_dir)
    _run_stub(out, cfg, command_line)
    lambdas = cfg.lambda_grid or (cfg.prior_lambda,)
    summaries = []
    for lam in lambdas:
        sub = out if len(lambdas) == 1 else out / f"lam_{lam:g}"
        sub.mkdir(parents=True, exist_ok=True)
        _, _, summary = _run_mvn_once(cfg, lam, sub)
        summaries.append(summary)
        print(f"mvn lambda={lam:g}: bhattacharyya={summary['bhattacharyya']:.6g} "
              f"sparsity_theta3={summary['sparsity_theta3']:.6g}")
    if len(summaries) > 1:
        _write_csv(out / "lambda_compare.csv",
                   ("lambda", "bhattacharyya", "sparsity_theta3"),
                   [(s["lambda"], s["bhattacharyya"], s["sparsity_theta3"])
                    for s in summaries])
    return 0


# ---------------------------------------------------------------------------
# hyperelastic experiment

def _w1_reference(data: HyperelasticData, noise: float, n_replicas: int,
                  seed: int) -> np.ndarray:
    """Noisy replicas of the truth pushforward on the test path, (points, 6, r)."""
    rng = np.random.default_rng(seed)
    S = data.test.outputs                       # (points, 6), noiseless
    eta = rng.standard_normal((n_replicas,) + S.shape)
    return np.transpose(S[None] * (1.0 + noise * eta), (1, 2, 0))


def _test_path_samples(ensemble: Ensemble, data: HyperelasticData,
                       model: StressRegressionModel) -> np.ndarray:
    """Model pushforward on the test path, (points, 6, n_particles)."""
    preds = [model.predict(net, data.test.inputs) for net in ensemble.nets()]
    return np.transpose(np.stack(preds), (1, 2, 0))


def hyperelastic_noise_var(cfg: RunConfig, train_outputs) -> float:
    """Likelihood variance tied to the data scale and size.

    (max(noise, floor) * RMS(outputs))^2 * n_components, so the misfit enters
    the log posterior as a per-component mean; with the raw component sum the
    sparsifying penalty would have to scale with the dataset size.
    """
    outputs = np.asarray(train_outputs)
    rms = float(np.sqrt(np.mean(outputs ** 2)))
    return (max(cfg.noise, cfg.noise_floor) * rms) ** 2 * outputs.size


def hyperelastic_setup(cfg: RunConfig):
    """Data, target, initial ensemble, W1 reference cloud, and engine config.

    Sub-seeds are derived from cfg.seed: data uses seed, initialization
    seed+1, reference noise replicas seed+2.
    """
    data = generate_data(TruthParams(), n_train=cfg.n_train, delta=cfg.train_delta,
                         noise_level=cfg.noise, seed=cfg.seed, n_test=cfg.n_test,
                         test_range=cfg.test_range)
    model = StressRegressionModel()
    target = RegressionTarget(data.train, hyperelastic_noise_var(cfg, data.train.outputs),
                              model)
    template = icnn_template(cfg.widths)
    ensemble = init_net_ensemble(template, cfg.n_particles, cfg.seed + 1)
    ref = _w1_reference(data, cfg.noise, cfg.w1_ref_samples, cfg.seed + 2)
    return data, target, ensemble, ref, _engine_config(cfg)


def cmd_hyperelastic(cfg: RunConfig, command_line: str | None = None) -> int:
    """Train the convex-potential ensemble on generated stress-strain data."""
    out = Path(cfg.out_dir)
    _run_stub(out, cfg, command_line)
    data, target, ensemble, ref, econf = hyperelastic_setup(cfg)
    save_dataset(data.train, out / "data_train.csv")
    save_dataset(data.test, out / "data_test.csv")
    model = target.model
    log = _MetricsLog()

    def w1_sum_now(ens):
        _, total = pushforward_w1(_test_path_samples(ens, data, model), ref)
        return total

    def on_iteration(ens, info):
        if (ens.iteration - 1) % cfg.metrics_every:
            return
        log.add(ens.iteration, ens.stage, info["lam"], info["mse"],
                w1_sum_now(ens), None,
                active_param_count(ens, econf.prune_epsilon),
                info["median_distance"])

    def on_stage(s, ens, rep):
        name = "polish" if s < 0 else f"{s:02d}"
        gdir = out / "graphs"
        gdir.mkdir(parents=True, exist_ok=True)
        for a, net in enumerate(ens.nets()):
            graph = gc.prune(gc.NetGraph.from_net(net), 0.0)
            gc.dump_graph(graph, gdir / f"stage_{name}_particle_{a:02d}.txt")

    ensemble, report = run_csvgd(ensemble, target, econf,
                                 checkpoint_dir=out / "checkpoints",
                                 on_iteration=on_iteration, on_stage=on_stage)

    per_point, w1_total = pushforward_w1(_test_path_samples(ensemble, data, model), ref)
    _write_csv(out / "w1_per_point.csv",
               ("delta", "f11", "w1", "w1_ma11"),
               zip(data.test_delta, data.test_f11, per_point,
                   moving_average(per_point, 11)))
    D = ensemble_distances(ensemble)
    med = float(np.median(D[np.triu_indices(len(D), 1)])) if len(D) > 1 else None
    log.add(ensemble.iteration, ensemble.stage,
            report.stages[-1].lam if report.stages else cfg.prior_lambda,
            report.stages[-1].final_mse if report.stages else None,
            w1_total, None, report.final_active_params, med)
    log.write(out / "metrics.csv")
    summary = {
        "w1_sum": w1_total,
        "active_params": report.final_active_params,
        "lambda_trajectory": report.lambda_trajectory,
        "total_iterations": report.total_iterations,
        "stages": [{"stage": r.stage, "lambda": r.lam, "iterations": r.iterations,
                    "mse": r.final_mse, "active_params": r.active_params}
                   for r in report.stages],
    }
    _write_json(out / "summary.json", summary)
    print(f"hyperelastic: w1_sum={w1_total:.6g} "
          f"active_params={report.final_active_params} "
          f"iterations={report.total_iterations}")
    return 0


# ---------------------------------------------------------------------------
# lambda x gamma survey

def cmd_sweep(cfg: RunConfig, command_line: str | None = None) -> int:
    """Cartesian grid over (alpha, beta, lambda, gamma); one CSV row per cell.

    Resumable: existing rows in cells.csv are reused; the file is rewritten
    in deterministic grid order at the end.
    """
    out = Path(cfg.out_dir)
    _run_stub(out, cfg, command_line)
    alphas = cfg.sweep_alphas or (cfg.alpha,)
    betas = cfg.sweep_betas or (cfg.beta,)
    lambdas = cfg.sweep_lambdas or (cfg.prior_lambda,)
    gammas = cfg.sweep_gammas or (cfg.gamma,)
    path = out / "cells.csv"
    header = ("alpha", "beta", "lambda", "gamma", "bhattacharyya", "sparsity_theta3")
    done = {}
    if path.exists():
        with open(path, newline="") as fh:
            for row in list(csv.reader(fh))[1:]:
                done[tuple(row[:4])] = row
    rows = []
    for alpha in alphas:
        for beta in betas:
            for lam in lambdas:
                for gamma in gammas:
                    key = tuple(_fmt(v) for v in (alpha, beta, lam, gamma))
                    if key in done:
                        rows.append(done[key])
                        continue
                    cell_cfg = dataclasses.replace(cfg, alpha=alpha, beta=int(beta))
                    _, _, s = _run_mvn_once(cell_cfg, lam, None, gamma=gamma,
                                            bandwidth_rule="fixed")
                    row = key + (_fmt(s["bhattacharyya"]), _fmt(s["sparsity_theta3"]))
                    rows.append(row)
                    with open(path, "a" if path.exists() else "w", newline="") as fh:
                        w = csv.writer(fh)
                        if fh.tell() == 0:
                            w.writerow(header)
                        w.writerow(row)
    _write_csv(path, header, rows)
    print(f"sweep: {len(rows)} cells -> {path}")
    return 0


# ---------------------------------------------------------------------------
# checkpoint inspection

def cmd_condense_inspect(checkpoint_path, out_dir, command_line: str | None = None) -> int:
    """Emit the ensemble distance matrix, per-layer weight samples, and graph
    dumps from a saved checkpoint."""
    state = load_checkpoint(checkpoint_path)
    ens = state.ensemble
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    D = ensemble_distances(ens)
    _write_csv(out / "distance_matrix.csv",
               [f"p{a}" for a in range(len(D))], D)
    if ens.template is not None:
        nets = ens.nets()
        for k in range(nets[0].n_links):
            rows = []
            for a, net in enumerate(nets):
                w = net.weights[k]
                for i in range(w.shape[0]):
                    for j in range(w.shape[1]):
                        rows.append((k, i, j, a, w[i, j]))
            _write_csv(out / f"weights_layer{k}.csv",
                       ("layer", "row", "col", "particle", "value"), rows)
        gdir = out / "graphs"
        gdir.mkdir(exist_ok=True)
        for a, net in enumerate(nets):
            graph = gc.prune(gc.NetGraph.from_net(net), 0.0)
            gc.dump_graph(graph, gdir / f"particle_{a:02d}.txt")
    print(f"condense-inspect: {len(D)} particles -> {out}")
    return 0
