"""Experiment orchestration: build, run, and emit records.csv + summary.json.

Outputs are deterministic functions of (config, seed): floats are written
with shortest round-trip precision and the per-row wall-time column is
left empty so repeated runs of the same config are byte-identical.
Measured timings stay on the in-memory records and the summary carries
the total.

Substreams of the run seed are fixed by key: 0 initializes parameters,
1 samples batches (inside the run loop), 2 generates synthetic problem
data, 3 shuffles for subset selection.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, QuadraticSpec, RateSpec
from .datasets import from_idx, subset
from .errors import ConfigError
from .optimizers import FixedDecayRate, FixedRate, PlsRate, TrainRecord, run_optimizer
from .problems import MlpLsrProblem, QuadraticProblem, finite_diff_grad, glorot_init
from .rng import SeededRng

INIT_STREAM = 0
BATCH_STREAM = 1
PROBLEM_STREAM = 2
SHUFFLE_STREAM = 3

GRADCHECK_GATE = 1e-4


def build_problem(cfg: ExperimentConfig):
    """Instantiate the objective, initial point, and test-loss closure."""
    root = SeededRng(cfg.seed)
    if isinstance(cfg.problem, QuadraticSpec):
        spec = cfg.problem
        problem = QuadraticProblem.random(
            spec.dim, spec.n_samples, spec.curvatures, spec.center_scale,
            root.spawn(PROBLEM_STREAM),
        )
        x0 = root.spawn(INIT_STREAM).uniform_array(spec.dim, -spec.x0_scale, spec.x0_scale)
        return problem, x0, None

    spec = cfg.problem
    dataset = from_idx(
        spec.images,
        spec.labels,
        spec.test_images,
        spec.test_labels,
        num_classes=spec.num_classes,
    )
    if cfg.limit is not None:
        dataset = subset(dataset, cfg.limit, root.spawn(SHUFFLE_STREAM))
    if dataset.d != spec.layers[0]:
        raise ConfigError(
            "problem.layers", f"first layer size {spec.layers[0]} != data width {dataset.d}"
        )
    targets = dataset.train_targets(spec.task)
    problem = MlpLsrProblem(spec.layers, dataset.train_inputs, targets, l2=spec.l2)
    x0 = glorot_init(spec.layers, root.spawn(INIT_STREAM))

    test_fn = None
    test_targets = dataset.test_targets(spec.task)
    if test_targets is not None:
        test_obj = MlpLsrProblem(spec.layers, dataset.test_inputs, test_targets, l2=0.0)
        test_fn = test_obj.full_value
    return problem, x0, test_fn


def build_rate_source(rate: RateSpec, partition):
    if rate.kind == "fixed":
        return FixedRate(rate.eta)
    if rate.kind == "fixed-decay":
        return FixedDecayRate(rate.eta0)
    groups = list(partition) if rate.per_group else [(partition[0][0], partition[-1][1])]
    return PlsRate(
        groups,
        rate.eta0,
        rate.eps1,
        rate.eps2,
        decay=rate.decay,
        allow_negative_eta0=rate.allow_negative_eta0,
    )


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_records_csv(path, records: list[TrainRecord], n_groups: int) -> None:
    lr_cols = [f"lr_g{k}" for k in range(n_groups)]
    l_cols = [f"L_g{k}" for k in range(n_groups)]
    lines = [",".join(["iter", "train_loss", "test_loss", *lr_cols, *l_cols, "wall_ms", "diverged"])]
    for rec in records:
        etas = rec.etas if rec.etas is not None else (None,) * n_groups
        l_hats = rec.l_hats if rec.l_hats is not None else (None,) * n_groups
        cells = [
            _fmt(rec.iter),
            _fmt(rec.train_loss),
            _fmt(rec.test_loss),
            *(_fmt(e) for e in etas),
            *(_fmt(l) for l in l_hats),
            "",  # wall time is measured but not serialized: runs stay byte-identical
            _fmt(rec.diverged),
        ]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def execute(cfg: ExperimentConfig, out_dir) -> dict:
    """Run one experiment; write records.csv and summary.json under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem, x0, test_fn = build_problem(cfg)
    rate_source = build_rate_source(cfg.rate, problem.layer_partition)
    n_groups = 1 if rate_source.groups is None else len(rate_source.groups)

    result = run_optimizer(
        problem,
        cfg.algorithm,
        rate_source,
        steps=cfg.steps,
        seed=cfg.seed,
        x0=x0,
        batch_size=cfg.batch_size,
        beta1=cfg.amsgrad.beta1,
        beta2=cfg.amsgrad.beta2,
        beta1_schedule=cfg.amsgrad.beta1_schedule,
        kappa=cfg.accsgd.kappa,
        xi=cfg.accsgd.xi,
        accsgd_m0=cfg.accsgd.m0,
        test_fn=test_fn,
        test_every=cfg.test_every,
    )
    write_records_csv(out_dir / "records.csv", result.records, n_groups)

    final_train = final_raw = final_test = None
    if not result.diverged:
        final_train = problem.full_value(result.x_final)
        final_raw = (
            problem.data_value(result.x_final, np.arange(problem.n))
            if isinstance(problem, MlpLsrProblem)
            else final_train
        )
        if test_fn is not None:
            final_test = float(test_fn(result.x_final))
    last = result.records[-1]
    summary = {
        "config": cfg.to_dict(),
        "diverged": result.diverged,
        "divergence_step": result.diverged_at,
        "steps_completed": last.iter,
        "final_train_loss": _json_safe(final_train),
        "final_train_loss_raw": _json_safe(final_raw),
        "final_test_loss": _json_safe(final_test),
        "final_rates": list(last.etas) if last.etas is not None else None,
        "final_smoothness": (
            [_json_safe(l) for l in last.l_hats] if last.l_hats is not None else None
        ),
        "wall_ms_total": last.wall_ms,
        "records_csv": "records.csv",
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def execute_config(config_dict: dict, out_dir: str) -> dict:
    """Process-pool-friendly wrapper: validate a raw dict and run it."""
    return execute(ExperimentConfig.from_dict(config_dict), out_dir)


def run_grid(config_paths, out_root, workers: int = 1) -> list[dict]:
    """Run several configs with isolated state and per-config output dirs."""
    out_root = Path(out_root)
    jobs = []
    for path in config_paths:
        cfg_path = Path(path)
        cfg = ExperimentConfig.load(cfg_path)  # fail fast on any bad config
        jobs.append((cfg.to_dict(), str(out_root / cfg_path.stem)))
    if workers <= 1:
        return [execute_config(d, out) for d, out in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(execute_config, d, out) for d, out in jobs]
        return [f.result() for f in futures]


def gradcheck_report(
    cfg: ExperimentConfig,
    n_points: int = 20,
    coords_per_point: int = 20,
    seed: int | None = None,
    _corrupt: bool = False,
) -> dict:
    """Compare analytic gradients against the central-difference oracle.

    At each random point the checked coordinates are sampled among those
    whose analytic derivative is not vanishingly small relative to the
    largest one (central differences cannot resolve near-zero derivatives
    in relative terms). Small problems check every coordinate. The
    ``_corrupt`` hook deliberately perturbs the analytic gradient so the
    failure path is testable.
    """
    problem, x0, _ = build_problem(cfg)
    rng = SeededRng(cfg.seed if seed is None else seed).spawn(17)
    batch_size = min(cfg.batch_size, problem.n)
    worst = 0.0
    point_errors = []
    for k in range(n_points):
        if isinstance(problem, MlpLsrProblem):
            x = glorot_init(problem.layer_sizes, rng.spawn(100 + k))
        else:
            x = rng.spawn(100 + k).uniform_array(problem.d, -2.0, 2.0)
        batch = rng.index_array(batch_size, problem.n)
        ga = problem.grad(x, batch)
        if _corrupt:
            ga = ga.copy()
            ga[0] += 1e-3 * (1.0 + abs(ga[0]))
        if problem.d <= 2000:
            coords = np.arange(problem.d)
        else:
            magnitude_floor = 1e-3 * np.abs(ga).max()
            eligible = np.flatnonzero(np.abs(ga) >= magnitude_floor)
            pick = rng.index_array(coords_per_point, eligible.size)
            coords = eligible[pick]
        gn = finite_diff_grad(problem, x, batch, coords=coords)
        num = float(np.linalg.norm(ga[coords] - gn))
        den = max(float(np.linalg.norm(ga[coords])), 1e-12)
        err = num / den
        point_errors.append(err)
        worst = max(worst, err)
    return {
        "max_rel_error": worst,
        "point_errors": point_errors,
        "points": n_points,
        "passed": worst <= GRADCHECK_GATE,
    }
