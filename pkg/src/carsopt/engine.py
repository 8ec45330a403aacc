"""Batch sampling loop: heuristic schedule, prioritized sampling, logging, resume.

Each iteration recomputes sub-domain probabilities from the fitness tensor
(optionally with the pooling overlay), draws a batch of sub-domains, places a
uniform random point inside each, optionally filters candidates with the
k-nearest-neighbor oversampling extension, evaluates the batch, and writes
fitness back into the tensor by per-cell maximum.

Normalization constants are captured from iteration 0 (which is effectively
uniform random sampling) and frozen; iteration-0 fitnesses are computed under
the frozen constants before tensor insertion so all cells share one scale.

Per-iteration RNG streams are derived from (seed, iteration) with a
counter-based generator, so a resumed run replays the exact sample sequence of
an uninterrupted one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import fitness as fit
from .knn import NeighborStore
from .problem import ProblemSpec, sampled_dimensions, to_physical
from .tensor import DEFAULT_CELL_CAP, SubdomainTensor

__all__ = [
    "RunConfig",
    "RunState",
    "SampleRecord",
    "EngineError",
    "heuristic_schedule",
    "iteration_sizes",
    "oversampling_width",
    "neighbor_count",
    "parse_alpha_schedule",
    "run",
    "resume",
    "read_log",
    "iteration_stats",
    "export_summary_csv",
    "export_valid_samples_csv",
]

LOG_VERSION = 1


class EngineError(RuntimeError):
    """Run configuration or log consistency failure."""


# ---------------------------------------------------------------------------
# Heuristics
# ---------------------------------------------------------------------------

def heuristic_schedule(n_total: int) -> tuple[int, int]:
    """(n_iter, n_samples) from the total budget.

    Iteration counts prefer multiples of 5: n_iter = floor(n_total^0.4 / 5)*5
    when that reaches 5, else floor(n_total^0.4) (minimum 1).  Residual
    samples are appended to the final iteration (see iteration_sizes).
    """
    if n_total < 1:
        raise EngineError("n_total must be >= 1")
    raw = n_total**0.4
    n_iter = math.floor(raw / 5) * 5
    if n_iter < 5:
        n_iter = max(1, math.floor(raw))
    n_samples = n_total // n_iter
    return n_iter, n_samples


def iteration_sizes(n_total: int) -> list[int]:
    """Per-iteration batch sizes; residual samples go to the last iteration."""
    n_iter, n_samples = heuristic_schedule(n_total)
    sizes = [n_samples] * n_iter
    sizes[-1] += n_total - n_iter * n_samples
    return sizes


def oversampling_width(n_dim: int) -> int:
    """Candidates per selected sample: floor(n_dim^1.5), at least 1."""
    return max(1, math.floor(n_dim**1.5))


def neighbor_count(n_dim: int) -> int:
    """Neighbors for the kNN fitness estimate: 2*n_dim + 1."""
    return 2 * n_dim + 1


def parse_alpha_schedule(spec_str: str):
    """Schedule string -> callable(iteration) -> alpha.

    ``identity`` (alpha = iteration, the default), ``const:<v>`` or
    ``scale:<k>`` (alpha = k * iteration).
    """
    if spec_str == "identity":
        return lambda i: float(i)
    kind, _, arg = spec_str.partition(":")
    try:
        val = float(arg)
    except ValueError:
        raise EngineError(f"bad alpha schedule {spec_str!r}")
    if kind == "const":
        return lambda i: val
    if kind == "scale":
        return lambda i: val * i
    raise EngineError(f"bad alpha schedule {spec_str!r}")


# ---------------------------------------------------------------------------
# Configuration and state
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    n_total: int
    seed: int = 0
    n_subdomain: int = 9
    n_pool: int = 3  # 0 disables pooling
    oversampling: bool = True
    alpha_schedule: str = "identity"
    cell_cap: int = DEFAULT_CELL_CAP

    def __post_init__(self):
        if self.n_subdomain < 2:
            raise EngineError("n_subdomain must be >= 2")
        if self.n_pool and self.n_subdomain % self.n_pool != 0:
            raise EngineError("n_pool must divide n_subdomain")


@dataclass
class SampleRecord:
    sample_id: int
    iteration: int
    subdomain: tuple[int, ...]
    unit: tuple[float, ...]
    params: dict
    meas: dict | None
    error: str | None
    breakdown: fit.FitnessBreakdown
    fitness: float
    valid: bool


@dataclass
class RunState:
    spec: ProblemSpec
    config: RunConfig
    tensor: SubdomainTensor
    store: NeighborStore
    consts: fit.NormalizationConstants | None = None
    iteration: int = 0  # next iteration to execute
    alpha: float = 0.0
    records: list[SampleRecord] = field(default_factory=list)

    def iteration_stats(self) -> list[dict]:
        return iteration_stats(self.records)


def iteration_stats(records: list[SampleRecord]) -> list[dict]:
    """Per-iteration (min, mean, max) fitness and valid count."""
    by_iter: dict[int, list[SampleRecord]] = {}
    for r in records:
        by_iter.setdefault(r.iteration, []).append(r)
    stats = []
    for i in sorted(by_iter):
        fs = [r.fitness for r in by_iter[i]]
        stats.append(
            {
                "iteration": i,
                "fit_min": min(fs),
                "fit_mean": sum(fs) / len(fs),
                "fit_max": max(fs),
                "valid": sum(r.valid for r in by_iter[i]),
                "n": len(fs),
            }
        )
    return stats


# ---------------------------------------------------------------------------
# RNG streams
# ---------------------------------------------------------------------------

def iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    """Counter-based per-iteration stream; independent of other iterations."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(iteration,)))
    )


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------

def _physical_params(spec: ProblemSpec, dims, unit: np.ndarray) -> dict:
    """Physical per-operating-point values for one unit-space point."""
    params: dict[str, list[float]] = {}
    for p in spec.parameters:
        if p.is_sampled:
            params[p.name] = [0.0] * p.op_count
        else:
            params[p.name] = list(p.grid_values)
    for d, u in zip(dims, unit):
        params[d.parameter][d.op_index] = to_physical(d, float(u))
    return params


def _sample_iteration(state: RunState, iteration: int, n: int):
    """Draw the unit points and sub-domain indices for one iteration."""
    cfg = state.config
    rng = iteration_rng(cfg.seed, iteration)
    n_dim = state.tensor.n_dim
    n_sub = cfg.n_subdomain

    use_over = cfg.oversampling and iteration > 0 and len(state.store) > 0
    n_over = oversampling_width(n_dim) if use_over else 1

    n_pool = cfg.n_pool if cfg.n_pool else None
    probs = state.tensor.softmax_probabilities(state.alpha, n_pool)
    mis = state.tensor.sample_subdomains(probs, n * n_over, rng)
    offsets = rng.random((n * n_over, n_dim))
    units = (mis + offsets) / n_sub

    if n_over > 1:
        cand_units = units.reshape(n, n_over, n_dim)
        cand_mis = mis.reshape(n, n_over, n_dim)
        k = neighbor_count(n_dim)
        est = state.store.estimate_many(units, k).reshape(n, n_over)
        best = np.argmax(est, axis=1)
        units = cand_units[np.arange(n), best, :]
        mis = cand_mis[np.arange(n), best, :]
    return mis, units


def _evaluate(evaluator, requests):
    """Dispatch a batch and reassociate results by sample id."""
    results = evaluator.evaluate_batch(requests)
    by_id = {r.sample_id: r for r in results}
    missing = [req.sample_id for req in requests if req.sample_id not in by_id]
    if missing:
        raise EngineError(f"evaluator dropped sample ids {missing[:5]}")
    return [by_id[req.sample_id] for req in requests]


def run(
    spec: ProblemSpec,
    config: RunConfig,
    evaluator,
    log_path=None,
    stop_after_iteration: int | None = None,
    _initial: RunState | None = None,
    _log_mode: str = "w",
) -> RunState:
    """Execute the sampling loop for ``config.n_total`` samples.

    ``stop_after_iteration`` ends the run early (the log stays resumable).
    """
    from .evaluators import EvaluationRequest

    dims = sampled_dimensions(spec)
    n_dim = len(dims)
    if n_dim < 1:
        raise EngineError("problem has no sampled dimensions")
    schedule = parse_alpha_schedule(config.alpha_schedule)
    sizes = iteration_sizes(config.n_total)

    if _initial is None:
        state = RunState(
            spec=spec,
            config=config,
            tensor=SubdomainTensor(n_dim, config.n_subdomain, config.cell_cap),
            store=NeighborStore(n_dim),
        )
    else:
        state = _initial

    log = open(log_path, _log_mode) if log_path else None

    def emit(obj):
        if log:
            log.write(json.dumps(obj) + "\n")

    if _initial is None:
        emit(
            {
                "type": "run",
                "version": LOG_VERSION,
                "method": "cars",
                "seed": config.seed,
                "n_total": config.n_total,
                "n_subdomain": config.n_subdomain,
                "n_pool": config.n_pool,
                "oversampling": config.oversampling,
                "alpha_schedule": config.alpha_schedule,
                "n_dim": n_dim,
                "dimensions": [d.label for d in dims],
            }
        )

    sample_id = len(state.records)
    try:
        for iteration in range(state.iteration, len(sizes)):
            n = sizes[iteration]
            state.alpha = schedule(iteration)
            emit({"type": "iteration", "iteration": iteration, "alpha": state.alpha, "n_samples": n})

            mis, units = _sample_iteration(state, iteration, n)
            requests = [
                EvaluationRequest(sample_id + i, _physical_params(spec, dims, units[i]))
                for i in range(n)
            ]
            results = _evaluate(evaluator, requests)

            breakdowns = [fit.evaluate_breakdown(spec, r.meas) for r in results]
            if state.consts is None:
                state.consts = fit.NormalizationConstants.from_first_batch(spec, breakdowns)
                emit({"type": "normalization", **state.consts.to_dict()})
            fitnesses = np.array([bd.scalar(state.consts) for bd in breakdowns])

            state.tensor.update_many(mis, fitnesses)
            for i, (req, res, bd) in enumerate(zip(requests, results, breakdowns)):
                f = float(fitnesses[i])
                state.store.append(units[i], f)
                rec = SampleRecord(
                    sample_id=req.sample_id,
                    iteration=iteration,
                    subdomain=tuple(int(c) for c in mis[i]),
                    unit=tuple(float(u) for u in units[i]),
                    params=req.params,
                    meas=res.meas,
                    error=res.error,
                    breakdown=bd,
                    fitness=f,
                    valid=bd.valid,
                )
                state.records.append(rec)
                emit(_sample_to_json(rec))
            sample_id += n
            state.iteration = iteration + 1
            if stop_after_iteration is not None and iteration >= stop_after_iteration:
                break
    finally:
        if log:
            log.close()
    return state


def _sample_to_json(rec: SampleRecord) -> dict:
    return {
        "type": "sample",
        "id": rec.sample_id,
        "iteration": rec.iteration,
        "subdomain": list(rec.subdomain),
        "unit": list(rec.unit),
        "params": rec.params,
        "meas": rec.meas,
        "error": rec.error,
        "objective_raw": _nan_safe(rec.breakdown.objective_raw),
        "penalty_raw": _nan_safe(rec.breakdown.penalty_raw),
        "fitness": rec.fitness,
        "valid": rec.valid,
    }


def _nan_safe(vals):
    return [None if (v is None or not math.isfinite(v)) else v for v in vals]


def _nan_restore(vals):
    return [math.nan if v is None else v for v in vals]


# ---------------------------------------------------------------------------
# Log reading and resume
# ---------------------------------------------------------------------------

def read_log(path) -> list[dict]:
    """Parse a run log into its records; raises EngineError on corruption."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise EngineError(f"corrupt log line {lineno}: {exc}")
    if not records or records[0].get("type") != "run":
        raise EngineError("log does not start with a run header")
    return records


def _record_from_json(obj: dict) -> SampleRecord:
    bd = fit.FitnessBreakdown(
        objective_raw=_nan_restore(obj["objective_raw"]),
        penalty_raw=_nan_restore(obj["penalty_raw"]),
        valid=obj["valid"],
        failed=obj["meas"] is None,
    )
    return SampleRecord(
        sample_id=obj["id"],
        iteration=obj["iteration"],
        subdomain=tuple(obj["subdomain"]),
        unit=tuple(obj["unit"]),
        params=obj["params"],
        meas=obj["meas"],
        error=obj.get("error"),
        breakdown=bd,
        fitness=obj["fitness"],
        valid=obj["valid"],
    )


def restore_state(log_path, spec: ProblemSpec, config: RunConfig) -> RunState:
    """Rebuild engine state from a run log (no new samples)."""
    entries = read_log(log_path)
    header = entries[0]
    dims = sampled_dimensions(spec)
    if header["n_dim"] != len(dims) or header["n_subdomain"] != config.n_subdomain:
        raise EngineError(
            "log geometry mismatch: log has "
            f"n_dim={header['n_dim']}, n_subdomain={header['n_subdomain']}"
        )
    if header["seed"] != config.seed:
        raise EngineError("log was written with a different seed")
    state = RunState(
        spec=spec,
        config=config,
        tensor=SubdomainTensor(len(dims), config.n_subdomain, config.cell_cap),
        store=NeighborStore(len(dims)),
    )
    for obj in entries[1:]:
        kind = obj["type"]
        if kind == "iteration":
            state.alpha = obj["alpha"]
        elif kind == "normalization":
            state.consts = fit.NormalizationConstants.from_dict(obj)
        elif kind == "sample":
            rec = _record_from_json(obj)
            state.records.append(rec)
            state.tensor.update_fitness(rec.subdomain, rec.fitness)
            state.store.append(np.asarray(rec.unit), rec.fitness)
    # An iteration counts as done only once its samples are logged; a run
    # aborted mid-evaluation leaves a bare iteration header that is redone.
    state.iteration = state.records[-1].iteration + 1 if state.records else 0
    return state


def resume(
    log_path,
    spec: ProblemSpec,
    config: RunConfig,
    evaluator,
    stop_after_iteration: int | None = None,
) -> RunState:
    """Continue a logged run up to ``config.n_total`` samples.

    The tensor is re-established as the max-fold of logged (sub-domain,
    fitness) pairs; normalization constants and the iteration counter are
    restored, and per-iteration RNG streams make the continuation identical
    to an uninterrupted run.  A different alpha schedule may be supplied.
    """
    state = restore_state(log_path, spec, config)
    if state.iteration >= len(iteration_sizes(config.n_total)):
        return state
    return run(
        spec,
        config,
        evaluator,
        log_path=log_path,
        stop_after_iteration=stop_after_iteration,
        _initial=state,
        _log_mode="a",
    )


# ---------------------------------------------------------------------------
# CSV exports
# ---------------------------------------------------------------------------

def export_summary_csv(records: list[SampleRecord], path) -> None:
    """Per-iteration min/mean/max fitness and valid count."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "fit_min", "fit_mean", "fit_max", "valid", "n"])
        for s in iteration_stats(records):
            w.writerow([s["iteration"], s["fit_min"], s["fit_mean"], s["fit_max"], s["valid"], s["n"]])


def export_valid_samples_csv(spec: ProblemSpec, records: list[SampleRecord], path) -> None:
    """Parameter and measurement table of boundary-valid samples."""
    import csv

    param_cols = []
    for p in spec.parameters:
        param_cols.extend((p.name, op) for op in range(p.op_count))
    meas_cols = []
    for name in spec.measurement_names():
        meas_cols.extend((name, op) for op in range(spec.n_operating_points))

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["id", "iteration", "fitness"]
            + [f"{n}[{op}]" for n, op in param_cols]
            + [f"{n}[{op}]" for n, op in meas_cols]
        )
        for rec in records:
            if not rec.valid:
                continue
            row = [rec.sample_id, rec.iteration, rec.fitness]
            row += [rec.params[n][op] for n, op in param_cols]
            row += [rec.meas[n][op] if rec.meas and n in rec.meas else "" for n, op in meas_cols]
            w.writerow(row)
