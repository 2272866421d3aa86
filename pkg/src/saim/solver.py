"""Self-adaptive outer loop, fixed-penalty baseline, and accuracy metrics.

Each iteration anneals the p-bit machine on the current Lagrangian, keeps
the last sample, stores it if it satisfies the original constraints, and
moves the multipliers along the constraint residual of that sample.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from saim.model import (
    ConstrainedQuadraticProblem,
    LagrangeState,
    _penalty_energy,
    _with_multipliers,
    compute_density,
    evaluate_f,
    is_feasible,
    spins_to_binary,
    to_ising,
)
from saim.oracle import lagrangian_bound
from saim.sampler import AnnealSchedule, RngStream, anneal_run

# enumerating every lambda of a long trace stays cheap up to here
DUAL_BOUND_MAX_SPINS = 16


@dataclass(frozen=True)
class SaimConfig:
    """Run parameters.  ``penalty`` overrides ``P = alpha * d * N`` when set."""

    alpha: float = 2.0
    eta: float = 20.0
    runs: int = 2000
    mcs_per_run: int = 1000
    beta_max: float = 10.0
    seed: int = 0
    stream: int = 0
    penalty: float | None = None

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.mcs_per_run < 1:
            raise ValueError("mcs_per_run must be >= 1")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.penalty is not None and self.penalty < 0:
            raise ValueError("penalty must be >= 0")

    def penalty_for(self, problem: ConstrainedQuadraticProblem) -> float:
        if self.penalty is not None:
            return float(self.penalty)
        return self.alpha * compute_density(problem) * problem.n_vars


# published parameter sets
QKP_PAPER = SaimConfig(alpha=2.0, eta=20.0, runs=2000, mcs_per_run=1000, beta_max=10.0)
MKP_PAPER = SaimConfig(alpha=5.0, eta=0.05, runs=5000, mcs_per_run=1000, beta_max=50.0)
PRESETS = {"qkp-paper": QKP_PAPER, "mkp-paper": MKP_PAPER}


@dataclass(frozen=True, eq=False)
class IterationRecord:
    index: int
    x: np.ndarray
    g: np.ndarray
    feasible: bool
    cost: float | None
    lam: np.ndarray


@dataclass(eq=False)
class SaimResult:
    """Outcome of one run.  Costs are in the units of the solved problem;
    multiply by ``objective_scale`` for raw-instance units."""

    penalty: float
    records: list[IterationRecord]
    best_x: np.ndarray | None = None
    best_cost: float | None = None
    best_index: int | None = None
    objective_scale: float = 1.0
    wall_time: float = 0.0
    total_sweeps: int = 0
    n_items: int = 0

    @property
    def found(self) -> bool:
        return self.best_x is not None

    @property
    def feasibility_ratio(self) -> float:
        """Percentage of iterations whose sample was feasible."""
        return 100.0 * sum(r.feasible for r in self.records) / len(self.records)

    @property
    def lambda_trace(self) -> np.ndarray:
        return np.array([r.lam for r in self.records])

    @property
    def feasible_costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.records if r.feasible], dtype=np.float64)

    @property
    def best_cost_original(self) -> float | None:
        return None if self.best_cost is None else self.best_cost * self.objective_scale

    def accuracy(self, opt: float) -> tuple[float | None, float | None]:
        """Best and mean accuracy of the feasible samples against ``opt`` (raw units)."""
        costs = self.feasible_costs * self.objective_scale
        if costs.size == 0:
            return None, None
        acc = [compute_accuracy(c, opt) for c in costs]
        return float(max(acc)), float(np.mean(acc))


def update_multipliers(lam, g_value, eta: float) -> np.ndarray:
    lam = np.asarray(lam, dtype=np.float64)
    g_value = np.asarray(g_value, dtype=np.float64)
    if lam.shape != g_value.shape:
        raise ValueError(f"lambda shape {lam.shape} != residual shape {g_value.shape}")
    return lam + eta * g_value


def run_saim(problem: ConstrainedQuadraticProblem, config: SaimConfig) -> SaimResult:
    """Alternate annealed minimization of ``L`` and multiplier ascent.

    ``problem`` should already be slack-extended and normalized.  ``P`` is
    fixed for the whole run; multipliers start at zero and are updated from
    every sample, feasible or not.  The earliest of equally good feasible
    samples is kept.
    """
    start = time.perf_counter()
    P = config.penalty_for(problem)
    base = _penalty_energy(problem, P)
    schedule = AnnealSchedule(config.beta_max, config.mcs_per_run)
    rng = RngStream(config.seed, config.stream)
    lam = np.zeros(problem.n_constraints)
    result = SaimResult(penalty=P, records=[], objective_scale=problem.objective_scale, n_items=problem.n_items)

    for k in range(config.runs):
        coeffs = to_ising(_with_multipliers(base, problem, lam))
        x = spins_to_binary(anneal_run(coeffs, schedule, rng))
        g = problem.A @ x - problem.b
        feasible = is_feasible(problem, x)
        cost = evaluate_f(problem, x) if feasible else None
        lam_snapshot = lam.copy()
        lam_snapshot.setflags(write=False)
        result.records.append(IterationRecord(k, x, g, feasible, cost, lam_snapshot))
        if feasible and (result.best_cost is None or cost < result.best_cost):
            result.best_cost, result.best_x, result.best_index = cost, x, k
        lam = update_multipliers(lam, g, config.eta)

    result.total_sweeps = config.runs * config.mcs_per_run
    result.wall_time = time.perf_counter() - start
    return result


def run_penalty_baseline(problem: ConstrainedQuadraticProblem, config: SaimConfig) -> SaimResult:
    """Same loop with the multipliers frozen at zero."""
    return run_saim(problem, replace(config, eta=0.0))


def dual_bound(problem: ConstrainedQuadraticProblem, result: SaimResult) -> tuple[float, int]:
    """Best exact Lagrangian lower bound over the multipliers visited, and where.

    Only a lower estimate of the dual optimum; nothing guarantees the trace
    passed through the maximizing lambda.
    """
    if problem.n_vars > DUAL_BOUND_MAX_SPINS:
        raise ValueError(f"dual bound needs <= {DUAL_BOUND_MAX_SPINS} spins, got {problem.n_vars}")
    cache: dict[bytes, float] = {}
    best, where = -np.inf, -1
    for rec in result.records:
        key = rec.lam.tobytes()
        if key not in cache:
            cache[key] = lagrangian_bound(problem, LagrangeState(result.penalty, rec.lam))
        if cache[key] > best:
            best, where = cache[key], rec.index
    return float(best), where


def compute_accuracy(cost: float, opt: float) -> float:
    """``100 * cost / opt`` for negative (minimization) costs."""
    if opt >= 0:
        raise ValueError(f"accuracy needs a negative optimum, got {opt}")
    if cost > 0:
        raise ValueError(f"accuracy needs a non-positive cost, got {cost}")
    return 100.0 * cost / opt


@dataclass(frozen=True)
class InstanceStats:
    name: str
    best_accuracy: float | None
    avg_accuracy: float | None
    feasibility: float
    best_cost: float | None = None
    opt: float | None = None

    @classmethod
    def from_result(cls, name: str, result: SaimResult, opt: float | None = None) -> InstanceStats:
        best = avg = None
        if opt is not None:
            best, avg = result.accuracy(opt)
        return cls(name, best, avg, result.feasibility_ratio, result.best_cost_original, opt)


@dataclass(frozen=True)
class Quartiles:
    median: float
    q1: float
    q3: float
    mean: float
    count: int

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def _quartiles(values: Iterable[float | None]) -> Quartiles | None:
    vals = np.array([v for v in values if v is not None], dtype=np.float64)
    if vals.size == 0:
        return None
    q1, med, q3 = np.percentile(vals, [25, 50, 75])
    return Quartiles(float(med), float(q1), float(q3), float(vals.mean()), int(vals.size))


def summarize(stats: Sequence[InstanceStats]) -> dict:
    """Per-instance rows plus median and quartiles of each metric across instances."""
    if not stats:
        raise ValueError("nothing to summarize")
    aggregate = {}
    for metric in ("best_accuracy", "avg_accuracy", "feasibility"):
        q = _quartiles(getattr(s, metric) for s in stats)
        aggregate[metric] = None if q is None else {
            "median": q.median, "q1": q.q1, "q3": q.q3, "iqr": q.iqr, "mean": q.mean, "count": q.count,
        }
    return {"instances": [s.__dict__.copy() for s in stats], "aggregate": aggregate}
