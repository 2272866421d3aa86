"""Self-checks run by ``saim validate``.

Each check returns a :class:`CheckResult` holding the measured statistic
and the threshold it was compared against; failures are data, not
exceptions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from saim.model import (
    IsingCoefficients,
    LagrangeState,
    add_slack_variables,
    compile_energy,
    evaluate_g,
    random_problem,
    to_ising,
)
from saim.oracle import boltzmann_distribution, exhaustive_min_energy, lagrangian_bound
from saim.sampler import RngStream, sample_equilibrium


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    statistic: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.detail} measured={self.statistic:.3g} threshold={self.threshold:.3g}"


def random_spin_system(n: int, seed: int) -> IsingCoefficients:
    rng = np.random.default_rng(seed)
    J = np.triu(rng.uniform(-1, 1, size=(n, n)), 1)
    return IsingCoefficients(J + J.T, rng.uniform(-1, 1, size=n))


def _binary_states(n: int) -> np.ndarray:
    return np.array(list(itertools.product([0, 1], repeat=n)), dtype=np.float64)


def check_tv(
    systems: int = 5,
    n_spins: int = 8,
    beta: float = 1.0,
    n_samples: int = 1_000_000,
    burn_in: int = 10_000,
    threshold: float = 0.02,
    seed: int = 0,
    sampler: Callable = sample_equilibrium,
) -> CheckResult:
    """Largest total-variation distance between sampled and exact Boltzmann tables."""
    worst = 0.0
    for k in range(systems):
        coeffs = random_spin_system(n_spins, seed + k)
        empirical = sampler(coeffs, beta, n_samples, burn_in, RngStream(seed, k))
        exact = boltzmann_distribution(coeffs, beta)
        worst = max(worst, 0.5 * float(np.abs(empirical - exact).sum()))
    return CheckResult("tv", worst < threshold, worst, threshold, f"{systems} systems, N={n_spins}, beta={beta}")


def check_roundtrip(problems: int = 100, max_vars: int = 10, threshold: float = 1e-9, seed: int = 0) -> CheckResult:
    """Direct Lagrangian vs. compiled binary energy vs. spin energy on every state."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(problems):
        n = int(rng.integers(1, max_vars + 1))
        m = int(rng.integers(1, 4))
        prob = random_problem(rng, n, m)
        P = float(rng.uniform(0, 10))
        lam = rng.normal(scale=5, size=m)
        x = _binary_states(n)
        g = x @ prob.A.T - prob.b
        direct = 0.5 * np.einsum("ki,ij,kj->k", x, prob.W, x) + x @ prob.h + P * (g * g).sum(axis=1) + g @ lam
        energy = compile_energy(prob, LagrangeState(P, lam))
        spins = to_ising(energy).energy(2 * x - 1)
        worst = max(worst, float(np.abs(energy.energy(x) - direct).max()), float(np.abs(spins - direct).max()))
    return CheckResult("roundtrip", worst <= threshold, worst, threshold, f"{problems} problems, n<={max_vars}")


def check_slack(instances: int = 50, max_vars: int = 10, seed: int = 0) -> CheckResult:
    """Item sets completable by slack bits to ``A x + s = b`` equal those with ``A x <= b``.

    Slack columns are disjoint per row, so enumerating every extended state
    factorizes into item states times each row's slack-bit combinations.
    """
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(instances):
        n = int(rng.integers(1, max_vars + 1))
        prob = random_problem(rng, n, int(rng.integers(1, 3)), integer=True)
        ext = add_slack_variables(prob)
        items = _binary_states(n)
        load = items @ ext.A[:, :n].T
        completable = np.ones(len(items), dtype=bool)
        for row, cols in enumerate(ext.slack_layout.columns):
            slack_values = _binary_states(len(cols)) @ ext.A[row, list(cols)]
            gap = ext.b[row] - load[:, row]
            completable &= np.isclose(gap[:, None], slack_values[None, :], rtol=0, atol=1e-9).any(axis=1)
        direct = np.all(items @ prob.A.T <= prob.b, axis=1)
        mismatches += int(not np.array_equal(completable, direct))
    return CheckResult("slack", mismatches == 0, float(mismatches), 0.0, f"{instances} integer instances, n<={max_vars}")


def check_concavity(pairs: int = 100, n_vars: int = 8, seed: int = 0, tol: float = 1e-9) -> CheckResult:
    """Subgradient inequality ``LB(l') <= LB(l) + g(x(l)).(l' - l)`` for random pairs."""
    rng = np.random.default_rng(seed)
    prob = random_problem(rng, n_vars, 2)
    worst = -np.inf
    for _ in range(pairs):
        P = float(rng.uniform(0, 3))
        lam, lam2 = rng.normal(scale=3, size=(2, 2))
        sol = exhaustive_min_energy(compile_energy(prob, LagrangeState(P, lam)))
        g = evaluate_g(prob, sol.state)
        violation = lagrangian_bound(prob, LagrangeState(P, lam2)) - (sol.value + g @ (lam2 - lam))
        worst = max(worst, violation)
    return CheckResult("concavity", worst <= tol, worst, tol, f"{pairs} multiplier pairs, n={n_vars}")


CHECKS = {
    "tv": check_tv,
    "roundtrip": check_roundtrip,
    "slack": check_slack,
    "concavity": check_concavity,
}
