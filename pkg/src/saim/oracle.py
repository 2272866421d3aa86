"""Exact reference answers by full enumeration, for small instances only."""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from saim.model import (
    EQ,
    BinaryQuadraticEnergy,
    ConstrainedQuadraticProblem,
    IsingCoefficients,
    LagrangeState,
    compile_energy,
)

MAX_ENUM_VARS = 25
MAX_BOLTZMANN_SPINS = 15
# relative tolerance for treating two enumerated values as tied
_TIE_RTOL = 1e-9


class DimensionLimitError(ValueError):
    """Raised when an exhaustive computation would be too large."""


@dataclass(frozen=True, eq=False)
class ExactSolution:
    value: float
    state: np.ndarray
    n_optimal: int


def _check_size(n: int, limit: int = MAX_ENUM_VARS):
    if n > limit:
        raise DimensionLimitError(f"exhaustive enumeration limited to {limit} variables, got {n}")


@nb.njit(cache=True)
def _gray_minimize(sym, lin, A, b, is_eq, constrained, tol):
    # sym: full symmetric pair matrix, value(x) = 1/2 x^T sym x + lin . x
    # code keeps x_0 as the most significant bit so smaller code = lexicographically smaller x
    n = lin.shape[0]
    m = b.shape[0]
    x = np.zeros(n, dtype=np.int64)
    field = lin.copy()
    load = np.zeros(m)
    value = 0.0
    code = 0

    best = np.inf
    best_code = -1
    count = 0
    total = 1 << n
    for step in range(total):
        if step > 0:
            # bit to flip in the Gray sequence = lowest set bit of step
            i = 0
            while not (step >> i) & 1:
                i += 1
            d = 1.0 - 2.0 * x[i]
            value += d * field[i]
            for j in range(n):
                field[j] += d * sym[j, i]
            for r in range(m):
                load[r] += d * A[r, i]
            x[i] = 1 - x[i]
            code ^= 1 << (n - 1 - i)
        if constrained:
            ok = True
            for r in range(m):
                slack = tol * max(1.0, abs(b[r]))
                if is_eq[r]:
                    if abs(load[r] - b[r]) > slack:
                        ok = False
                        break
                elif load[r] > b[r] + slack:
                    ok = False
                    break
            if not ok:
                continue
        scale = _TIE_RTOL * max(1.0, abs(best)) if best_code >= 0 else 0.0
        if best_code < 0 or value < best - scale:
            best = value
            best_code = code
            count = 1
        elif value <= best + scale:
            count += 1
            if code < best_code:
                best_code = code
    return best_code, count


def _decode(code: int, n: int) -> np.ndarray:
    return np.array([(code >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.int8)


def exhaustive_solve(problem: ConstrainedQuadraticProblem, tol: float = 1e-9) -> ExactSolution:
    """Minimum of ``f`` over all feasible binary states.

    Rows are enforced as written: ``<=`` rows as inequalities, equality rows
    exactly (up to ``tol``).  Ties go to the lexicographically smallest state.
    """
    n = problem.n_vars
    _check_size(n)
    is_eq = np.array([s == EQ for s in problem.sense], dtype=np.bool_)
    code, count = _gray_minimize(
        np.ascontiguousarray(problem.W), np.ascontiguousarray(problem.h),
        np.ascontiguousarray(problem.A), np.ascontiguousarray(problem.b),
        is_eq, True, tol,
    )
    if code < 0:
        raise ValueError("problem has no feasible state")
    x = _decode(code, n)
    return ExactSolution(float(0.5 * x @ problem.W @ x + problem.h @ x), x, int(count))


def exhaustive_min_energy(energy: BinaryQuadraticEnergy) -> ExactSolution:
    """Unconstrained minimum of a binary energy."""
    n = energy.n_vars
    _check_size(n)
    sym = energy.quad + energy.quad.T
    code, count = _gray_minimize(
        np.ascontiguousarray(sym), np.ascontiguousarray(energy.lin),
        np.zeros((0, n)), np.zeros(0), np.zeros(0, dtype=np.bool_), False, 0.0,
    )
    x = _decode(code, n)
    return ExactSolution(energy.energy(x), x, int(count))


def lagrangian_bound(problem: ConstrainedQuadraticProblem, state: LagrangeState) -> float:
    """``min_x L(x)`` for fixed ``(P, lambda)``: a lower bound on the optimum."""
    return exhaustive_min_energy(compile_energy(problem, state)).value


def all_spin_states(n: int) -> np.ndarray:
    """Every spin configuration, row ``k`` having ``m_i = +1`` iff bit ``i`` of ``k`` is set."""
    bits = (np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1
    return (2 * bits - 1).astype(np.float64)


def boltzmann_distribution(coeffs: IsingCoefficients, beta: float) -> np.ndarray:
    n = coeffs.n_spins
    _check_size(n, MAX_BOLTZMANN_SPINS)
    logits = -beta * coeffs.energy(all_spin_states(n))
    logits -= logits.max()
    weights = np.exp(logits)
    return weights / weights.sum()
