import itertools
import math

import numpy as np
import pytest

from saim.instances import MkpInstance, generate_qkp, to_problem
from saim.model import (
    BinaryQuadraticEnergy,
    ConstrainedQuadraticProblem,
    IsingCoefficients,
    LagrangeState,
    compile_energy,
    evaluate_g,
    prepare,
    random_problem,
)
from saim.oracle import (
    DimensionLimitError,
    boltzmann_distribution,
    exhaustive_min_energy,
    exhaustive_solve,
    lagrangian_bound,
)


def recursive_knapsack_opt(W, h, A, b):
    """Depth-first include/exclude search, independent of the Gray-code path."""
    n = len(h)
    best = [0.0]

    def visit(i, chosen, weight, value):
        if i == n:
            best[0] = min(best[0], value)
            return
        visit(i + 1, chosen, weight, value)
        w = weight + A[i]
        if w <= b:
            gain = h[i] + sum(W[i][j] for j in chosen)
            visit(i + 1, chosen + [i], w, value + gain)

    visit(0, [], 0, 0.0)
    return best[0]


def test_two_item_mkp():
    inst = MkpInstance("toy", [5, 3], [[4, 2]], [6])
    sol = exhaustive_solve(to_problem(inst))
    assert sol.value == -8
    np.testing.assert_array_equal(sol.state, [1, 1])


def test_zero_state_always_feasible():
    prob = ConstrainedQuadraticProblem(np.zeros((2, 2)), [-1, -1], [[5, 7]], [3])
    sol = exhaustive_solve(prob)
    assert sol.value == 0 and not sol.state.any()


@pytest.mark.parametrize("seed", range(4))
def test_matches_recursive_enumeration(seed):
    inst = generate_qkp(12, 0.5, seed=seed)
    prob = to_problem(inst)
    expected = recursive_knapsack_opt(prob.W.tolist(), prob.h.tolist(), inst.A.tolist(), inst.b)
    assert exhaustive_solve(prob).value == pytest.approx(expected)


def test_slack_form_has_same_optimum():
    prob = to_problem(generate_qkp(10, 0.6, seed=5))
    ext, scale, _ = prepare(prob)
    assert exhaustive_solve(ext).value * scale == pytest.approx(exhaustive_solve(prob).value)


def test_ties_resolve_to_lexicographically_smallest():
    # every single item is worth the same, only one fits
    prob = ConstrainedQuadraticProblem(np.zeros((3, 3)), [-1, -1, -1], [[1, 1, 1]], [1])
    sol = exhaustive_solve(prob)
    np.testing.assert_array_equal(sol.state, [0, 0, 1])
    assert sol.n_optimal == 3


def test_value_attained_by_state():
    rng = np.random.default_rng(3)
    energy = BinaryQuadraticEnergy(np.triu(rng.normal(size=(9, 9)), 1), rng.normal(size=9), 0.7)
    sol = exhaustive_min_energy(energy)
    states = np.array(list(itertools.product([0, 1], repeat=9)))
    assert sol.value == pytest.approx(energy.energy(states).min(), abs=1e-12)
    assert energy.energy(sol.state) == sol.value


def test_unconstrained_min_takes_all_items():
    prob = to_problem(generate_qkp(8, 0.5, seed=1))
    sol = exhaustive_min_energy(compile_energy(prob, LagrangeState.initial(0.0, 1)))
    assert sol.value == pytest.approx(prob.W.sum() / 2 + prob.h.sum())


def test_large_penalty_forces_feasibility():
    ext, _, _ = prepare(to_problem(generate_qkp(8, 0.5, seed=2)))
    sol = exhaustive_min_energy(compile_energy(ext, LagrangeState.initial(1e6, 1)))
    assert np.abs(evaluate_g(ext, sol.state)).max() < 1e-9
    assert sol.value == pytest.approx(exhaustive_solve(ext).value, abs=1e-6)


def test_size_limit():
    prob = random_problem(np.random.default_rng(0), 26)
    with pytest.raises(DimensionLimitError, match="25"):
        exhaustive_solve(prob)


def test_multiplier_can_raise_bound():
    # minimize -2 x1 - x2 s.t. x1 + x2 + s = 1; small P leaves a gap that lambda closes
    prob = ConstrainedQuadraticProblem(np.zeros((2, 2)), [-2.0, -1.0], [[1, 1]], [1])
    ext, _, _ = prepare(prob)
    P = 0.1
    opt = exhaustive_solve(ext).value
    lb0 = lagrangian_bound(ext, LagrangeState(P, [0.0]))
    lams = np.linspace(0, 5, 101)
    bounds = [lagrangian_bound(ext, LagrangeState(P, [lam])) for lam in lams]
    assert lb0 < opt
    assert max(bounds) > lb0
    assert max(bounds) <= opt + 1e-12


def test_dual_concavity():
    rng = np.random.default_rng(9)
    ext, _, _ = prepare(to_problem(generate_qkp(7, 0.6, seed=9)))
    P = 0.5
    for _ in range(100):
        lam, lam2 = rng.normal(scale=3, size=(2, 1))
        sol = exhaustive_min_energy(compile_energy(ext, LagrangeState(P, lam)))
        g = evaluate_g(ext, sol.state)
        lhs = lagrangian_bound(ext, LagrangeState(P, lam2))
        assert lhs <= sol.value + g @ (lam2 - lam) + 1e-9


class TestBoltzmann:
    def test_zero_beta_uniform(self):
        rng = np.random.default_rng(0)
        J = np.triu(rng.normal(size=(5, 5)), 1)
        probs = boltzmann_distribution(IsingCoefficients(J + J.T, rng.normal(size=5)), 0.0)
        np.testing.assert_allclose(probs, 2.0 ** -5)

    def test_two_spin_ferromagnet(self):
        probs = boltzmann_distribution(IsingCoefficients([[0, 1], [1, 0]], [0, 0]), 1.0)
        aligned = probs[0] + probs[3]
        assert aligned == pytest.approx(math.e / (math.e + 1 / math.e), abs=1e-12)

    def test_sums_to_one(self):
        rng = np.random.default_rng(1)
        J = np.triu(rng.normal(size=(10, 10)), 1) * 5
        probs = boltzmann_distribution(IsingCoefficients(J + J.T, rng.normal(size=10)), 3.0)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_limit(self):
        with pytest.raises(DimensionLimitError):
            boltzmann_distribution(IsingCoefficients(np.zeros((16, 16)), np.zeros(16)), 1.0)
