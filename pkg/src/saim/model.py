"""Problem and energy representations over binary variables.

A :class:`ConstrainedQuadraticProblem` describes

    min  f(x) = 1/2 x^T W x + h^T x     over x in {0, 1}^n
    s.t. A x <= b  (or A x = b once slack bits are added)

and :func:`compile_energy` turns it into the penalized Lagrangian

    L(x) = f(x) + P ||A x - b||^2 + lambda^T (A x - b)

as a :class:`BinaryQuadraticEnergy`.  :func:`to_ising` maps any binary
energy onto spin coefficients for ``m = 2 x - 1`` with

    H(m) = -sum_{i<j} J_ij m_i m_j - sum_i h_i m_i + constant.

All conversions carry their constant offsets so energies agree exactly
across representations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

LE = "le"
EQ = "eq"


def _frozen(array, dtype=np.float64) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SlackLayout:
    """Which variables are slack bits and the integer weight of each.

    ``columns[m]`` lists the variable indices appended for row ``m`` and
    ``weights[m]`` their weights ``1, 2, ..., 2**(Q_m - 1)``.
    """

    n_items: int
    columns: tuple[tuple[int, ...], ...]
    weights: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.columns) != len(self.weights):
            raise ValueError("slack columns and weights disagree on row count")
        for cols, ws in zip(self.columns, self.weights):
            if len(cols) != len(ws):
                raise ValueError("slack columns and weights disagree in length")
            if tuple(ws) != tuple(1 << q for q in range(len(ws))):
                raise ValueError(f"slack weights must be 1, 2, 4, ...; got {ws}")

    @property
    def n_slack(self) -> int:
        return sum(len(c) for c in self.columns)


@dataclass(frozen=True, eq=False)
class ConstrainedQuadraticProblem:
    """Binary quadratic objective with linear constraints.

    ``W`` is symmetric with zero diagonal; ``f(x) = 1/2 x^T W x + h^T x``.
    ``objective_scale`` and ``constraint_scale`` accumulate the factors
    divided out by :func:`normalize`, so ``f * objective_scale`` is the
    objective in the units of the raw instance.
    """

    W: np.ndarray
    h: np.ndarray
    A: np.ndarray
    b: np.ndarray
    sense: tuple[str, ...] = ()
    slack_layout: SlackLayout | None = None
    objective_scale: float = 1.0
    constraint_scale: float = 1.0

    def __post_init__(self):
        W = _frozen(self.W)
        h = _frozen(self.h)
        A = _frozen(np.atleast_2d(self.A))
        b = _frozen(np.atleast_1d(self.b))
        n = h.shape[0]
        if W.shape != (n, n):
            raise ValueError(f"W has shape {W.shape}, expected {(n, n)}")
        if A.shape[1] != n or A.shape[0] != b.shape[0]:
            raise ValueError(f"A has shape {A.shape}, incompatible with n={n}, m={b.shape[0]}")
        if not np.array_equal(W, W.T):
            raise ValueError("W must be symmetric")
        if np.any(np.diag(W) != 0):
            raise ValueError("W must have a zero diagonal; fold x_i^2 terms into h")
        if np.any(b <= 0):
            raise ValueError("capacities b must be strictly positive")
        sense = tuple(self.sense) if self.sense else (LE,) * b.shape[0]
        if len(sense) != b.shape[0] or any(s not in (LE, EQ) for s in sense):
            raise ValueError(f"bad constraint sense {sense!r}")
        if self.slack_layout is not None:
            if any(s != EQ for s in sense):
                raise ValueError("slack-extended problems must be in equality form")
            if len(self.slack_layout.columns) != b.shape[0]:
                raise ValueError("slack layout row count does not match constraints")
            if self.slack_layout.n_items + self.slack_layout.n_slack != n:
                raise ValueError("slack layout does not account for every variable")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sense", sense)

    @classmethod
    def knapsack(cls, W, h, A, b, **kwargs) -> ConstrainedQuadraticProblem:
        """Build a problem from possibly upper-triangular ``W``; symmetrizes it."""
        W = np.asarray(W, dtype=np.float64)
        W = np.triu(W, 1)
        return cls(W=W + W.T, h=h, A=A, b=b, **kwargs)

    @property
    def n_vars(self) -> int:
        return self.h.shape[0]

    @property
    def n_items(self) -> int:
        if self.slack_layout is None:
            return self.n_vars
        return self.slack_layout.n_items

    @property
    def n_constraints(self) -> int:
        return self.b.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ConstrainedQuadraticProblem):
            return NotImplemented
        return (
            np.array_equal(self.W, other.W)
            and np.array_equal(self.h, other.h)
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
            and self.sense == other.sense
            and self.slack_layout == other.slack_layout
            and self.objective_scale == other.objective_scale
            and self.constraint_scale == other.constraint_scale
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BinaryQuadraticEnergy:
    """``energy(x) = sum_{i<j} quad_ij x_i x_j + lin . x + constant``."""

    quad: np.ndarray
    lin: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        lin = _frozen(self.lin)
        n = lin.shape[0]
        quad = np.asarray(self.quad, dtype=np.float64)
        if quad.shape != (n, n):
            raise ValueError(f"quad has shape {quad.shape}, expected {(n, n)}")
        if np.any(np.tril(quad) != 0):
            raise ValueError("quad must be strictly upper triangular")
        object.__setattr__(self, "quad", _frozen(quad))
        object.__setattr__(self, "lin", lin)
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def n_vars(self) -> int:
        return self.lin.shape[0]

    def energy(self, x) -> float | np.ndarray:
        """Evaluate on one state ``x`` or on a stack of states (rows)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_vars:
            raise ValueError(f"state length {x.shape[-1]} != {self.n_vars}")
        pair = np.einsum("...i,ij,...j->...", x, self.quad, x)
        out = pair + x @ self.lin + self.constant
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class IsingCoefficients:
    """Spin Hamiltonian ``-sum_{i<j} J_ij m_i m_j - h_field . m + constant``."""

    J: np.ndarray
    h_field: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        h = _frozen(self.h_field)
        J = _frozen(self.J)
        n = h.shape[0]
        if J.shape != (n, n):
            raise ValueError(f"J has shape {J.shape}, expected {(n, n)}")
        if not np.array_equal(J, J.T) or np.any(np.diag(J) != 0):
            raise ValueError("J must be symmetric with zero diagonal")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "h_field", h)
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def n_spins(self) -> int:
        return self.h_field.shape[0]

    def energy(self, m) -> float | np.ndarray:
        m = np.asarray(m, dtype=np.float64)
        if m.shape[-1] != self.n_spins:
            raise ValueError(f"spin state length {m.shape[-1]} != {self.n_spins}")
        pair = 0.5 * np.einsum("...i,ij,...j->...", m, self.J, m)
        out = -pair - m @ self.h_field + self.constant
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LagrangeState:
    """Penalty weight ``P`` and one multiplier per constraint row."""

    P: float
    lam: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.P < 0:
            raise ValueError("penalty P must be non-negative")
        object.__setattr__(self, "P", float(self.P))
        lam = np.zeros(0) if self.lam is None else self.lam
        object.__setattr__(self, "lam", _frozen(np.atleast_1d(lam)))

    @classmethod
    def initial(cls, P: float, n_constraints: int) -> LagrangeState:
        return cls(P, np.zeros(n_constraints))


def add_slack_variables(problem: ConstrainedQuadraticProblem) -> ConstrainedQuadraticProblem:
    """Turn every ``A_m x <= b_m`` into ``A_m x + sum_q 2^q s_mq = b_m``.

    Row ``m`` gains ``Q_m = floor(log2(b_m) + 1)`` binary slack variables.
    Their encodable range ``0 .. 2^Q_m - 1`` can exceed ``b_m``; that only
    adds unreachable slack values and never makes an infeasible x feasible.
    """
    if problem.slack_layout is not None or any(s != LE for s in problem.sense):
        raise ValueError("slack variables need inequality rows; problem already has equalities")
    b = problem.b
    if np.any(b != np.round(b)) or np.any(b < 1):
        raise ValueError(f"capacities must be integers >= 1 to add slack bits, got {b}")
    n = problem.n_vars
    counts = [int(bm).bit_length() for bm in b]
    total = n + sum(counts)

    W = np.zeros((total, total))
    W[:n, :n] = problem.W
    h = np.zeros(total)
    h[:n] = problem.h
    A = np.zeros((problem.n_constraints, total))
    A[:, :n] = problem.A

    columns, weights = [], []
    start = n
    for row, q in enumerate(counts):
        cols = tuple(range(start, start + q))
        ws = tuple(1 << k for k in range(q))
        A[row, start:start + q] = ws
        columns.append(cols)
        weights.append(ws)
        start += q

    layout = SlackLayout(n_items=n, columns=tuple(columns), weights=tuple(weights))
    return replace(problem, W=W, h=h, A=A, sense=(EQ,) * problem.n_constraints, slack_layout=layout)


def normalize(problem: ConstrainedQuadraticProblem) -> tuple[ConstrainedQuadraticProblem, float, float]:
    """Scale the objective by ``max(|W|, |h|)`` and constraints by ``max(|A|, |b|)``.

    Returns the scaled problem and the two factors that were divided out.
    Feasible set and argmin are unchanged.
    """
    scale_obj = float(max(np.abs(problem.W).max(initial=0.0), np.abs(problem.h).max(initial=0.0)))
    scale_con = float(max(np.abs(problem.A).max(initial=0.0), np.abs(problem.b).max(initial=0.0)))
    if scale_obj == 0.0:
        raise ValueError("cannot normalize an all-zero objective")
    if scale_con == 0.0:
        raise ValueError("cannot normalize all-zero constraints")
    scaled = replace(
        problem,
        W=problem.W / scale_obj,
        h=problem.h / scale_obj,
        A=problem.A / scale_con,
        b=problem.b / scale_con,
        objective_scale=problem.objective_scale * scale_obj,
        constraint_scale=problem.constraint_scale * scale_con,
    )
    return scaled, scale_obj, scale_con


def prepare(problem: ConstrainedQuadraticProblem) -> tuple[ConstrainedQuadraticProblem, float, float]:
    """Slack-extend the integer problem, then normalize the extended one."""
    return normalize(add_slack_variables(problem))


def _penalty_energy(problem: ConstrainedQuadraticProblem, P: float) -> BinaryQuadraticEnergy:
    # f(x) + P ||Ax - b||^2 with x_i^2 = x_i folded into the linear part
    A, b = problem.A, problem.b
    gram = A.T @ A
    quad = np.triu(problem.W, 1) + 2.0 * P * np.triu(gram, 1)
    lin = problem.h + P * np.diag(gram) - 2.0 * P * (A.T @ b)
    constant = P * float(b @ b)
    return BinaryQuadraticEnergy(quad, lin, constant)


def _with_multipliers(base: BinaryQuadraticEnergy, problem: ConstrainedQuadraticProblem, lam: np.ndarray) -> BinaryQuadraticEnergy:
    lin = base.lin + problem.A.T @ lam
    constant = base.constant - float(lam @ problem.b)
    return BinaryQuadraticEnergy(base.quad, lin, constant)


def compile_energy(problem: ConstrainedQuadraticProblem, state: LagrangeState) -> BinaryQuadraticEnergy:
    """Binary coefficients of ``f(x) + P ||Ax - b||^2 + lambda^T (Ax - b)``."""
    lam = state.lam
    if lam.shape != (problem.n_constraints,):
        raise ValueError(f"lambda has length {lam.shape[0]}, problem has {problem.n_constraints} constraints")
    return _with_multipliers(_penalty_energy(problem, state.P), problem, lam)


def to_ising(energy: BinaryQuadraticEnergy) -> IsingCoefficients:
    """Substitute ``x = (m + 1) / 2``."""
    sym = energy.quad + energy.quad.T
    J = -sym / 4.0
    h_field = -energy.lin / 2.0 - sym.sum(axis=1) / 4.0
    constant = energy.constant + energy.lin.sum() / 2.0 + energy.quad.sum() / 4.0
    return IsingCoefficients(J, h_field, constant)


def spins_to_binary(m) -> np.ndarray:
    return ((np.asarray(m) + 1) // 2).astype(np.int8)


def binary_to_spins(x) -> np.ndarray:
    return (2 * np.asarray(x) - 1).astype(np.int8)


def _as_state(problem: ConstrainedQuadraticProblem, x, allow_items: bool) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a single binary state")
    if x.shape[0] == problem.n_vars:
        return x
    if allow_items and x.shape[0] == problem.n_items:
        full = np.zeros(problem.n_vars)
        full[: problem.n_items] = x
        return full
    raise ValueError(f"state length {x.shape[0]} does not match problem with {problem.n_vars} variables")


def evaluate_f(problem: ConstrainedQuadraticProblem, x) -> float:
    """Objective value; ``x`` may omit trailing slack bits (they carry no value)."""
    x = _as_state(problem, x, allow_items=True)
    return float(0.5 * x @ problem.W @ x + problem.h @ x)


def evaluate_g(problem: ConstrainedQuadraticProblem, x) -> np.ndarray:
    """Constraint residual ``A x - b`` on the full state."""
    x = _as_state(problem, x, allow_items=False)
    return problem.A @ x - problem.b


def evaluate_L(problem: ConstrainedQuadraticProblem, state: LagrangeState, x) -> float:
    x = _as_state(problem, x, allow_items=False)
    g = problem.A @ x - problem.b
    if state.lam.shape != g.shape:
        raise ValueError("lambda length does not match constraint rows")
    return evaluate_f(problem, x) + state.P * float(g @ g) + float(state.lam @ g)


def is_feasible(problem: ConstrainedQuadraticProblem, x, rtol: float = 1e-9) -> bool:
    """Check the original constraints on the item bits.

    Slack-extended problems are checked as ``A_items x_items <= b``; slack
    bits are ignored.  Tolerance absorbs rounding from normalization.
    """
    x = np.asarray(x, dtype=np.float64)
    n = problem.n_items
    if x.shape[0] not in (n, problem.n_vars):
        raise ValueError(f"state length {x.shape[0]} does not match problem")
    load = problem.A[:, :n] @ x[:n]
    slack = rtol * np.maximum(1.0, np.abs(problem.b))
    if problem.slack_layout is not None:
        return bool(np.all(load <= problem.b + slack))
    ok = True
    for row, s in enumerate(problem.sense):
        if s == LE:
            ok &= load[row] <= problem.b[row] + slack[row]
        else:
            ok &= abs(load[row] - problem.b[row]) <= slack[row]
    return bool(ok)


def compute_density(obj, mode: str = "auto") -> float:
    """Fraction of nonzero pairwise couplings among all spins.

    Accepts a problem (its ``W``), a binary energy (``quad``) or Ising
    coefficients (``J``).  ``mode="linear"`` (or ``"auto"`` with no pairwise
    terms) uses ``2 / (N + 1)``: linear fields counted as couplings to one
    extra fixed reference spin.
    """
    if isinstance(obj, ConstrainedQuadraticProblem):
        pairs = obj.W
    elif isinstance(obj, BinaryQuadraticEnergy):
        pairs = obj.quad
    elif isinstance(obj, IsingCoefficients):
        pairs = obj.J
    else:
        raise TypeError(f"cannot compute density of {type(obj).__name__}")
    n = pairs.shape[0]
    nonzero = int(np.count_nonzero(np.triu(pairs, 1)))
    if mode not in ("auto", "quadratic", "linear"):
        raise ValueError(f"unknown density mode {mode!r}")
    if mode == "linear" or (mode == "auto" and nonzero == 0):
        return 2.0 / (n + 1)
    if n < 2:
        return 0.0
    return nonzero / (n * (n - 1) / 2)


def random_problem(rng: np.random.Generator, n: int, m: int = 1, integer: bool = False) -> ConstrainedQuadraticProblem:
    """Small random problem for tests and self-checks."""
    if integer:
        W = np.triu(rng.integers(-5, 6, size=(n, n)), 1).astype(float)
        h = rng.integers(-10, 11, size=n).astype(float)
        A = rng.integers(1, 10, size=(m, n)).astype(float)
        b = np.maximum(1, np.floor(rng.uniform(0.2, 0.8, size=m) * A.sum(axis=1)))
    else:
        W = np.triu(rng.normal(size=(n, n)), 1)
        h = rng.normal(size=n)
        A = rng.uniform(0.0, 1.0, size=(m, n))
        b = rng.uniform(0.5, 2.0, size=m)
    return ConstrainedQuadraticProblem.knapsack(W, h, A, b)


__all__: Sequence[str] = [
    "EQ",
    "LE",
    "BinaryQuadraticEnergy",
    "ConstrainedQuadraticProblem",
    "IsingCoefficients",
    "LagrangeState",
    "SlackLayout",
    "add_slack_variables",
    "binary_to_spins",
    "compile_energy",
    "compute_density",
    "evaluate_L",
    "evaluate_f",
    "evaluate_g",
    "is_feasible",
    "normalize",
    "prepare",
    "random_problem",
    "spins_to_binary",
    "to_ising",
]
