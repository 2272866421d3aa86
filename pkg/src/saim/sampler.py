"""Software p-bit Ising machine.

Each p-bit reads its input ``I_i = sum_j J_ij m_j + h_i`` and resamples as
``m_i = sign(tanh(beta * I_i) + r)`` with ``r`` uniform on ``(-1, 1)``.
One sweep updates spins ``0 .. N-1`` in order, each seeing the partially
updated state, which is a sequential Gibbs sampler for
``P(m) ~ exp(-beta * H(m))``.

The noise values are drawn in numpy from an :class:`RngStream` and handed
to a compiled kernel, so results depend only on ``(seed, stream)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from saim.model import IsingCoefficients

# noise values drawn per kernel call (bounds memory)
_CHUNK_VALUES = 1 << 22
MAX_HISTOGRAM_SPINS = 15


class RngStream:
    """Reproducible source of p-bit noise keyed by ``(seed, stream)``.

    Distinct stream ids give independent generators (numpy ``SeedSequence``
    spawn keys), so parallel runs never share random numbers.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"

    def noise(self, shape) -> np.ndarray:
        """Uniform values on ``[-1, 1)``, one per spin update."""
        return self._gen.uniform(-1.0, 1.0, size=shape)

    def spins(self, n: int) -> np.ndarray:
        return (2 * self._gen.integers(0, 2, size=n) - 1).astype(np.float64)


@dataclass(frozen=True)
class AnnealSchedule:
    """Linear inverse-temperature ramp from 0 to ``beta_max`` over ``sweeps`` MCS."""

    beta_max: float
    sweeps: int

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("an anneal needs at least one sweep")
        if self.beta_max < 0:
            raise ValueError("beta_max must be non-negative")

    def betas(self) -> np.ndarray:
        if self.sweeps == 1:
            return np.array([float(self.beta_max)])
        return self.beta_max * np.arange(self.sweeps) / (self.sweeps - 1)


@nb.njit(cache=True)
def _local_fields(J, h, m):
    n = m.shape[0]
    field = h.copy()
    for i in range(n):
        for j in range(n):
            field[i] += J[i, j] * m[j]
    return field


@nb.njit(cache=True)
def _sweeps(J, field, m, betas, noise):
    # field is kept equal to J @ m + h, updated only when a spin flips
    n = m.shape[0]
    for t in range(betas.shape[0]):
        beta = betas[t]
        for i in range(n):
            s = 1.0 if np.tanh(beta * field[i]) + noise[t, i] >= 0.0 else -1.0
            if s != m[i]:
                delta = s - m[i]
                m[i] = s
                for j in range(n):
                    field[j] += J[i, j] * delta


@nb.njit(cache=True)
def _sweeps_histogram(J, field, m, beta, noise, counts):
    n = m.shape[0]
    for t in range(noise.shape[0]):
        for i in range(n):
            s = 1.0 if np.tanh(beta * field[i]) + noise[t, i] >= 0.0 else -1.0
            if s != m[i]:
                delta = s - m[i]
                m[i] = s
                for j in range(n):
                    field[j] += J[i, j] * delta
        index = 0
        for i in range(n):
            if m[i] > 0.0:
                index |= 1 << i
        counts[index] += 1


def _check_state(m, coeffs: IsingCoefficients) -> np.ndarray:
    m = np.array(m, dtype=np.float64)
    if m.shape != (coeffs.n_spins,):
        raise ValueError(f"state has shape {m.shape}, expected ({coeffs.n_spins},)")
    if not np.all(np.abs(m) == 1.0):
        raise ValueError("spin states must be exactly +1 or -1")
    return m


def _run(coeffs: IsingCoefficients, m: np.ndarray, betas: np.ndarray, rng: RngStream) -> np.ndarray:
    n = coeffs.n_spins
    J = np.ascontiguousarray(coeffs.J)
    h = np.ascontiguousarray(coeffs.h_field)
    field = _local_fields(J, h, m)
    step = max(1, _CHUNK_VALUES // max(n, 1))
    for start in range(0, betas.shape[0], step):
        chunk = np.ascontiguousarray(betas[start:start + step])
        _sweeps(J, field, m, chunk, rng.noise((chunk.shape[0], n)))
    return m


def gibbs_sweep(state, coeffs: IsingCoefficients, beta: float, rng: RngStream) -> np.ndarray:
    """One Monte Carlo sweep at fixed ``beta``; returns the new spin state."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    m = _check_state(state, coeffs)
    return _run(coeffs, m, np.array([float(beta)]), rng).astype(np.int8)


def anneal_run(coeffs: IsingCoefficients, schedule: AnnealSchedule, rng: RngStream, initial=None) -> np.ndarray:
    """Anneal from a uniformly random state and return the last sample.

    ``initial`` overrides the random start (used for symmetry checks).
    """
    m = rng.spins(coeffs.n_spins) if initial is None else _check_state(initial, coeffs)
    return _run(coeffs, m, schedule.betas(), rng).astype(np.int8)


def state_index(m) -> int:
    """Histogram index of a spin state: bit ``i`` is set when ``m_i = +1``."""
    m = np.asarray(m)
    return int(np.sum((m > 0).astype(np.int64) << np.arange(m.shape[0], dtype=np.int64)))


def sample_equilibrium(coeffs: IsingCoefficients, beta: float, n_samples: int, burn_in: int, rng: RngStream) -> np.ndarray:
    """Empirical distribution over all ``2**N`` states at fixed ``beta``.

    Indexing follows :func:`state_index`.
    """
    n = coeffs.n_spins
    if n > MAX_HISTOGRAM_SPINS:
        raise ValueError(f"{n} spins is too many for an exact histogram (limit {MAX_HISTOGRAM_SPINS})")
    if n_samples < 1 or burn_in < 0:
        raise ValueError("need n_samples >= 1 and burn_in >= 0")
    m = rng.spins(n)
    if burn_in:
        _run(coeffs, m, np.full(burn_in, float(beta)), rng)
    J = np.ascontiguousarray(coeffs.J)
    field = _local_fields(J, np.ascontiguousarray(coeffs.h_field), m)
    counts = np.zeros(1 << n, dtype=np.int64)
    step = max(1, _CHUNK_VALUES // max(n, 1))
    for start in range(0, n_samples, step):
        rows = min(step, n_samples - start)
        _sweeps_histogram(J, field, m, float(beta), rng.noise((rows, n)), counts)
    return counts / n_samples
