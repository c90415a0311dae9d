"""
Two-state system dephased by a bath of N independent spins.

The environment branch attached to the system state |up> is

    E_up(t) = prod_k (alpha_k e^{i g_k t} |up>_k + beta_k e^{-i g_k t} |dn>_k)

and E_dn(t) = E_up(-t). The reduced state keeps its populations while the
coherence is multiplied by r(t) = <E_dn(t)|E_up(t)>.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import StateError
from .hilbert import DensityMatrix, PureState, purity

MAX_SPINS = 24


@dataclass(frozen=True)
class SpinBathParams:
    """
    Parameters
    ----------
    couplings : array_like
        g_k in rad per unit time.
    env_init : array_like, shape (N, 2)
        (alpha_k, beta_k) of each environment spin.
    system_init : array_like, shape (2,)
        (a, b) of the system.
    hbar : float
    """

    couplings: np.ndarray
    env_init: np.ndarray
    system_init: np.ndarray = (1 / np.sqrt(2), 1 / np.sqrt(2))
    hbar: float = 1.0

    def __post_init__(self):
        g = np.array(self.couplings, dtype=float).ravel()
        env = np.array(self.env_init, dtype=complex).reshape(-1, 2)
        sys = np.array(self.system_init, dtype=complex).ravel()
        if not 1 <= g.size <= MAX_SPINS:
            raise StateError(f"bath size must lie in [1, {MAX_SPINS}]")
        if env.shape[0] != g.size:
            raise StateError("one (alpha, beta) pair per coupling required")
        if sys.size != 2 or abs(np.vdot(sys, sys).real - 1) > 1e-12:
            raise StateError("system_init must be a normalized pair")
        if np.any(np.abs(np.sum(np.abs(env) ** 2, axis=1) - 1) > 1e-12):
            raise StateError("environment spins must be normalized")
        for name, v in (("couplings", g), ("env_init", env), ("system_init", sys)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def n_spins(self) -> int:
        return self.couplings.size

    @property
    def imbalance(self) -> np.ndarray:
        """|alpha_k|^2 - |beta_k|^2."""
        return np.abs(self.env_init[:, 0]) ** 2 - np.abs(self.env_init[:, 1]) ** 2


class BlochPoint(NamedTuple):
    x: float
    y: float
    z: float


def haar_spin(rng: np.random.Generator, size: int) -> np.ndarray:
    """Haar-random single-spin states, shape (size, 2)."""
    v = rng.normal(size=(size, 2)) + 1j * rng.normal(size=(size, 2))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_bath(n_spins: int, rng: np.random.Generator, g0: float = 1.0,
                system_init=(1 / np.sqrt(2), 1 / np.sqrt(2))) -> SpinBathParams:
    """Couplings uniform on [0.5, 1.5] g0 and Haar-random spin states."""
    g = rng.uniform(0.5 * g0, 1.5 * g0, size=n_spins)
    return SpinBathParams(g, haar_spin(rng, n_spins), system_init)


def decoherence_factor(params: SpinBathParams, t):
    """
    r(t) = prod_k [cos 2 g_k t + i (|alpha_k|^2 - |beta_k|^2) sin 2 g_k t].

    Parameters
    ----------
    params : SpinBathParams
    t : float or array_like

    Returns
    -------
    complex or ndarray of complex
    """
    t_arr = np.asarray(t, dtype=float)
    ph = 2.0 * np.multiply.outer(t_arr, params.couplings)
    r = np.prod(np.cos(ph) + 1j * params.imbalance * np.sin(ph), axis=-1)
    return complex(r) if t_arr.ndim == 0 else r


def evolve_reduced(params: SpinBathParams, t: float) -> DensityMatrix:
    """Reduced 2x2 system state at time t."""
    a, b = params.system_init
    r = decoherence_factor(params, t)
    c = a * np.conj(b) * r
    m = np.array([[abs(a) ** 2, c], [np.conj(c), abs(b) ** 2]])
    return DensityMatrix(m, (2,), check=False)


def _level_weights(params: SpinBathParams) -> tuple[np.ndarray, np.ndarray]:
    """Energy offsets sum_k +-g_k and weights p_j over all 2^N bath states."""
    freq = np.zeros(1)
    p = np.ones(1)
    for g, (al, be) in zip(params.couplings, params.env_init):
        freq = np.concatenate([freq + g, freq - g])
        p = np.concatenate([p * abs(al) ** 2, p * abs(be) ** 2])
    return freq, p


def asymptotic_coherence(params: SpinBathParams) -> tuple[float, float]:
    """
    Residual coherence after the initial decay.

    Returns
    -------
    bound : float
        2^-N prod_k [1 + (|alpha_k|^2 - |beta_k|^2)^2].
    time_avg : float
        Long-time average of |r|^2, sum of squared weights per distinct
        frequency. Equals ``bound`` when no two levels are degenerate.
    """
    z = params.imbalance
    bound = float(np.prod(0.5 * (1.0 + z ** 2)))
    freq, p = _level_weights(params)
    scale = max(np.max(np.abs(params.couplings)), 1e-300)
    key = np.round(freq / scale, 9)
    _, inv = np.unique(key, return_inverse=True)
    grouped = np.bincount(inv.ravel(), weights=p)
    return bound, float(np.sum(grouped ** 2))


def time_average_r2(params: SpinBathParams, t_min: float, t_max: float, n_samples: int = 20000) -> float:
    """Average of |r(t)|^2 over a logarithmic time grid on [t_min, t_max]."""
    t = np.geomspace(t_min, t_max, n_samples)
    r = decoherence_factor(params, t)
    # trapezoid weights keep the log grid from biasing toward early times
    w = np.gradient(t)
    return float(np.sum(w * np.abs(r) ** 2) / np.sum(w))


def bloch_trajectory(params: SpinBathParams, times: Sequence[float]) -> list[BlochPoint]:
    """
    Bloch coordinates z = |a|^2 - |b|^2, x + i y = 2 a b* r(t).

    The factor 2 puts pure states on the unit sphere, so the in-plane
    radius is 2 |a b| |r(t)|.
    """
    a, b = params.system_init
    r = np.atleast_1d(decoherence_factor(params, np.asarray(times, dtype=float)))
    c = 2 * a * np.conj(b) * r
    z = float(abs(a) ** 2 - abs(b) ** 2)
    return [BlochPoint(float(w.real), float(w.imag), z) for w in c]


def bloch_array(points: Sequence[BlochPoint]) -> np.ndarray:
    return np.array([tuple(p) for p in points], dtype=float).reshape(-1, 3)


def uniform_phases(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """Independent phases uniform on [0, 2 pi)."""
    return rng.uniform(0.0, 2.0 * np.pi, size=(n, d))


def dephasing_ensemble(phase_sampler: Callable, state: PureState, n_realizations: int,
                       rng: np.random.Generator | int | None = None, on: int = 1):
    """
    Ensemble of random-phase realizations of a correlated state.

    Each realization multiplies the component on record |A_j> of subsystem
    ``on`` by exp(i phi_j); each member stays pure while the average loses
    its off-diagonal terms.

    Parameters
    ----------
    phase_sampler : callable
        ``phase_sampler(rng, n, d)`` returns phases of shape (n, d).
    state : PureState
    n_realizations : int
    rng : Generator or int, optional
    on : int
        Subsystem carrying the phases.

    Returns
    -------
    purities : ndarray
        Purity of every realization.
    average : DensityMatrix
    """
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    rng = np.random.default_rng(rng)
    d = state.dims[on]
    phases = np.asarray(phase_sampler(rng, n_realizations, d), dtype=float)
    if phases.shape != (n_realizations, d):
        raise ValueError("phase sampler returned the wrong shape")
    psi = state.amplitudes.reshape(state.dims)
    shape = [1] * len(state.dims)
    shape[on] = d
    acc = np.zeros((state.dim, state.dim), dtype=complex)
    pur = np.empty(n_realizations)
    for n in range(n_realizations):
        v = (psi * np.exp(1j * phases[n]).reshape(shape)).ravel()
        rho_n = np.outer(v, v.conj())
        pur[n] = purity(DensityMatrix(rho_n, state.dims, check=False))
        acc += rho_n
    return pur, DensityMatrix(acc / n_realizations, state.dims, state.labels, check=False)


def three_system_state(amplitudes, records, env_overlap: float) -> DensityMatrix:
    """
    System-apparatus state after the environment has monitored the record.

    The apparatus is correlated with the system, then the environment
    couples to the apparatus so that branch k carries |eps_k>. For two
    branches <eps_0|eps_1> = ``env_overlap``; for more branches the
    pairwise overlap is the same real number.

    Parameters
    ----------
    amplitudes : array_like
        Branch amplitudes a_k.
    records : int
        Dimension of system and apparatus (pointer states are the
        computational basis).
    env_overlap : float
        Pairwise overlap of environment states in [0, 1].

    Returns
    -------
    DensityMatrix
        rho_SA = sum_{kl} a_k a_l* <eps_l|eps_k> |s_k A_k><s_l A_l|.
    """
    a = np.asarray(amplitudes, dtype=complex)
    a = a / np.linalg.norm(a)
    n = int(records)
    if a.size != n:
        raise ValueError("one amplitude per record required")
    ov = np.full((n, n), float(env_overlap))
    np.fill_diagonal(ov, 1.0)
    idx = np.arange(n) * n + np.arange(n)
    m = np.zeros((n * n, n * n), dtype=complex)
    m[np.ix_(idx, idx)] = np.outer(a, a.conj()) * ov
    return DensityMatrix(m, (n, n), ("system", "apparatus"))
