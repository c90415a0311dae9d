"""
Premeasurement models.

Controlled-not and controlled-shift couplings between a system and an
apparatus, the conjugate (Fourier) basis, amplification of records into
broad packets, the action cost of establishing a record, and three
observer-dependent descriptions of a classical measurement.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import StateError
from .hilbert import DensityMatrix, PureState, mutual_information

_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


class WrapWarning(UserWarning):
    """Shifted records wrap around the apparatus register."""


@dataclass(frozen=True)
class CShiftSpec:
    """
    Controlled-shift coupling S (dim n) -> A (dim N) with gain G.

    |s_j>|A_k> -> |s_j>|A_{(k + G j) mod N}>.
    """

    system_dim: int
    apparatus_dim: int
    gain: int = 1

    def __post_init__(self):
        if int(self.gain) != self.gain or self.gain < 1:
            raise StateError("gain must be a positive integer")
        if self.system_dim < 1 or self.apparatus_dim < 1:
            raise StateError("register dimensions must be positive")

    @property
    def wraps(self) -> bool:
        return self.system_dim * self.gain > self.apparatus_dim


@dataclass(frozen=True)
class ApparatusPacket:
    """
    Shift-covariant apparatus packet alpha_l(j) = alpha(j - l).

    Parameters
    ----------
    center : int
        Packet center l.
    offsets : ndarray of int
        Support j - l.
    coefficients : ndarray of complex
        Normalized amplitudes on ``offsets``.
    spread : float
        Dispersion Delta.
    """

    center: int
    offsets: np.ndarray
    coefficients: np.ndarray
    spread: float

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if abs(np.vdot(c, c).real - 1.0) > 1e-12:
            raise StateError("packet coefficients are not normalized")

    @classmethod
    def gaussian(cls, spread: float, center: int = 0) -> "ApparatusPacket":
        """
        Discrete Gaussian alpha(j) ~ exp(-j^2 / 2 Delta^2), cut at 6 Delta.

        ``spread = 0`` gives a single-site packet.
        """
        if spread < 0:
            raise StateError("spread must be non-negative")
        half = int(np.floor(6 * spread))
        j = np.arange(-half, half + 1)
        if spread == 0:
            a = np.ones(1)
        else:
            a = np.exp(-(j ** 2) / (2.0 * spread ** 2))
        a = a / np.linalg.norm(a)
        return cls(int(center), j, a.astype(complex), float(spread))

    def vector(self, N: int, shift: int = 0) -> np.ndarray:
        """Amplitudes of |a_{center+shift}> on an N-site register (mod N)."""
        v = np.zeros(N, dtype=complex)
        np.add.at(v, (self.offsets + self.center + shift) % N, self.coefficients)
        return v


class ActionReport(NamedTuple):
    action: float
    optimal_bound: float
    per_bit: float


def cnot_apply(state: PureState, direction: str = "logical") -> PureState:
    """
    Controlled-not on two qubits.

    Parameters
    ----------
    state : PureState
        Two-qubit state; qubit 0 is the control in the logical basis.
    direction : {"logical", "conjugate"}
        ``logical`` applies the gate to amplitudes in {|0>,|1>}.
        ``conjugate`` treats the amplitudes as coefficients in {|+>,|->}
        and returns coefficients in that basis; there the same gate acts
        with qubit 1 as control.

    Returns
    -------
    PureState
    """
    if state.dims != (2, 2):
        raise StateError("cnot_apply needs a two-qubit state")
    a = state.amplitudes
    if direction == "logical":
        out = _CNOT @ a
    elif direction == "conjugate":
        HH = np.kron(_H, _H)
        out = HH @ (_CNOT @ (HH @ a))
    else:
        raise ValueError("direction must be 'logical' or 'conjugate'")
    return PureState.from_amplitudes(out, (2, 2), state.labels)


def cshift_permutation(spec: CShiftSpec, power: int = 1) -> np.ndarray:
    """Index map of the controlled shift on the flattened S x A register."""
    n, N, G = spec.system_dim, spec.apparatus_dim, spec.gain
    j, k = np.divmod(np.arange(n * N), N)
    return j * N + (k + power * G * j) % N


def cshift_apply(spec: CShiftSpec, state: PureState, power: int = 1) -> PureState:
    """
    Controlled shift |s_j>|A_k> -> |s_j>|A_{(k + G j) mod N}>.

    Parameters
    ----------
    spec : CShiftSpec
    state : PureState
        State with dims (n, N).
    power : int
        Number of applications; negative values apply the inverse.
    """
    if state.dims != (spec.system_dim, spec.apparatus_dim):
        raise StateError(f"state dims {state.dims} do not match the shift spec")
    if spec.wraps:
        warnings.warn("n*G exceeds N: records wrap around", WrapWarning, stacklevel=2)
    out = np.empty_like(state.amplitudes)
    out[cshift_permutation(spec, power)] = state.amplitudes
    return PureState(out, state.dims, state.labels)


def conjugate_basis(N: int) -> np.ndarray:
    """
    Fourier basis |B_k> = N^{-1/2} sum_l exp(2 pi i k l / N) |A_l>.

    Returns
    -------
    ndarray
        Unitary whose column k is |B_k>.
    """
    if N < 2:
        raise StateError("conjugate basis needs N >= 2")
    l = np.arange(N)
    return np.exp(2j * np.pi * np.outer(l, l) / N) / np.sqrt(N)


def premeasurement_action(probs: Sequence[float], overlaps: Sequence[float]) -> ActionReport:
    """
    Least action (units of hbar) to correlate an apparatus with a system.

    Parameters
    ----------
    probs : sequence of float
        Outcome weights |alpha_j|^2.
    overlaps : sequence of float
        |<A_0|A_j>| for each outcome.

    Returns
    -------
    ActionReport
        ``action`` is sum_j |alpha_j|^2 arccos|<A_0|A_j>|,
        ``optimal_bound`` is arcsin sqrt(1 - 1/N) for N outcomes and
        ``per_bit`` divides the action by lg N.
    """
    p = np.asarray(probs, dtype=float)
    o = np.asarray(overlaps, dtype=float)
    if p.shape != o.shape:
        raise ValueError("probs and overlaps must have equal length")
    if np.any(o < 0) or np.any(o > 1):
        raise ValueError("overlaps must lie in [0, 1]")
    if abs(p.sum() - 1.0) > 1e-12 or np.any(p < 0):
        raise ValueError("probabilities must be non-negative and sum to 1")
    N = p.size
    action = float(np.sum(p * np.arccos(o)))
    bound = math.asin(math.sqrt(1.0 - 1.0 / N))
    per_bit = action / math.log2(N) if N > 1 else math.inf
    return ActionReport(action, bound, per_bit)


def amplify(spec: CShiftSpec, packet: ApparatusPacket, system: PureState):
    """
    Controlled shift of a broad apparatus packet.

    Parameters
    ----------
    spec : CShiftSpec
    packet : ApparatusPacket
        Initial apparatus state |a_l>.
    system : PureState
        System state of dimension n.

    Returns
    -------
    joint : PureState
        sum_k mu_k |s_k>|a_{l + G k}>.
    overlap : ndarray
        |<a_{l+Gk}|a_{l+Gk'}>|^2 for all k, k'.
    wrapped : bool
        True when n G > N.
    """
    n, N, G = spec.system_dim, spec.apparatus_dim, spec.gain
    if system.dims != (n,):
        raise StateError("system state must be a single register of dimension n")
    wrapped = spec.wraps
    if wrapped:
        warnings.warn("n*G exceeds N: records wrap around", WrapWarning, stacklevel=2)
    recs = np.stack([packet.vector(N, G * k) for k in range(n)])
    joint = (system.amplitudes[:, None] * recs).ravel()
    gram = np.abs(recs.conj() @ recs.T) ** 2
    return PureState(joint, (n, N)), gram, wrapped


def record_information(joint: PureState) -> float:
    """Mutual information between system and apparatus registers."""
    return mutual_information(joint, [0])


def observer_descriptions(prior: str, states, probs, outcome: int | None = None) -> DensityMatrix:
    """
    Post-measurement state of memory x record x system for three observers.

    Registers: the first holds prior knowledge (index ``n`` is the ensemble
    description, index ``i < n`` a preexisting record of state i); the
    second is the measurement record (index ``n`` is blank); the third is
    the system.

    Parameters
    ----------
    prior : {"insider", "discoverer", "outsider"}
    states : sequence of array_like
        Candidate system states sigma_i.
    probs : sequence of float
        Ensemble probabilities p_i.
    outcome : int, optional
        Known state (insider) or observed outcome (discoverer).

    Returns
    -------
    DensityMatrix
    """
    sig = [np.asarray(s, dtype=complex) / np.linalg.norm(s) for s in states]
    p = np.asarray(probs, dtype=float)
    n = len(sig)
    if p.size != n or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("need one probability per state, summing to 1")
    d = sig[0].size
    dims = (n + 1, n + 1, d)

    def proj(i_mem, i_rec, s):
        v = np.kron(np.kron(np.eye(n + 1)[i_mem], np.eye(n + 1)[i_rec]), s)
        return np.outer(v, v.conj())

    if prior in ("insider", "discoverer"):
        if outcome is None or not 0 <= outcome < n:
            raise ValueError(f"{prior} needs an outcome index in [0, {n})")
        mem = outcome if prior == "insider" else n
        m = proj(mem, outcome, sig[outcome])
    elif prior == "outsider":
        if outcome is not None:
            raise ValueError("outsider does not know the outcome")
        m = sum(p[i] * proj(n, i, sig[i]) for i in range(n))
    else:
        raise ValueError(f"unknown prior {prior!r}")
    return DensityMatrix(m, dims, ("memory", "record", "system"))
