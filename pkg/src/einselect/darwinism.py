"""
The environment as a witness.

Branch states a|s_0>|E_0> + b|s_1>|E_1> with product records, the
information individual environment fragments carry about the system,
redundancy ratios, the action distance between records and the
decoherence functional of projector histories.

The system is always subsystem 0; environment qubits are 1..N.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import StateError
from .hilbert import (
    DensityMatrix,
    PureState,
    _blocks,
    _cond_entropy,
    _qubit_basis,
    mutual_information,
    partial_trace,
    von_neumann_entropy,
)

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
POINTER = np.eye(2, dtype=complex)
CONJUGATE = _H
MAX_ENV = 20


@dataclass(frozen=True)
class BranchState:
    """
    a |s_0> prod_k |e0_k> + b |s_1> prod_k |e1_k>.

    Parameters
    ----------
    a, b : complex
    records : ndarray, shape (2, N, 2)
        Per-branch, per-qubit record states.
    """

    a: complex
    b: complex
    records: np.ndarray

    def __post_init__(self):
        r = np.array(self.records, dtype=complex)
        if r.ndim == 2 and r.shape[0] == 2 and r.size == 0:
            r = r.reshape(2, 0, 2)
        if r.ndim != 3 or r.shape[0] != 2 or r.shape[2] != 2:
            raise StateError("records must have shape (2, N, 2)")
        if r.shape[1] > MAX_ENV:
            raise StateError(f"at most {MAX_ENV} environment qubits")
        if abs(abs(self.a) ** 2 + abs(self.b) ** 2 - 1) > 1e-12:
            raise StateError("|a|^2 + |b|^2 must equal 1")
        norms = np.sum(np.abs(r) ** 2, axis=2)
        if np.any(np.abs(norms - 1) > 1e-12):
            raise StateError("record states must be normalized")
        r.setflags(write=False)
        object.__setattr__(self, "records", r)

    @property
    def N(self) -> int:
        return self.records.shape[1]


@dataclass(frozen=True)
class Partition:
    """Disjoint environment fragments covering qubits 1..N."""

    fragments: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        frags = tuple(tuple(sorted(int(i) for i in f)) for f in self.fragments)
        flat = [i for f in frags for i in f]
        if any(len(f) == 0 for f in frags):
            raise StateError("fragments must be non-empty")
        if len(flat) != len(set(flat)):
            raise StateError("fragments overlap")
        if flat and (min(flat) < 1):
            raise StateError("environment indices start at 1")
        object.__setattr__(self, "fragments", frags)

    @classmethod
    def singletons(cls, N: int) -> "Partition":
        return cls(tuple((k,) for k in range(1, N + 1)))

    def covers(self, N: int) -> bool:
        return sorted(i for f in self.fragments for i in f) == list(range(1, N + 1))


def _product(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for v in vectors:
        out = np.kron(out, v)
    return out


def build_branch_state(a: complex, b: complex, records, N: int | None = None) -> PureState:
    """
    Joint (N+1)-qubit state of system and environment.

    Parameters
    ----------
    a, b : complex
        Branch amplitudes of |0> and |1> of the system.
    records : "orthogonal" or array_like of shape (2, N, 2)
        ``"orthogonal"`` gives |00...0> and |11...1>.
    N : int, optional
        Needed with ``"orthogonal"``.

    Returns
    -------
    PureState
    """
    if isinstance(records, str):
        if records != "orthogonal" or N is None:
            raise ValueError("records must be an array or 'orthogonal' with N")
        e = np.eye(2, dtype=complex)
        records = np.stack([np.tile(e[0], (N, 1)), np.tile(e[1], (N, 1))]).reshape(2, N, 2)
    bs = records if isinstance(records, BranchState) else BranchState(a, b, records)
    n = bs.N
    v = bs.a * np.kron([1, 0], _product(bs.records[0])) + bs.b * np.kron([0, 1], _product(bs.records[1]))
    return PureState(v, (2,) * (n + 1))


def hadamard_branches(state: PureState) -> tuple[np.ndarray, np.ndarray]:
    """
    Environment states attached to the Hadamard system basis.

    Returns normalized |E_+>, |E_-> with psi = (|+>|E_+> + |->|E_->)/sqrt(2);
    for orthogonal records <E_+|E_-> = |a|^2 - |b|^2.
    """
    psi = state.amplitudes.reshape(2, -1)
    ep = (psi[0] + psi[1]) / np.sqrt(2)
    em = (psi[0] - psi[1]) / np.sqrt(2)
    return ep / np.linalg.norm(ep), em / np.linalg.norm(em)


def _system_entropy(state: PureState) -> float:
    return von_neumann_entropy(partial_trace(state, [0]))


def fragment_mutual_info(state: PureState, fragment: Iterable[int], system_basis="symmetric") -> float:
    """
    Information a fragment holds about the system, in bits.

    Parameters
    ----------
    state : PureState
    fragment : iterable of int
        Environment indices (>= 1).
    system_basis : "symmetric" or ndarray
        ``"symmetric"`` gives the quantum mutual information
        I = H(S) + H(E_k) - H(S, E_k). A 2x2 unitary (basis in columns)
        gives J = H(E_k) - sum_s p_s H(E_k | s), the information revealed
        about the fragment by measuring the system in that basis.
    """
    frag = sorted(set(int(i) for i in fragment))
    if not frag or frag[0] < 1:
        raise StateError("fragment must be a non-empty set of environment indices")
    rho = partial_trace(state, [0] + frag)
    if isinstance(system_basis, str):
        if system_basis != "symmetric":
            raise ValueError("system_basis must be 'symmetric' or a unitary")
        return mutual_information(rho, [0])
    V = np.asarray(system_basis, dtype=complex)
    hE = von_neumann_entropy(partial_trace(rho, list(range(1, len(rho.dims)))))
    return hE - float(_cond_entropy(_blocks(rho, 0), V))


def _info_sum(state: PureState, partition: Partition, mode: str, V) -> float:
    return sum(fragment_mutual_info(state, f, "symmetric" if mode == "I" else V) for f in partition.fragments)


def redundancy_ratio(state: PureState, partition: Partition | None = None, mode: str = "J",
                     basis="pointer") -> float:
    """
    R = sum_k info(S : E_k) / H(S).

    Parameters
    ----------
    state : PureState
    partition : Partition, optional
        Defaults to single-qubit fragments.
    mode : {"I", "J"}
    basis : "pointer", "conjugate", "optimize" or 2x2 unitary
        System measurement basis for J. ``"optimize"`` maximizes over
        qubit bases (2 degree grid then Nelder-Mead).

    Raises
    ------
    StateError
        When H(S) vanishes.
    """
    n_env = len(state.dims) - 1
    partition = partition or Partition.singletons(n_env)
    hS = _system_entropy(state)
    if hS < 1e-9:
        raise StateError("system entropy vanishes; redundancy undefined")
    if mode == "I":
        return _info_sum(state, partition, "I", None) / hS
    if mode != "J":
        raise ValueError("mode must be 'I' or 'J'")
    if isinstance(basis, str):
        if basis == "pointer":
            V = POINTER
        elif basis == "conjugate":
            V = CONJUGATE
        elif basis == "optimize":
            return optimize_redundancy(state, partition)[0]
        else:
            raise ValueError(f"unknown basis {basis!r}")
    else:
        V = np.asarray(basis, dtype=complex)
    return _info_sum(state, partition, "J", V) / hS


def optimize_redundancy(state: PureState, partition: Partition) -> tuple[float, np.ndarray]:
    """Maximize R_J over system qubit bases; returns (R_J, basis)."""
    hS = _system_entropy(state)
    data = []
    for f in partition.fragments:
        rho = partial_trace(state, [0] + list(f))
        hE = von_neumann_entropy(partial_trace(rho, list(range(1, len(rho.dims)))))
        data.append((hE, _blocks(rho, 0)))

    def total(V):
        return sum(hE - _cond_entropy(R, V) for hE, R in data)

    th = np.deg2rad(np.arange(0.0, 180.0 + 1e-9, 2.0))
    ph = np.deg2rad(np.arange(0.0, 360.0, 2.0))
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    vals = total(_qubit_basis(TH, PH))
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    res = minimize(lambda x: -float(total(_qubit_basis(x[0], x[1]))), [TH[i, j], PH[i, j]],
                   method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-12})
    x = res.x if -res.fun >= vals[i, j] else (TH[i, j], PH[i, j])
    best = max(-res.fun, vals[i, j])
    return float(best) / hS, _qubit_basis(x[0], x[1])


def _set_partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        yield [[first]] + part


def best_partition(state: PureState, mode: str = "J", basis="pointer") -> tuple[float, Partition]:
    """Brute-force the partition with the largest redundancy ratio (N <= 8)."""
    n_env = len(state.dims) - 1
    if n_env > 8:
        raise ValueError("partition search is limited to 8 environment qubits")
    best, arg = -math.inf, None
    for part in _set_partitions(list(range(1, n_env + 1))):
        P = Partition(tuple(tuple(f) for f in part))
        r = redundancy_ratio(state, P, mode, basis)
        if r > best + 1e-12:
            best, arg = r, P
    return best, arg


def partial_information(state: PureState, mode: str = "I", basis="pointer",
                        max_fragments: int = 64) -> list[dict]:
    """
    Mean information vs fragment size m = 1..N.

    Fragments of each size are enumerated in lexicographic order up to
    ``max_fragments``.
    """
    n_env = len(state.dims) - 1
    V = {"pointer": POINTER, "conjugate": CONJUGATE}.get(basis, basis) if mode == "J" else "symmetric"
    out = []
    for m in range(1, n_env + 1):
        frags = list(itertools.islice(itertools.combinations(range(1, n_env + 1), m), max_fragments))
        vals = [fragment_mutual_info(state, f, V) for f in frags]
        out.append({"size": m, "mean": float(np.mean(vals)), "n_fragments": len(vals)})
    return out


# ---------------------------------------------------------------------------
# c-not sequence


def _apply_cnot(amps: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    t = amps.reshape((2,) * n).copy()
    idx = [slice(None)] * n
    idx[control] = 1
    sub = t[tuple(idx)]
    tgt = target if target < control else target - 1
    t[tuple(idx)] = np.flip(sub, axis=tgt)
    return t.ravel()


def cnot_sequence(a: complex, b: complex, N: int, n_cnots: int | None = None) -> list[dict]:
    """
    Record the system into environment qubits one c-not at a time.

    Returns rows with R_I, R_J (pointer) and R_J (conjugate) after
    0, 1, ..., n_cnots gates; R values are 0 before any record exists.
    """
    n_cnots = N if n_cnots is None else n_cnots
    n = N + 1
    v = np.zeros(2 ** n, dtype=complex)
    v[0], v[2 ** N] = a, b
    rows = []
    for k in range(n_cnots + 1):
        if k > 0:
            v = _apply_cnot(v, n, 0, k)
        st = PureState(v, (2,) * n)
        if _system_entropy(st) < 1e-9:
            # no record yet: nothing to be redundant about
            rows.append({"n_cnots": k, "R_I": 0.0, "R_J_pointer": 0.0, "R_J_conjugate": 0.0})
            continue
        rows.append({
            "n_cnots": k,
            "R_I": redundancy_ratio(st, mode="I"),
            "R_J_pointer": redundancy_ratio(st, mode="J", basis="pointer"),
            "R_J_conjugate": redundancy_ratio(st, mode="J", basis="conjugate"),
        })
    return rows


def redundancy_rate(rows: Sequence[dict], key: str = "R_J_pointer") -> np.ndarray:
    """Finite-difference change of a redundancy ratio per c-not."""
    return np.diff([r[key] for r in rows])


# ---------------------------------------------------------------------------
# action distance


def action_distance(records_a, records_b) -> float:
    """
    Least rotation action separating two product records, in units of
    (pi/2) hbar: sum_k arccos|<a_k|b_k>| / (pi/2).

    Parameters
    ----------
    records_a, records_b : array_like, shape (N, d)
        Per-subsystem pure states.
    """
    A = np.asarray(records_a, dtype=complex)
    B = np.asarray(records_b, dtype=complex)
    if A.ndim != 2 or A.shape != B.shape:
        raise StateError("records must be equal-shape (N, d) arrays of product factors")
    A = A / np.linalg.norm(A, axis=1, keepdims=True)
    B = B / np.linalg.norm(B, axis=1, keepdims=True)
    ov = np.clip(np.abs(np.sum(A.conj() * B, axis=1)), 0.0, 1.0)
    return float(np.sum(np.arccos(ov)) / (np.pi / 2))


_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def flip_distance(state_a, state_b, max_weight: int = 3, tol: float = 1e-10) -> int | None:
    """
    Fewest single-qubit Pauli flips mapping one (possibly entangled) record
    onto another up to a global phase.

    Each flip rotates one subsystem by a right angle, so the count is the
    action in units of (pi/2) hbar along that route. Returns None when no
    product of at most ``max_weight`` flips works.
    """
    a = np.asarray(state_a, dtype=complex)
    b = np.asarray(state_b, dtype=complex)
    n = int(round(math.log2(a.size)))
    if 2 ** n != a.size or a.shape != b.shape:
        raise StateError("records must be qubit registers of equal size")
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    if abs(abs(np.vdot(a, b)) - 1) < tol:
        return 0
    for w in range(1, min(max_weight, n) + 1):
        for sites in itertools.combinations(range(n), w):
            for ops in itertools.product("XYZ", repeat=w):
                t = a.reshape((2,) * n)
                for q, o in zip(sites, ops):
                    t = np.moveaxis(np.tensordot(_PAULI[o], t, axes=([1], [q])), 0, q)
                if abs(abs(np.vdot(t.ravel(), b)) - 1) < tol:
                    return w
    return None


# ---------------------------------------------------------------------------
# histories


def decoherence_functional(rho, chain_a: Sequence[np.ndarray], chain_b: Sequence[np.ndarray],
                           unitaries: Sequence[np.ndarray] | None = None) -> complex:
    """
    D(a, b) = Tr(P^n_a U ... P^1_a U rho U^+ P^1_b ... U^+ P^n_b).

    Parameters
    ----------
    rho : DensityMatrix or ndarray
    chain_a, chain_b : sequences of projectors
        Equal length; projector k acts after the k-th interval.
    unitaries : sequence of ndarray, optional
        Evolution for each interval (identity when omitted).
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if len(chain_a) != len(chain_b):
        raise ValueError("chains must have equal length")
    if unitaries is not None and len(unitaries) != len(chain_a):
        raise ValueError("one unitary per interval required")
    for P in list(chain_a) + list(chain_b):
        P = np.asarray(P)
        if np.max(np.abs(P @ P - P)) > 1e-10 or np.max(np.abs(P - P.conj().T)) > 1e-10:
            raise StateError("chain entries must be orthogonal projectors")
    X = m
    for k, (Pa, Pb) in enumerate(zip(chain_a, chain_b)):
        if unitaries is not None:
            U = np.asarray(unitaries[k])
            X = U @ X @ U.conj().T
        X = np.asarray(Pa) @ X @ np.asarray(Pb)
    return complex(np.trace(X))


def run_length_size(bits: Sequence[int]) -> int:
    """
    Length of the run-length encoding of an outcome sequence (number of
    runs times two symbols). A non-normative stand-in for algorithmic
    complexity: constant records compress to 2, random ones do not.
    """
    bits = list(bits)
    if not bits:
        return 0
    runs = 1 + sum(1 for x, y in zip(bits, bits[1:]) if x != y)
    return 2 * runs


def sample_record(state: PureState, basis, rng: np.random.Generator, outcome: int = 0) -> list[int]:
    """
    Measure every environment qubit of a branch state in ``basis`` after
    the system was found in pointer state ``outcome``.
    """
    psi = state.amplitudes.reshape(2, -1)[outcome]
    psi = psi / np.linalg.norm(psi)
    n = len(state.dims) - 1
    V = np.asarray(basis, dtype=complex)
    t = psi.reshape((2,) * n)
    for q in range(n):
        t = np.moveaxis(np.tensordot(V.conj().T, t, axes=([1], [q])), 0, q)
    p = np.abs(t.ravel()) ** 2
    k = rng.choice(p.size, p=p / p.sum())
    return [int(c) for c in np.binary_repr(k, width=n)]
