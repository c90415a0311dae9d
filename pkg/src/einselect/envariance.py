"""
Environment-assisted invariance and probabilities from symmetry.

Probabilities here are exact ``fractions.Fraction`` values; floating point
appears only in state vectors used for envariance checks and in the
Gaussian approximation of relative frequencies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import StateError
from .hilbert import DensityMatrix, PureState, partial_trace

MAX_M = 10 ** 6


@dataclass(frozen=True)
class SchmidtState:
    """
    sum_k alpha_k |s_k>|e_k>.

    Parameters
    ----------
    coefficients : array_like of complex
    system_basis, env_basis : ndarray, optional
        Unitaries whose columns are |s_k> and |e_k> (identity by default).
    """

    coefficients: np.ndarray
    system_basis: np.ndarray | None = None
    env_basis: np.ndarray | None = None

    def __post_init__(self):
        a = np.array(self.coefficients, dtype=complex).ravel()
        if abs(np.vdot(a, a).real - 1) > 1e-12:
            raise StateError("Schmidt coefficients must be normalized")
        d = a.size
        for name in ("system_basis", "env_basis"):
            B = getattr(self, name)
            B = np.eye(d, dtype=complex) if B is None else np.asarray(B, dtype=complex)
            if B.shape != (d, d) or np.max(np.abs(B.conj().T @ B - np.eye(d))) > 1e-10:
                raise StateError(f"{name} must be a {d}x{d} unitary")
            object.__setattr__(self, name, B)
        object.__setattr__(self, "coefficients", a)

    @property
    def d(self) -> int:
        return self.coefficients.size

    def matrix(self) -> np.ndarray:
        """Coefficient matrix C[i, j] of |i>_S |j>_E in the computational bases."""
        return self.system_basis @ np.diag(self.coefficients) @ self.env_basis.T

    def vector(self) -> PureState:
        return PureState(self.matrix().ravel(), (self.d, self.d), ("system", "environment"))

    def reduced_system(self) -> DensityMatrix:
        return partial_trace(self.vector(), [0])


@dataclass(frozen=True)
class FineGraining:
    """Multiplicities m_k with |alpha_k|^2 = m_k / M."""

    multiplicities: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(x) for x in self.multiplicities)
        if any(x != y for x, y in zip(m, self.multiplicities)):
            raise StateError("multiplicities must be integers")
        if not m or any(x < 0 for x in m) or sum(m) == 0:
            raise StateError("multiplicities must be non-negative with a positive sum")
        if sum(m) > MAX_M:
            raise StateError(f"M exceeds {MAX_M}")
        object.__setattr__(self, "multiplicities", m)

    @property
    def M(self) -> int:
        return sum(self.multiplicities)

    def weights(self) -> list[Fraction]:
        return [Fraction(m, self.M) for m in self.multiplicities]

    @classmethod
    def from_probabilities(cls, probs: Sequence[Fraction]) -> "FineGraining":
        fr = [Fraction(p) for p in probs]
        if sum(fr) != 1:
            raise StateError("probabilities must sum to exactly 1")
        den = math.lcm(*[f.denominator for f in fr])
        return cls(tuple(int(f * den) for f in fr))


def _counter_unitary(state: SchmidtState, u_system: np.ndarray, tol: float):
    """Environment unitary undoing u_system, or None."""
    a = state.coefficients
    S, E = state.system_basis, state.env_basis
    u = S.conj().T @ u_system @ S  # system unitary in the Schmidt basis
    supp = np.abs(a) > tol
    if not np.all(supp):
        # the support must be invariant for a counter-operation to exist
        if np.max(np.abs(u[np.ix_(~supp, supp)]), initial=0.0) > tol:
            return None
    A = a[supp]
    us = u[np.ix_(supp, supp)]
    # need u diag(a) v^T = diag(a) on the support, so v^T = diag(a)^-1 u^+ diag(a)
    vt = (us.conj().T * A[None, :]) / A[:, None]
    if np.max(np.abs(vt.conj().T @ vt - np.eye(A.size))) > tol:
        return None
    v = np.eye(state.d, dtype=complex)
    v[np.ix_(supp, supp)] = vt.T
    return E @ v @ E.conj().T


def check_envariance(state: SchmidtState, u_system, tol: float = 1e-10):
    """
    Whether a system unitary can be undone by acting on the environment.

    Returns
    -------
    envariant : bool
    counter_unitary : ndarray or None
        u_E with (u_S x u_E)|psi> = |psi>, in the environment's
        computational basis.
    """
    u = np.asarray(u_system, dtype=complex)
    if u.shape != (state.d, state.d) or np.max(np.abs(u.conj().T @ u - np.eye(state.d))) > 1e-10:
        raise StateError("u_system must be a unitary on the system factor")
    v = _counter_unitary(state, u, tol)
    if v is None:
        return False, None
    C = state.matrix()
    out = u @ C @ v.T
    if np.max(np.abs(out - C)) > 1e-9:
        return False, None
    return True, v


def phase_unitary(state: SchmidtState, phases) -> np.ndarray:
    """diag(exp(i sigma_k)) in the Schmidt basis of the system."""
    S = state.system_basis
    return S @ np.diag(np.exp(1j * np.asarray(phases, dtype=float))) @ S.conj().T


def swap_unitary(d: int, k: int, j: int, phase: float = 0.0, basis: np.ndarray | None = None) -> np.ndarray:
    """e^{i phi}|k><j| + e^{-i phi}|j><k| plus identity elsewhere."""
    u = np.eye(d, dtype=complex)
    u[[k, j], [k, j]] = 0
    u[k, j] = np.exp(1j * phase)
    u[j, k] = np.exp(-1j * phase)
    if basis is not None:
        u = basis @ u @ basis.conj().T
    return u


def swap_counterswap(state: SchmidtState, k: int, j: int, phase: float = 0.0) -> SchmidtState:
    """
    Swap |s_k> <-> |s_j> on the system, then |e_k> <-> |e_j> on the
    environment. The net effect exchanges alpha_k and alpha_j.
    """
    d = state.d
    if not (0 <= k < d and 0 <= j < d):
        raise IndexError("swap index out of range")
    uS = swap_unitary(d, k, j, phase, state.system_basis)
    uE = swap_unitary(d, k, j, -phase, state.env_basis)
    C = uS @ state.matrix() @ uE.T
    coeff = np.einsum("ik,ij,jk->k", state.system_basis.conj(), C, state.env_basis.conj())
    return SchmidtState(coeff, state.system_basis, state.env_basis)


# ---------------------------------------------------------------------------
# Born rule by fine-graining


@dataclass(frozen=True)
class FineGrainedTerm:
    """One equal-weight term of the fine-grained expansion."""

    outcome: int
    index: int
    weight: Fraction


def fine_grained_terms(grain: FineGraining, route: str = "apparatus") -> list[FineGrainedTerm]:
    """
    Terms of the fine-grained state.

    ``route="apparatus"``: sum_j |s_k(j)>|a_j>|e_j>, each from
    sqrt(m_k/M) times 1/sqrt(m_k) of the apparatus refinement.
    ``route="counterweight"``: sum_k sqrt(m_k)|s_k>|A_k>|eps_k>|C_k> with
    |C_k> = sum_j |c_j>/sqrt(m_k), expanded over the counterweight index.
    """
    M = grain.M
    terms = []
    j = 0
    for k, m in enumerate(grain.multiplicities):
        if m == 0:
            continue
        if route == "apparatus":
            coarse, fine = Fraction(m, M), Fraction(1, m)
        elif route == "counterweight":
            coarse, fine = Fraction(m, 1), Fraction(1, m)
        else:
            raise ValueError("route must be 'apparatus' or 'counterweight'")
        for _ in range(m):
            terms.append(FineGrainedTerm(k, j, coarse * fine))
            j += 1
    if route == "counterweight":
        total = sum(t.weight for t in terms)
        terms = [FineGrainedTerm(t.outcome, t.index, t.weight / total) for t in terms]
    return terms


def born_from_finegraining(grain: FineGraining, route: str = "apparatus",
                           verify_numeric: bool = True) -> list[Fraction]:
    """
    p(s_k) from envariant swaps of the fine-grained state.

    Every pair of fine-grained terms must carry identical squared
    amplitude (exactly), so each is envariantly swappable with every
    other; all M terms are then equiprobable at 1/M and p(s_k) counts the
    terms in cell k. When ``verify_numeric`` and M <= 32 the equal-weight
    swaps are also checked on an explicit state vector.

    Returns
    -------
    list of Fraction
    """
    terms = fine_grained_terms(grain, route)
    M = len(terms)
    w0 = terms[0].weight
    if any(t.weight != w0 for t in terms):
        raise StateError("fine-grained terms are not equal-weight; swaps are not envariant")
    if verify_numeric and M <= 32:
        st = SchmidtState(np.full(M, 1 / math.sqrt(M)))
        for i in range(1, M):
            ok, _ = check_envariance(st, swap_unitary(M, 0, i))
            if not ok:
                raise StateError("numeric swap check failed")
    each = Fraction(1, M)
    probs = [Fraction(0)] * len(grain.multiplicities)
    for t in terms:
        probs[t.outcome] += each
    return probs


def group_probability(probs: Sequence[Fraction], group: Sequence[int]) -> Fraction:
    """Probability of the union of outcomes (additivity over swappable terms)."""
    return sum((probs[i] for i in set(group)), Fraction(0))


def rational_approximation(p: float, max_denominator: int = 10 ** 4) -> tuple[Fraction, float]:
    """Nearest fraction with bounded denominator and the approximation gap."""
    f = Fraction(p).limit_denominator(max_denominator)
    return f, abs(float(f) - p)


def born_from_amplitudes(alpha, max_denominator: int = 10 ** 4) -> tuple[list[Fraction], float]:
    """
    Born weights for arbitrary amplitudes via rational approximation.

    Each |alpha_k|^2 is approximated with a common-denominator fine
    graining; the largest approximation gap is reported.
    """
    p = np.abs(np.asarray(alpha, dtype=complex)) ** 2
    p = p / p.sum()
    fr = [rational_approximation(float(x), max_denominator)[0] for x in p[:-1]]
    fr.append(1 - sum(fr, Fraction(0)))
    if fr[-1] < 0:
        raise StateError("rational approximation failed to stay normalized")
    probs = born_from_finegraining(FineGraining.from_probabilities(fr), verify_numeric=False)
    gap = float(np.max(np.abs(np.array([float(q) for q in probs]) - p)))
    return probs, gap


# ---------------------------------------------------------------------------
# relative frequencies


@dataclass(frozen=True)
class FrequencyDistribution:
    N: int
    alpha2: Fraction
    exact: list[Fraction] = field(repr=False)
    gaussian: np.ndarray = field(repr=False)

    def tail(self, delta: float) -> Fraction:
        """Exact P(|n/N - |alpha|^2| > delta)."""
        a = self.alpha2
        return sum((p for n, p in enumerate(self.exact) if abs(Fraction(n, self.N) - a) > Fraction(delta)),
                   Fraction(0))

    def total_variation(self) -> float:
        ex = np.array([float(p) for p in self.exact])
        return 0.5 * float(np.sum(np.abs(ex - self.gaussian)))


def frequency_distribution(alpha2, ensemble_size: int) -> FrequencyDistribution:
    """
    Distribution of the count n of outcome 0 in N independent copies.

    exact:    C(N, n) |alpha|^{2n} |beta|^{2(N-n)} as Fractions
    gaussian: exp(-(n - N|alpha|^2)^2 / (2 N |alpha beta|^2)) / sqrt(2 pi N |alpha beta|^2)
    """
    a = Fraction(alpha2)
    if not 0 <= a <= 1:
        raise ValueError("alpha2 must lie in [0, 1]")
    N = int(ensemble_size)
    if N < 1 or N > 10 ** 3:
        raise ValueError("exact mode supports 1 <= N <= 1000")
    b = 1 - a
    exact = [math.comb(N, n) * a ** n * b ** (N - n) for n in range(N + 1)]
    var = N * float(a * b)
    n = np.arange(N + 1)
    if var > 0:
        g = np.exp(-((n - N * float(a)) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)
    else:
        g = (n == round(N * float(a))).astype(float)
    return FrequencyDistribution(N, a, exact, g)


def frequency_rows(dist: FrequencyDistribution) -> list[dict]:
    return [{"n": n, "p_exact_num": p.numerator, "p_exact_den": p.denominator, "p_gauss": float(g)}
            for n, (p, g) in enumerate(zip(dist.exact, dist.gaussian))]


def fraction_str(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


def born_json(grain: FineGraining, probs: Sequence[Fraction]) -> dict:
    return {"multiplicities": list(grain.multiplicities), "M": grain.M,
            "probabilities": [fraction_str(p) for p in probs]}


def joint_commutator_norm(psi: PureState, observable_system) -> float:
    """
    Spectral norm of [|psi><psi|, O_S x 1]; non-zero whenever psi is not
    an eigenvector of O_S x 1, e.g. entangled psi and non-degenerate O_S.
    """
    dS = psi.dims[0]
    dE = psi.dim // dS
    P = np.outer(psi.amplitudes, psi.amplitudes.conj())
    O = np.kron(np.asarray(observable_system, dtype=complex), np.eye(dE))
    return float(np.linalg.norm(P @ O - O @ P, 2))
