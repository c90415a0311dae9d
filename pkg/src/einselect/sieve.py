"""
Predictability sieve.

Candidate pure states are evolved under a shared open-system dynamics and
ranked by the purity they retain (or the entropy they gain) after a fixed
horizon. The best-scoring candidates are the einselected states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import EinselectError, StateError
from .hilbert import DensityMatrix, purity, von_neumann_entropy
from .qbm import QbmParams
from .spinbath import SpinBathParams, decoherence_factor

TIE_TOL = 1e-6


@dataclass(frozen=True)
class GaussianCandidate:
    """
    Minimum-uncertainty Gaussian with squeeze s.

    Delta x^2 = s hbar / (2 M Omega), Delta p^2 = hbar M Omega / (2 s).
    """

    s: float
    center: tuple[float, float] = (0.0, 0.0)
    M: float = 1.0
    Omega: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not self.s > 0:
            raise StateError("squeeze must be positive")

    @property
    def var_x(self) -> float:
        return self.s * self.hbar / (2 * self.M * self.Omega)

    @property
    def var_p(self) -> float:
        return self.hbar * self.M * self.Omega / (2 * self.s)

    @property
    def covariance(self) -> np.ndarray:
        return np.diag([self.var_x, self.var_p])

    @property
    def label(self) -> str:
        return f"s={self.s:g}"


@dataclass(frozen=True)
class SieveResult:
    """
    One ranked candidate.

    ``score`` is the retained purity for ``score="purity"`` and the entropy
    gained (bits) for ``score="entropy"``. ``tied`` marks candidates within
    1e-6 of the best score.
    """

    candidate: Any
    label: str
    score: float
    purity: float
    entropy: float
    horizon: float
    index: int
    tied: bool = False
    disqualified: str | None = None


def purity_loss_rate(state, params: QbmParams, x_op: np.ndarray | None = None) -> tuple[float, bool]:
    """
    Instantaneous d/dt Tr rho^2 under high-temperature Brownian motion.

    For a pure state the rate is -(4 eta kB T / hbar^2) Var(x) with
    eta = 2 M gamma. For a mixed state the general form

        -(4 eta kB T / hbar^2) Tr(rho^2 x^2 - (rho x)^2) + 2 gamma Tr rho^2

    is used and the second return value is True.

    Parameters
    ----------
    state : GaussianCandidate or DensityMatrix
    params : QbmParams
    x_op : ndarray, optional
        Position operator in the basis of a DensityMatrix input.

    Returns
    -------
    rate : float
    mixed : bool
    """
    eta = 2 * params.M * params.gamma0
    c = 4 * eta * params.kB * params.T / params.hbar ** 2
    if isinstance(state, GaussianCandidate):
        return -c * state.var_x, False
    if x_op is None:
        raise ValueError("x_op is required for density-matrix input")
    rho = state.matrix if isinstance(state, DensityMatrix) else np.asarray(state)
    x = np.asarray(x_op)
    r2 = rho @ rho
    pur = float(np.trace(r2).real)
    if pur > 1 - 1e-8:
        var = float(np.trace(rho @ x @ x).real - np.trace(rho @ x).real ** 2)
        return -c * var, False
    rx = rho @ x
    term = float(np.trace(r2 @ x @ x).real - np.trace(rx @ rx).real)
    return -c * term + 2 * params.gamma0 * pur, True


def cycle_averaged_loss(candidate: GaussianCandidate, D: float) -> float:
    """Purity change over one oscillator period, -2 D (Dx^2 + Dp^2 / (M Omega)^2)."""
    c = candidate
    return -2.0 * D * (c.var_x + c.var_p / (c.M * c.Omega) ** 2)


def gaussian_info_rates(I_action: float, params: QbmParams) -> tuple[float, float, float]:
    """
    Growth rates for a Gaussian of action I (units of hbar).

    Returns
    -------
    I_dot : float
        gamma kB T / (hbar Omega).
    H_dot : float
        I_dot lg((I + 1)/(I - 1)) in bits; ``math.inf`` at I = 1.
    purity_dot : float
        Rate of purity loss I_dot / I^2.
    """
    if I_action < 1:
        raise ValueError("action must be at least 1 (in units of hbar)")
    I_dot = params.gamma0 * params.kB * params.T / (params.hbar * params.Omega)
    H_dot = math.inf if I_action == 1 else I_dot * math.log2((I_action + 1) / (I_action - 1))
    return I_dot, H_dot, I_dot / I_action ** 2


# ---------------------------------------------------------------------------
# dynamics


def gaussian_entropy_bits(cov: np.ndarray, hbar: float) -> float:
    """von Neumann entropy of a one-mode Gaussian from its covariance matrix."""
    nu = math.sqrt(max(np.linalg.det(cov), 0.0)) / hbar
    if nu <= 0.5 + 1e-12:
        return 0.0
    return (nu + 0.5) * math.log2(nu + 0.5) - (nu - 0.5) * math.log2(nu - 0.5)


@dataclass(frozen=True)
class QbmGaussianDynamics:
    """
    High-temperature Brownian motion of a harmonic oscillator.

    Gaussian states stay Gaussian; the covariance obeys

        d<x^2>/dt = 2 C / M
        dC/dt     = <p^2>/M - M Omega^2 <x^2> - 2 gamma C
        d<p^2>/dt = -2 M Omega^2 C - 4 gamma <p^2> + 2 D

    with D = 2 M gamma kB T and C the symmetrized x-p covariance.
    """

    params: QbmParams

    def covariance(self, cov0: np.ndarray, horizon: float) -> np.ndarray:
        from scipy.integrate import solve_ivp

        P = self.params
        g, M, W2 = P.gamma0, P.M, P.Omega ** 2
        D = 2 * M * g * P.kB * P.T

        def rhs(_, y):
            xx, c, pp = y
            return [2 * c / M, pp / M - M * W2 * xx - 2 * g * c, -2 * M * W2 * c - 4 * g * pp + 2 * D]

        y0 = [cov0[0, 0], cov0[0, 1], cov0[1, 1]]
        sol = solve_ivp(rhs, (0.0, horizon), y0, method="DOP853", rtol=1e-11, atol=1e-14)
        if not sol.success:
            raise EinselectError(sol.message)
        xx, c, pp = sol.y[:, -1]
        return np.array([[xx, c], [c, pp]])

    def default_horizon(self) -> float:
        return 2 * math.pi / self.params.Omega

    def evaluate(self, cand: GaussianCandidate, horizon: float) -> tuple[float, float]:
        cov = self.covariance(cand.covariance, horizon)
        hb = self.params.hbar
        det = np.linalg.det(cov)
        if not det > 0:
            raise EinselectError("covariance lost positivity")
        return hb / (2 * math.sqrt(det)), gaussian_entropy_bits(cov, hb)


@dataclass(frozen=True)
class SpinBathDynamics:
    """
    Qubit candidates dephased by a spin bath.

    Candidates are amplitude pairs (a, b); the system part of ``bath`` is
    ignored.
    """

    bath: SpinBathParams

    def default_horizon(self) -> float:
        return math.pi / (2 * float(np.mean(self.bath.couplings)))

    def evaluate(self, cand, horizon: float) -> tuple[float, float]:
        a, b = np.asarray(cand, dtype=complex) / np.linalg.norm(cand)
        c = a * np.conj(b) * decoherence_factor(self.bath, horizon)
        rho = DensityMatrix(np.array([[abs(a) ** 2, c], [np.conj(c), abs(b) ** 2]]), (2,), check=False)
        return purity(rho), von_neumann_entropy(rho)


@dataclass(frozen=True)
class WignerDynamics:
    """
    Gaussian candidates placed on a Wigner grid and evolved with diffusion.

    The entropy reported here is the order-2 Renyi entropy -lg(purity).
    """

    grid: Any
    D: float
    dt: float
    mode: str = "moyal"

    def default_horizon(self) -> float:
        pot = self.grid.potential
        if pot is not None and pot.kind == "harmonic":
            return 2 * math.pi / pot.params["Omega"]
        raise ValueError("no default horizon for this potential; pass one explicitly")

    def evaluate(self, cand: GaussianCandidate, horizon: float) -> tuple[float, float]:
        from . import wigner

        g0 = wigner.gaussian(self.grid, cand.center[0], cand.center[1], math.sqrt(cand.var_x))
        steps = max(1, int(round(horizon / self.dt)))
        g1 = wigner.evolve(g0, self.mode, self.D, horizon / steps, steps)
        pur = wigner.linear_entropy(g1)[0]
        return pur, -math.log2(max(pur, 1e-300))


def _label(c, i) -> str:
    if hasattr(c, "label"):
        return c.label
    if isinstance(c, (list, tuple, np.ndarray)):
        return "(" + ", ".join(f"{complex(z):.3g}" for z in c) + ")"
    return f"#{i}"


def run_sieve(candidates: Sequence, dynamics, horizon: float | None = None,
              score: str = "purity") -> list[SieveResult]:
    """
    Rank candidates by predictability.

    Parameters
    ----------
    candidates : sequence
        ``GaussianCandidate`` objects (Gaussian and Wigner dynamics) or
        qubit amplitude pairs (spin-bath dynamics).
    dynamics : QbmGaussianDynamics, SpinBathDynamics or WignerDynamics
    horizon : float, optional
        Defaults to one oscillator period (or the dynamics' own choice).
    score : {"purity", "entropy"}

    Returns
    -------
    list of SieveResult
        Best first. Failed candidates are appended last with a reason.
    """
    if score not in ("purity", "entropy"):
        raise ValueError("score must be 'purity' or 'entropy'")
    if horizon is None:
        horizon = dynamics.default_horizon()
    ok, bad = [], []
    for i, c in enumerate(candidates):
        try:
            pur, ent = dynamics.evaluate(c, horizon)
        except Exception as exc:  # a failed candidate must not sink the sieve
            bad.append(SieveResult(c, _label(c, i), math.nan, math.nan, math.nan, horizon, i,
                                   disqualified=f"{type(exc).__name__}: {exc}"))
            continue
        s = pur if score == "purity" else ent
        ok.append(SieveResult(c, _label(c, i), float(s), float(pur), float(ent), horizon, i))
    sign = -1.0 if score == "purity" else 1.0
    ok.sort(key=lambda r: (sign * r.score, r.index))
    # scores within the tie tolerance of a group's leader keep candidate order
    grouped, i = [], 0
    while i < len(ok):
        j = i + 1
        while j < len(ok) and abs(ok[j].score - ok[i].score) <= TIE_TOL:
            j += 1
        grouped.extend(sorted(ok[i:j], key=lambda r: r.index))
        i = j
    ok = grouped
    if ok:
        best = ok[0].score
        ok = [SieveResult(**{**r.__dict__, "tied": abs(r.score - best) <= TIE_TOL}) for r in ok]
    return ok + bad


def winners(results: Sequence[SieveResult]) -> list[SieveResult]:
    """All candidates tied with the best score."""
    return [r for r in results if r.tied]


SIEVE_COLUMNS = ("candidate_id", "squeeze_or_label", "score_purity", "score_entropy", "horizon")


def sieve_rows(results: Sequence[SieveResult]) -> list[dict]:
    return [{"candidate_id": r.index, "squeeze_or_label": r.label, "score_purity": r.purity,
             "score_entropy": r.entropy, "horizon": r.horizon} for r in results]


def squeeze_grid(k: int = 4) -> list[float]:
    """s = 2^-k ... 2^k."""
    return [2.0 ** j for j in range(-k, k + 1)]
