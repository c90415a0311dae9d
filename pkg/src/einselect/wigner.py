"""
Phase-space dynamics on a Wigner grid.

Moyal evolution uses the two-point phase: in the mixed representation
(x, theta), with theta conjugate to p, a potential step multiplies by

    exp(-i [V(x + hbar theta/2) - V(x - hbar theta/2)] dt / hbar),

which is exact to all orders in hbar. Liouville evolution replaces the
bracket by the classical shear exp(-i V'(x) theta dt). Momentum diffusion
D d^2W/dp^2 is the multiplier exp(-D theta^2 dt). The kinetic step is an
exact shear in x applied in Fourier space.

Grid layout: ``W[i, j]`` sits at ``(x[i], p[j])``; both axes are periodic.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .qbm import PositionGridState

NORM_DRIFT = 1e-5


@dataclass(frozen=True)
class Potential:
    """
    Potential energy V(x, t) from a small family of descriptors.

    kinds
    -----
    harmonic : M Omega^2 x^2 / 2
        params ``M``, ``Omega``.
    driven_pendulum : -kappa cos(x - l sin(w t)) + a x^2 / 2
        params ``kappa``, ``l``, ``a``, optional ``w`` (default 1).
    driven_double_well : A x^4 - B x^2 + C x cos(f t)
        params ``A``, ``B``, ``C``, ``f``.
    custom : sum_n c_n x^n + sum_j a_j cos(k_j x + w_j t + phi_j) + x sum_m b_m cos(f_m t)
        params ``poly`` (list c_0, c_1, ...), ``cos`` (list of [a, k, w, phi]),
        ``drive`` (list of [b, f]).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        need = {
            "harmonic": ("M", "Omega"),
            "driven_pendulum": ("kappa", "l", "a"),
            "driven_double_well": ("A", "B", "C", "f"),
            "custom": (),
        }
        if self.kind not in need:
            raise ConfigError(f"unknown potential kind {self.kind!r}")
        missing = [k for k in need[self.kind] if k not in self.params]
        if missing:
            raise ConfigError(f"potential {self.kind} missing {missing}")

    def _terms(self):
        """Normalize to (poly coefficients, cos terms, drive terms)."""
        p = self.params
        if self.kind == "harmonic":
            return [0.0, 0.0, 0.5 * p["M"] * p["Omega"] ** 2], [], []
        if self.kind == "driven_pendulum":
            return [0.0, 0.0, 0.5 * p["a"]], [("pend", p["kappa"], p["l"], p.get("w", 1.0))], []
        if self.kind == "driven_double_well":
            return [0.0, 0.0, -p["B"], 0.0, p["A"]], [], [(p["C"], p["f"])]
        cos = [("cos",) + tuple(c) for c in p.get("cos", [])]
        return list(p.get("poly", [])), cos, [tuple(d) for d in p.get("drive", [])]

    def derivative(self, x, t: float = 0.0, order: int = 0):
        """d^order V / dx^order at (x, t)."""
        x = np.asarray(x, dtype=float)
        poly, cos, drive = self._terms()
        c = np.polynomial.polynomial.polyder(np.asarray(poly, dtype=float), order) if poly else np.zeros(1)
        out = np.polynomial.polynomial.polyval(x, c) if c.size else np.zeros_like(x)
        out = out + np.zeros_like(x)
        for term in cos:
            if term[0] == "pend":
                _, kappa, l, w = term
                arg = x - l * math.sin(w * t)
                amp, k = -kappa, 1.0
            else:
                _, amp, k, w, phi = term
                arg = k * x + w * t + phi
            # d^n cos(arg)/dx^n = k^n cos(arg + n pi/2)
            out = out + amp * k ** order * np.cos(arg + order * np.pi / 2)
        for b, f in drive:
            if order == 0:
                out = out + b * x * math.cos(f * t)
            elif order == 1:
                out = out + b * math.cos(f * t)
        return out

    def __call__(self, x, t: float = 0.0):
        return self.derivative(x, t, 0)

    @property
    def is_quadratic(self) -> bool:
        poly, cos, _ = self._terms()
        return not cos and all(c == 0 for c in poly[3:])

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj: dict) -> "Potential":
        return cls(obj["kind"], dict(obj.get("params", {})))


@dataclass(frozen=True)
class WignerGrid:
    """
    Real Wigner function on a periodic phase-space box.

    Parameters
    ----------
    W : ndarray, shape (n_x, n_p)
    x_min, x_max, p_min, p_max : float
        Box edges; x = x_min + i dx, p = p_min + j dp.
    hbar : float
    potential : Potential, optional
    mass : float
    t : float
    """

    W: np.ndarray
    x_min: float
    x_max: float
    p_min: float
    p_max: float
    hbar: float
    potential: Potential | None = None
    mass: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        nx, npp = self.W.shape
        for n in (nx, npp):
            if n & (n - 1):
                raise ConfigError("grid sizes must be powers of two")

    @property
    def n_x(self) -> int:
        return self.W.shape[0]

    @property
    def n_p(self) -> int:
        return self.W.shape[1]

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_x

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.n_p

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_x)

    @property
    def p(self) -> np.ndarray:
        return self.p_min + self.dp * np.arange(self.n_p)

    @property
    def is_dual(self) -> bool:
        """True when dp = 2 pi hbar / (n_x dx)."""
        return abs(self.dp - 2 * np.pi * self.hbar / (self.n_x * self.dx)) <= 1e-12 * self.dp

    def norm(self) -> float:
        return float(np.sum(self.W) * self.dx * self.dp)

    def with_W(self, W, t=None) -> "WignerGrid":
        return replace(self, W=W, t=self.t if t is None else t)

    def header(self) -> dict:
        return {"nx": self.n_x, "np": self.n_p, "dx": self.dx, "dp": self.dp,
                "x_min": self.x_min, "p_min": self.p_min, "hbar": self.hbar, "t": self.t}


def make_grid(n_x: int, x_range: tuple[float, float], hbar: float, n_p: int | None = None,
              p_range: tuple[float, float] | None = None, potential: Potential | None = None,
              mass: float = 1.0) -> WignerGrid:
    """
    Empty grid. Without ``p_range`` the momentum axis is the transform dual
    of the position axis, dp = 2 pi hbar / (n_x dx), centered on p = 0.
    """
    n_p = n_p or n_x
    x_min, x_max = map(float, x_range)
    if p_range is None:
        dx = (x_max - x_min) / n_x
        dp = 2 * np.pi * hbar / (n_x * dx)
        p_min, p_max = -dp * n_p / 2, dp * n_p / 2
    else:
        p_min, p_max = map(float, p_range)
    return WignerGrid(np.zeros((n_x, n_p)), x_min, x_max, p_min, p_max, float(hbar), potential, mass)


def gaussian(grid: WignerGrid, x0: float, p0: float, sigma_x: float) -> WignerGrid:
    """Minimum-uncertainty Gaussian with position spread sigma_x."""
    sx = sigma_x
    sp = grid.hbar / (2 * sx)
    X, P = np.meshgrid(grid.x, grid.p, indexing="ij")
    W = np.exp(-((X - x0) ** 2) / (2 * sx ** 2) - (P - p0) ** 2 / (2 * sp ** 2)) / (np.pi * grid.hbar)
    return grid.with_W(W)


def build_cat(grid: WignerGrid, x0: float, xi: float, kind: str = "position",
              check: bool = True) -> WignerGrid:
    """
    Wigner function of an equal superposition of two Gaussian packets.

    For ``kind="position"`` the packets sit at x = +-x0 with
    |psi|^2 ~ exp(-(x -+ x0)^2 / xi^2); the interference term is
    2 (pi hbar)^-1 exp(-x^2/xi^2 - p^2 xi^2/hbar^2) cos(2 x0 p / hbar).
    ``kind="momentum"`` exchanges the roles of x and p (packets at
    p = +-x0 with momentum width hbar/xi).

    Raises
    ------
    ConfigError
        If the peaks or fringes are not resolved (dx < xi/4 and
        dp < hbar/(8 x0) for position cats).
    """
    hb = grid.hbar
    X, P = np.meshgrid(grid.x, grid.p, indexing="ij")
    if kind == "position":
        if check and (grid.dx >= xi / 4 or (x0 > 0 and grid.dp >= hb / (8 * x0))):
            raise ConfigError("cat peaks or fringes not resolved on this grid")
        g = lambda c: np.exp(-((X - c) ** 2) / xi ** 2 - P ** 2 * xi ** 2 / hb ** 2) / (np.pi * hb)
        inter = 2 * np.exp(-X ** 2 / xi ** 2 - P ** 2 * xi ** 2 / hb ** 2) * np.cos(2 * x0 * P / hb) / (np.pi * hb)
        norm = 2 * (1 + np.exp(-x0 ** 2 / xi ** 2))
    elif kind == "momentum":
        wp = hb / xi
        if check and (grid.dp >= wp / 4 or (x0 > 0 and grid.dx >= hb / (8 * x0))):
            raise ConfigError("cat peaks or fringes not resolved on this grid")
        g = lambda c: np.exp(-((P - c) ** 2) / wp ** 2 - X ** 2 * wp ** 2 / hb ** 2) / (np.pi * hb)
        inter = 2 * np.exp(-P ** 2 / wp ** 2 - X ** 2 * wp ** 2 / hb ** 2) * np.cos(2 * x0 * X / hb) / (np.pi * hb)
        norm = 2 * (1 + np.exp(-x0 ** 2 / wp ** 2))
    else:
        raise ValueError("kind must be 'position' or 'momentum'")
    return grid.with_W((g(x0) + g(-x0) + inter) / norm)


def _upsample2(a: np.ndarray, axis: int) -> np.ndarray:
    """Band-limited 2x interpolation along ``axis`` (new samples at half steps)."""
    n = a.shape[axis]
    F = np.fft.fft(a, axis=axis)
    F = np.moveaxis(F, axis, 0)
    G = np.zeros((2 * n,) + F.shape[1:], dtype=complex)
    h = n // 2
    G[:h] = F[:h]
    G[-h:] = F[-h:]
    if n % 2 == 0:
        # split the Nyquist bin between +/- frequencies
        G[h] = 0.5 * F[h]
        G[-h] = 0.5 * F[h]
    else:
        G[h] = F[h]
    out = np.fft.ifft(G, axis=0) * 2
    return np.moveaxis(out, 0, axis)


def wigner_transform(state: PositionGridState, hbar: float = 1.0, n_p: int | None = None,
                     p_range: tuple[float, float] | None = None) -> WignerGrid:
    """
    W(x, p) = (2 pi hbar)^-1 int dy exp(-i p y / hbar) rho(x + y/2, x - y/2).

    The off-diagonal samples rho(x + y/2, x - y/2) are taken at y = m dx,
    using band-limited interpolation of rho onto the half-step grid, so
    the transform does not alias on the dual momentum grid. The sum is
    evaluated directly at the requested momenta.

    Parameters
    ----------
    state : PositionGridState
    hbar : float
    n_p : int, optional
    p_range : (float, float), optional

    Returns
    -------
    WignerGrid
    """
    rho = np.asarray(state.rho, dtype=complex)
    n, dx = state.n_points, state.dx
    # midpoint samples rho(x + m dx/2, x - m dx/2) from a 2x Fourier-interpolated
    # matrix, so y = m dx and the kernel period in p equals the dual-grid span
    fine = _upsample2(_upsample2(rho, 0), 1)
    i = np.arange(n)
    m = np.arange(-n, n)
    ip, im = 2 * i[:, None] + m[None, :], 2 * i[:, None] - m[None, :]
    ok = (ip >= 0) & (ip < 2 * n) & (im >= 0) & (im < 2 * n)
    c = np.where(ok, fine[np.clip(ip, 0, 2 * n - 1), np.clip(im, 0, 2 * n - 1)], 0.0)
    y = m * dx
    n_p = n_p or n
    grid = make_grid(n, (state.x_min, state.x_max), hbar, n_p=n_p, p_range=p_range)
    p = grid.p
    if p_range is None and n_p == n:
        # p_k = k 2 pi hbar / (n dx): the phase has period n in m
        folded = c[:, :n] + c[:, n:]
        ms = m[:n]
        ph = np.exp(-1j * np.outer(ms * dx, p) / hbar)
        W = (folded @ ph) * dx / (2 * np.pi * hbar)
    else:
        ph = np.exp(-1j * np.outer(y, p) / hbar)
        W = (c @ ph) * dx / (2 * np.pi * hbar)
    imag = np.max(np.abs(W.imag))
    if imag > 1e-8 * max(np.max(np.abs(W.real)), 1e-300):
        warnings.warn(f"Wigner transform has imaginary residue {imag:.2e}", RuntimeWarning, stacklevel=2)
    return grid.with_W(W.real)


def wavefunction_wigner(psi, x_range, hbar: float, n_p: int | None = None,
                        p_range: tuple[float, float] | None = None) -> WignerGrid:
    """Wigner function of a wave function sampled on a periodic grid."""
    psi = np.asarray(psi, dtype=complex)
    return wigner_transform(PositionGridState.from_wavefunction(psi, *x_range), hbar, n_p, p_range)


class _Stepper:
    """Precomputed transforms for repeated split steps."""

    def __init__(self, grid: WignerGrid, mode: str, D: float, dt: float):
        if mode not in ("moyal", "liouville"):
            raise ValueError("mode must be 'moyal' or 'liouville'")
        self.g = grid
        self.mode, self.D, self.dt = mode, float(D), float(dt)
        self.k = 2 * np.pi * np.fft.fftfreq(grid.n_x, d=grid.dx)
        self.theta = 2 * np.pi * np.fft.fftfreq(grid.n_p, d=grid.dp)
        self.kin_half = np.exp(-1j * np.outer(self.k, grid.p) * dt / (2 * grid.mass))
        self.diff = np.exp(-self.D * self.theta ** 2 * dt)[None, :]
        self.static = None
        pot = grid.potential
        if pot is not None and not _time_dependent(pot):
            self.static = self._potential_factor(0.0)

    def _potential_factor(self, t: float) -> np.ndarray:
        g, pot = self.g, self.g.potential
        x = g.x[:, None]
        if pot is None:
            return np.ones((g.n_x, g.n_p)) * self.diff
        if self.mode == "moyal":
            y = g.hbar * self.theta[None, :]
            dV = pot(x + y / 2, t) - pot(x - y / 2, t)
            phase = -dV * self.dt / g.hbar
        else:
            phase = -pot.derivative(x, t, 1) * self.theta[None, :] * self.dt
        return np.exp(1j * phase) * self.diff

    def kinetic_half(self, W):
        return np.fft.ifft(self.kin_half * np.fft.fft(W, axis=0), axis=0).real

    def potential(self, W, t_mid):
        fac = self.static if self.static is not None else self._potential_factor(t_mid)
        return np.fft.fft(fac * np.fft.ifft(W, axis=1), axis=1).real

    def step(self, W, t):
        W = self.kinetic_half(W)
        W = self.potential(W, t + 0.5 * self.dt)
        return self.kinetic_half(W)


def _time_dependent(pot: Potential) -> bool:
    if pot.kind == "harmonic":
        return False
    if pot.kind == "driven_pendulum":
        return pot.params.get("l", 0) != 0
    if pot.kind == "driven_double_well":
        return pot.params.get("C", 0) != 0
    return bool(pot.params.get("drive")) or any(c[2] != 0 for c in pot.params.get("cos", []))


def max_phase_advance(grid: WignerGrid, dt: float, t: float = 0.0) -> float:
    """Largest local phase-space rotation angle per step, dt sqrt(|V''| / m)."""
    if grid.potential is None:
        return 0.0
    curv = np.max(np.abs(grid.potential.derivative(grid.x, t, 2)))
    return dt * math.sqrt(curv / grid.mass)


def evolve(grid: WignerGrid, mode: str = "moyal", D: float = 0.0, dt: float = 0.01, steps: int = 1,
           callback: Callable | None = None, every: int = 1) -> WignerGrid:
    """
    Propagate W by Strang splitting.

    Parameters
    ----------
    grid : WignerGrid
    mode : {"moyal", "liouville"}
    D : float
        Momentum diffusion constant.
    dt : float
    steps : int
    callback : callable, optional
        ``callback(grid)`` every ``every`` steps (and at step 0).
    every : int

    Returns
    -------
    WignerGrid

    Raises
    ------
    NumericalError
        When the normalization drifts by more than 1e-5.
    """
    if D < 0:
        raise ValueError("D must be non-negative")
    adv = max_phase_advance(grid, dt, grid.t)
    if adv >= np.pi / 4:
        raise ConfigError(f"time step too large: phase advance {adv:.3f} >= pi/4")
    st = _Stepper(grid, mode, D, dt)
    W = np.array(grid.W, dtype=float)
    n0 = grid.norm()
    t = grid.t
    cell = grid.dx * grid.dp
    if callback is not None:
        callback(grid)
    for s in range(steps):
        W = st.step(W, t)
        t = grid.t + (s + 1) * dt
        if (s + 1) % every == 0 or s + 1 == steps:
            nrm = np.sum(W) * cell
            if not np.isfinite(nrm) or abs(nrm - n0) > NORM_DRIFT:
                raise NumericalError(f"normalization drifted to {nrm!r} at t={t:.4g}")
            if callback is not None and (s + 1) % every == 0:
                callback(grid.with_W(W, t))
    return grid.with_W(W, t)


# ---------------------------------------------------------------------------
# observables


def linear_entropy(grid: WignerGrid) -> tuple[float, float]:
    """Purity 2 pi hbar int W^2 and linear entropy 1 - purity."""
    pur = float(2 * np.pi * grid.hbar * np.sum(grid.W ** 2) * grid.dx * grid.dp)
    return pur, 1.0 - pur


def moments(grid: WignerGrid) -> dict:
    W, x, p = grid.W, grid.x, grid.p
    cell = grid.dx * grid.dp
    n = np.sum(W) * cell
    mx = np.sum(W.sum(axis=1) * x) * cell / n
    mp = np.sum(W.sum(axis=0) * p) * cell / n
    vx = np.sum(W.sum(axis=1) * (x - mx) ** 2) * cell / n
    vp = np.sum(W.sum(axis=0) * (p - mp) ** 2) * cell / n
    return {"mean_x": float(mx), "mean_p": float(mp), "var_x": float(vx), "var_p": float(vp)}


def fringe_amplitude(grid: WignerGrid, separation: float) -> float:
    """
    Interference amplitude of a cat with the given separation.

    The p-Fourier component of W at y = separation is the coherence
    integral int rho(x + y/2, x - y/2) dx; its maximum over the conjugate
    of x follows the fringes as the flow rotates them.
    """
    ph = np.exp(1j * grid.p * separation / grid.hbar)
    return float(np.max(np.abs(np.fft.fft(grid.W @ ph))) * grid.dx * grid.dp)


def _p_derivative(grid: WignerGrid, order: int) -> np.ndarray:
    theta = 2 * np.pi * np.fft.fftfreq(grid.n_p, d=grid.dp)
    return np.fft.ifft((1j * theta) ** order * np.fft.fft(grid.W, axis=1), axis=1).real


def correction_diagnostic(grid: WignerGrid) -> float:
    """
    Size of the leading quantum correction relative to the classical force.

    Ratio of sum |(hbar^2/24) V_xxx W_ppp| to sum |V_x W_p| over the cells
    where |W| exceeds 1% of its maximum.
    """
    pot = grid.potential
    if pot is None:
        return 0.0
    x = grid.x[:, None]
    v1 = pot.derivative(x, grid.t, 1)
    v3 = pot.derivative(x, grid.t, 3)
    if np.all(v3 == 0):
        return 0.0
    mask = np.abs(grid.W) > 0.01 * np.max(np.abs(grid.W))
    corr = np.abs(grid.hbar ** 2 / 24 * v3 * _p_derivative(grid, 3))[mask].sum()
    force = np.abs(v1 * _p_derivative(grid, 1))[mask].sum()
    return float(corr / force) if force > 0 else math.inf


def observables(grid: WignerGrid, with_correction: bool = True) -> dict:
    """One row of the trace table."""
    row = {"t": grid.t}
    row.update(moments(grid))
    row["purity"] = linear_entropy(grid)[0]
    row["min_W"] = float(np.min(grid.W))
    row["correction_ratio"] = correction_diagnostic(grid) if with_correction else float("nan")
    return row


TRACE_COLUMNS = ("t", "mean_x", "mean_p", "var_x", "var_p", "purity", "min_W", "correction_ratio")


def feature_scales(grid: WignerGrid, quantile: float = 0.99) -> tuple[float, float]:
    """
    Smallest structure sizes (dx_struct, dp_struct).

    The spectral power of W is accumulated along each frequency axis; the
    frequency radius holding ``quantile`` of the power sets the scale as
    1 / radius.
    """
    P = np.abs(np.fft.fft2(grid.W - grid.W.mean())) ** 2
    k = np.abs(2 * np.pi * np.fft.fftfreq(grid.n_x, d=grid.dx))
    th = np.abs(2 * np.pi * np.fft.fftfreq(grid.n_p, d=grid.dp))

    def radius(freq, power):
        order = np.argsort(freq)
        c = np.cumsum(power[order])
        return freq[order][np.searchsorted(c, quantile * c[-1])]

    kx = radius(k, P.sum(axis=1))
    kp = radius(th, P.sum(axis=0))
    return float(1.0 / max(kx, 1e-300)), float(1.0 / max(kp, 1e-300))


def entropy_production_rate(t, purity, window: tuple[float, float]) -> float:
    """
    Least-squares slope of -ln(purity) over a time window.

    Warns when the purity is not monotone inside the window.
    """
    t = np.asarray(t, dtype=float)
    pur = np.asarray(purity, dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < 2:
        raise ValueError("window holds fewer than two samples")
    if window[0] < t.min() or window[1] > t.max():
        raise ValueError("window extends beyond the series")
    if np.any(np.diff(pur[sel]) > 0):
        warnings.warn("purity is not monotone in the window", RuntimeWarning, stacklevel=2)
    slope = np.polyfit(t[sel], -np.log(pur[sel]), 1)[0]
    return float(slope)


class ScaleReport(NamedTuple):
    t_hbar: float
    t_r: float
    sub_planck_a: float
    ell_c: float
    sigma_c: float


def scale_report(Lambda: float, Delta_p0: float, chi: float, I_action: float, gamma: float,
                 lambda_T: float, hbar: float) -> ScaleReport:
    """
    Characteristic scales of a chaotic system.

    t_hbar = ln(Delta_p0 chi / hbar) / Lambda, t_r = ln(I / hbar) / Lambda,
    a = hbar^2 / I, ell_c = lambda_T sqrt(Lambda / 2 gamma), sigma_c = hbar / ell_c.
    """
    for name, v in (("Lambda", Lambda), ("Delta_p0", Delta_p0), ("chi", chi), ("I_action", I_action),
                    ("gamma", gamma), ("lambda_T", lambda_T), ("hbar", hbar)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    ell_c = lambda_T * math.sqrt(Lambda / (2 * gamma))
    return ScaleReport(
        t_hbar=math.log(Delta_p0 * chi / hbar) / Lambda,
        t_r=math.log(I_action / hbar) / Lambda,
        sub_planck_a=hbar ** 2 / I_action,
        ell_c=ell_c,
        sigma_c=hbar / ell_c,
    )


def coherence_length(D: float, Lambda: float, hbar: float) -> tuple[float, float]:
    """(ell_c, sigma_c) from a momentum diffusion constant: sigma_c = sqrt(2 D / Lambda)."""
    sigma_c = math.sqrt(2 * D / Lambda)
    return hbar / sigma_c, sigma_c


# ---------------------------------------------------------------------------
# pure-state route


def schrodinger_evolve(psi, x, potential: Potential | None, hbar: float, dt: float, steps: int,
                       mass: float = 1.0, t0: float = 0.0, callback: Callable | None = None,
                       every: int = 1):
    """
    Split-operator propagation of a wave function on a periodic grid.

    Used as the independent pure-state route for diffusion-free runs.

    Returns
    -------
    ndarray
        Final wave function.
    """
    psi = np.asarray(psi, dtype=complex).copy()
    x = np.asarray(x, dtype=float)
    dx = x[1] - x[0]
    k = 2 * np.pi * np.fft.fftfreq(x.size, d=dx)
    kin = np.exp(-1j * hbar * k ** 2 * dt / (2 * mass))
    static = potential is None or not _time_dependent(potential)
    if static:
        v = potential(x) if potential is not None else np.zeros_like(x)
        half = np.exp(-1j * v * dt / (2 * hbar))
    t = t0
    if callback is not None:
        callback(t, psi)
    for s in range(steps):
        if not static:
            half = np.exp(-1j * potential(x, t) * dt / (2 * hbar))
        psi *= half
        psi = np.fft.ifft(kin * np.fft.fft(psi))
        if not static:
            half = np.exp(-1j * potential(x, t + dt) * dt / (2 * hbar))
        psi *= half
        t = t0 + (s + 1) * dt
        if callback is not None and (s + 1) % every == 0:
            callback(t, psi)
    return psi


def default_window(Lambda: float, Delta_p0: float, chi: float, hbar: float) -> tuple[float, float]:
    """
    Entropy-production fitting window [2 t_hbar, 2 t_hbar + 3 / Lambda].

    Starts once the packet has spread past the Ehrenfest time and spans
    three Lyapunov times.
    """
    t_h = math.log(Delta_p0 * chi / hbar) / Lambda
    return 2 * t_h, 2 * t_h + 3 / Lambda


def write_snapshot(grid: WignerGrid, stem) -> tuple[str, str]:
    """Row-major little-endian float64 dump ``stem.bin`` plus JSON header ``stem.json``."""
    stem = Path(stem)
    data, head = stem.parent / (stem.name + ".bin"), stem.parent / (stem.name + ".json")
    np.ascontiguousarray(grid.W, dtype="<f8").tofile(data)
    head.write_text(json.dumps(grid.header(), indent=2, sort_keys=True))
    return str(data), str(head)


def read_snapshot(stem) -> WignerGrid:
    stem = Path(stem)
    h = json.loads((stem.parent / (stem.name + ".json")).read_text())
    W = np.fromfile(stem.parent / (stem.name + ".bin"), dtype="<f8").reshape(h["nx"], h["np"])
    return WignerGrid(W, h["x_min"], h["x_min"] + h["nx"] * h["dx"], h["p_min"], h["p_min"] + h["np"] * h["dp"],
                      h["hbar"], t=h["t"])
