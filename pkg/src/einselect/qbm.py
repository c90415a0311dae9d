"""
Quantum Brownian motion of an oscillator in an Ohmic bath with a Lorentz-Drude cutoff.

Spectral density, noise and dissipation kernels, the time-dependent
coefficients of the perturbative master equation, position-space
evolution under the high-temperature master equation, and decoherence
timescales.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from .errors import ConfigError, NumericalError

# CGS constants for macroscopic estimates
HBAR_CGS = 1.054571817e-27  # erg s
KB_CGS = 1.380649e-16  # erg / K

CUTOFF_FACTOR = 50.0
QUAD_RTOL = 1e-8


@dataclass(frozen=True)
class QbmParams:
    """
    Bath and oscillator parameters in one consistent unit system.

    Parameters
    ----------
    gamma0 : float
        Relaxation scale.
    Gamma : float
        High-frequency cutoff of the bath.
    T : float
        Temperature.
    M, Omega, hbar, kB : float
        Mass, oscillator frequency (0 for a free particle) and constants.
    """

    gamma0: float
    Gamma: float
    T: float
    M: float = 1.0
    Omega: float = 1.0
    hbar: float = 1.0
    kB: float = 1.0

    def __post_init__(self):
        for name in ("gamma0", "Gamma", "M", "hbar", "kB"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.T < 0 or self.Omega < 0:
            raise ConfigError("T and Omega must be non-negative")

    @property
    def beta(self) -> float:
        return math.inf if self.T == 0 else 1.0 / (self.kB * self.T)

    @property
    def high_temperature(self) -> bool:
        """kB T exceeds ten times every other energy scale (recorded, not enforced)."""
        return self.kB * self.T > 10 * self.hbar * max(self.Omega, self.Gamma)

    @property
    def gamma_inf(self) -> float:
        G, W = self.Gamma, self.Omega
        return self.gamma0 * G ** 2 / (G ** 2 + W ** 2)

    @property
    def D_inf(self) -> float:
        """Long-time normal diffusion coefficient."""
        G, W = self.Gamma, self.Omega
        if W == 0:
            c = 2.0 * self.kB * self.T / self.hbar
        else:
            c = W / math.tanh(self.hbar * W * self.beta / 2) if self.T > 0 else W
        return self.M * self.gamma0 * c / self.hbar * G ** 2 / (G ** 2 + W ** 2)

    @property
    def diffusion_x(self) -> float:
        """2 M gamma kB T / hbar^2, the high-temperature decoherence coefficient."""
        return 2.0 * self.M * self.gamma0 * self.kB * self.T / self.hbar ** 2

    @property
    def thermal_wavelength(self) -> float:
        if self.T <= 0:
            raise ConfigError("thermal wavelength undefined at T = 0")
        return self.hbar / math.sqrt(2.0 * self.M * self.kB * self.T)


class CoefficientTrace(NamedTuple):
    t: np.ndarray
    Omega_ren_sq: np.ndarray
    gamma: np.ndarray
    D: np.ndarray
    f: np.ndarray


def spectral_density(params: QbmParams, omega):
    """C(w) = 2 M gamma0 (w / pi) Gamma^2 / (Gamma^2 + w^2)."""
    w = np.asarray(omega, dtype=float)
    G = params.Gamma
    out = 2.0 * params.M * params.gamma0 * (w / np.pi) * G ** 2 / (G ** 2 + w ** 2)
    return float(out) if out.ndim == 0 else out


def _coth_weighted(params: QbmParams, w):
    """C(w) coth(hbar w / 2 kB T), finite at w = 0."""
    w = np.asarray(w, dtype=float)
    C = spectral_density(params, w)
    if params.T == 0:
        return C
    x = params.hbar * w * params.beta / 2
    G = params.Gamma
    small = 2.0 * params.M * params.gamma0 / np.pi * G ** 2 / (G ** 2 + w ** 2) / (params.hbar * params.beta / 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > 1e-8, C / np.tanh(np.where(x > 1e-8, x, 1.0)), small)
    return out


def _quad(f, a, b, **kw):
    val, err = integrate.quad(f, a, b, epsrel=QUAD_RTOL, epsabs=0.0, limit=2000, **kw)
    return val, err


def kernels(params: QbmParams, s):
    """
    Noise and dissipation kernels.

    nu(s) = int C(w) coth(hbar w / 2 kB T) cos(w s) dw
    eta(s) = int C(w) sin(w s) dw

    For s > 0 the Fourier integrals run to infinity. At s = 0 the noise
    kernel diverges logarithmically and is regularized at 50 Gamma.

    Parameters
    ----------
    params : QbmParams
    s : float or array_like

    Returns
    -------
    (nu, eta)
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr < 0):
        raise ValueError("kernels need s >= 0")
    nu = np.empty_like(s_arr)
    eta = np.empty_like(s_arr)
    Wc = CUTOFF_FACTOR * params.Gamma
    fnu = lambda w: float(_coth_weighted(params, w))
    feta = lambda w: float(spectral_density(params, w))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for i, si in enumerate(s_arr):
            try:
                if si == 0:
                    nu[i], _ = _quad(fnu, 0.0, Wc)
                    eta[i] = 0.0
                else:
                    nu[i] = integrate.quad(fnu, 0.0, np.inf, weight="cos", wvar=si, limlst=200)[0]
                    eta[i] = integrate.quad(feta, 0.0, np.inf, weight="sin", wvar=si, limlst=200)[0]
            except integrate.IntegrationWarning as exc:
                raise NumericalError(f"kernel quadrature did not converge at s={si}: {exc}") from exc
    if np.ndim(s) == 0:
        return float(nu[0]), float(eta[0])
    return nu, eta


def eta_closed_form(params: QbmParams, s):
    """M gamma0 Gamma^2 exp(-Gamma s) for s > 0."""
    return params.M * params.gamma0 * params.Gamma ** 2 * np.exp(-params.Gamma * np.asarray(s, dtype=float))


def _sinc_t(u, t):
    """sin(u t) / u with the u -> 0 limit."""
    return t * np.sinc(u * t / np.pi)


def _cosc_t(u, t):
    """(1 - cos(u t)) / u with the u -> 0 limit."""
    ut = u * t
    return np.where(np.abs(ut) > 1e-6, (1 - np.cos(ut)) / np.where(u == 0, 1, u), 0.5 * u * t * t)


def _time_kernels(W: float, t: float):
    """
    Time integrals of products of trigonometric factors, as functions of w.

    Each entry maps w to int_0^t trig(W s) trig(w s) ds and comes with its
    split A(w) sin(w t) + B(w) cos(w t) + E(w) valid for large w.
    """
    if W > 0:
        cW, sW = math.cos(W * t), math.sin(W * t)
        return {
            "cc": (lambda w: 0.5 * (_sinc_t(w - W, t) + _sinc_t(w + W, t)),
                   lambda w: 0.5 * cW * (1 / (w - W) + 1 / (w + W)),
                   lambda w: 0.5 * sW * (-1 / (w - W) + 1 / (w + W)),
                   lambda w: 0.0 * w),
            "ss": (lambda w: 0.5 * (_sinc_t(w - W, t) - _sinc_t(w + W, t)),
                   lambda w: 0.5 * cW * (1 / (w - W) - 1 / (w + W)),
                   lambda w: 0.5 * sW * (-1 / (w - W) - 1 / (w + W)),
                   lambda w: 0.0 * w),
            # int cos(W s) sin(w s) ds
            "cs": (lambda w: 0.5 * (_cosc_t(w + W, t) + _cosc_t(w - W, t)),
                   lambda w: 0.5 * sW * (1 / (w + W) - 1 / (w - W)),
                   lambda w: -0.5 * cW * (1 / (w + W) + 1 / (w - W)),
                   lambda w: 0.5 * (1 / (w + W) + 1 / (w - W))),
            # int sin(W s) cos(w s) ds
            "sc": (lambda w: 0.5 * (_cosc_t(W + w, t) + _cosc_t(W - w, t)),
                   lambda w: 0.5 * sW * (1 / (W + w) - 1 / (W - w)),
                   lambda w: -0.5 * cW * (1 / (W + w) + 1 / (W - w)),
                   lambda w: 0.5 * (1 / (W + w) + 1 / (W - w))),
        }
    # Omega -> 0: sin(W s)/W -> s
    return {
        "cc": (lambda w: _sinc_t(w, t),
               lambda w: 1 / w, lambda w: 0.0 * w, lambda w: 0.0 * w),
        "ss": (lambda w: np.where(np.abs(w * t) > 1e-4,
                                  (np.sin(w * t) - w * t * np.cos(w * t)) / np.where(w == 0, 1, w) ** 2,
                                  w * t ** 3 / 3),
               lambda w: 1 / w ** 2, lambda w: -t / w, lambda w: 0.0 * w),
        "cs": (lambda w: _cosc_t(w, t),
               lambda w: 0.0 * w, lambda w: -1 / w, lambda w: 1 / w),
        "sc": (lambda w: np.where(np.abs(w * t) > 1e-4,
                                  (np.cos(w * t) - 1 + w * t * np.sin(w * t)) / np.where(w == 0, 1, w) ** 2,
                                  t ** 2 / 2 - w ** 2 * t ** 4 / 8),
               lambda w: t / w, lambda w: 1 / w ** 2, lambda w: -1 / w ** 2),
    }


def _omega_integral(F: Callable, kern, t: float, W: float, Wc: float) -> float:
    """int_0^inf F(w) K(w, t) dw, split at the cutoff Wc."""
    full, A, B, E = kern
    pts = [p for p in (W,) if 0 < p < Wc]
    body = _quad(lambda w: F(w) * full(w), 0.0, Wc, points=pts or None)[0]
    tail = 0.0
    if t > 0:
        tail += integrate.quad(lambda w: F(w) * A(w), Wc, np.inf, weight="sin", wvar=t, limlst=200)[0]
        tail += integrate.quad(lambda w: F(w) * B(w), Wc, np.inf, weight="cos", wvar=t, limlst=200)[0]
    tail += integrate.quad(lambda w: F(w) * E(w), Wc, np.inf, epsrel=QUAD_RTOL, limit=500)[0]
    return body + tail


def coefficients_perturbative(params: QbmParams, t_grid) -> CoefficientTrace:
    """
    Time-dependent coefficients of the perturbative master equation.

    Omega_ren^2(t) = -(2/M) int_0^t cos(W s) eta(s) ds
    gamma(t)       =  (1/(M W)) int_0^t sin(W s) eta(s) ds
    D(t)           =  (1/hbar) int_0^t cos(W s) nu(s) ds
    f(t)           = -(1/(M W)) int_0^t sin(W s) nu(s) ds

    The s-integrals are done analytically inside the frequency integral
    defining the kernels, leaving one quadrature per coefficient and time.
    At W = 0 the factor sin(W s)/W becomes s.

    Parameters
    ----------
    params : QbmParams
    t_grid : array_like
        Non-decreasing times starting at 0.

    Returns
    -------
    CoefficientTrace
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or np.any(np.diff(t_grid) < 0) or (t_grid.size and t_grid[0] < 0):
        raise ValueError("t_grid must be non-decreasing and non-negative")
    M, W, hb = params.M, params.Omega, params.hbar
    Wc = CUTOFF_FACTOR * params.Gamma
    Fe = lambda w: spectral_density(params, w)
    Fn = lambda w: _coth_weighted(params, w)
    wfac = 1.0 / (M * W) if W > 0 else 1.0 / M
    out = np.zeros((4, t_grid.size))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for i, t in enumerate(t_grid):
            if t == 0:
                continue
            K = _time_kernels(W, t)
            out[0, i] = -(2.0 / M) * _omega_integral(Fe, K["cs"], t, W, Wc)
            out[1, i] = wfac * _omega_integral(Fe, K["ss"], t, W, Wc)
            out[2, i] = _omega_integral(Fn, K["cc"], t, W, Wc) / hb
            out[3, i] = -wfac * _omega_integral(Fn, K["sc"], t, W, Wc)
    return CoefficientTrace(t_grid, out[0], out[1], out[2], out[3])


def gamma_closed_form(params: QbmParams, t):
    """gamma(t) = gamma_inf [1 - e^{-Gamma t}(cos W t + (Gamma/W) sin W t)]."""
    t = np.asarray(t, dtype=float)
    G, W = params.Gamma, params.Omega
    if W == 0:
        return params.gamma0 * (1 - np.exp(-G * t) * (1 + G * t))
    return params.gamma_inf * (1 - np.exp(-G * t) * (np.cos(W * t) + G / W * np.sin(W * t)))


def omega_ren_sq_closed_form(params: QbmParams, t):
    """-2 gamma0 Gamma^3/(Gamma^2+W^2) [1 - e^{-Gamma t}(cos W t - (W/Gamma) sin W t)]."""
    t = np.asarray(t, dtype=float)
    G, W = params.Gamma, params.Omega
    pre = -2 * params.gamma0 * G ** 3 / (G ** 2 + W ** 2)
    return pre * (1 - np.exp(-G * t) * (np.cos(W * t) - W / G * np.sin(W * t)))


# ---------------------------------------------------------------------------
# position-space evolution


@dataclass(frozen=True)
class PositionGridState:
    """
    Density matrix rho(x, x') on a periodic grid.

    Parameters
    ----------
    rho : ndarray
        Complex (n, n) array, normalized so that sum(diag) * dx = 1.
    x_min, x_max : float
        Box [x_min, x_max); the grid is x_min + j dx.
    potential : callable, optional
        V(x); None means free motion.
    t : float
        Time stamp.
    """

    rho: np.ndarray
    x_min: float
    x_max: float
    potential: Callable | None = None
    t: float = 0.0

    def __post_init__(self):
        n = self.rho.shape[0]
        if self.rho.shape != (n, n) or n & (n - 1):
            raise ConfigError("rho must be square with a power-of-two size")
        if not self.x_max > self.x_min:
            raise ConfigError("x_max must exceed x_min")

    @property
    def n_points(self) -> int:
        return self.rho.shape[0]

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)) * self.dx)

    def density(self) -> np.ndarray:
        return np.real(np.diag(self.rho))

    @classmethod
    def from_wavefunction(cls, psi, x_min, x_max, potential=None) -> "PositionGridState":
        psi = np.asarray(psi, dtype=complex)
        dx = (x_max - x_min) / psi.size
        psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2) * dx)
        return cls(np.outer(psi, psi.conj()), x_min, x_max, potential)


def gaussian_wavefunction(x, x0=0.0, p0=0.0, sigma=1.0, hbar=1.0):
    """Minimum-uncertainty packet with position spread sigma."""
    return np.exp(-((x - x0) ** 2) / (4 * sigma ** 2) + 1j * p0 * (x - x0) / hbar)


def cat_wavefunction(x, x0, sigma, hbar=1.0):
    """Equal superposition of packets at +x0 and -x0."""
    return gaussian_wavefunction(x, x0, 0, sigma, hbar) + gaussian_wavefunction(x, -x0, 0, sigma, hbar)


def harmonic(M=1.0, Omega=1.0):
    """V(x) = M Omega^2 x^2 / 2."""
    return lambda x: 0.5 * M * Omega ** 2 * np.asarray(x) ** 2


def high_t_evolve(state: PositionGridState, params: QbmParams, dt: float, steps: int, *,
                  kinetic: bool = True, relaxation: bool = True, anomalous: float | None = None,
                  callback: Callable | None = None) -> PositionGridState:
    """
    Evolve rho(x, x') under the high-temperature master equation.

        d rho/dt = -(i/hbar)[H, rho] - gamma (x - x')(d_x - d_x') rho
                   - (2 M gamma kB T / hbar^2)(x - x')^2 rho

    Strang splitting: half potential phase, half kinetic propagator, the
    dissipative part (decoherence factor exact, relaxation by an RK4 step
    with spectral derivatives), then the mirrored half steps. gamma is
    ``params.gamma0``.

    Parameters
    ----------
    state : PositionGridState
    params : QbmParams
    dt : float
    steps : int
    kinetic : bool
        Include p^2/2M.
    relaxation : bool
        Include the relaxation term.
    anomalous : float, optional
        Coefficient f of an extra -(f/hbar)[x, [p, rho]] term.
    callback : callable, optional
        Called as ``callback(step, state)`` after every step.

    Returns
    -------
    PositionGridState
    """
    n, dx = state.n_points, state.dx
    x = state.x
    hb, M, g = params.hbar, params.M, params.gamma0
    k = 2 * np.pi * np.fft.fftfreq(n, d=dx)
    X = x[:, None] - x[None, :]
    Dx = params.diffusion_x
    Vx = state.potential(x) if state.potential is not None else np.zeros(n)
    half_v = np.exp(-1j * (Vx[:, None] - Vx[None, :]) * dt / (2 * hb))
    half_k = np.exp(-1j * hb * k ** 2 * dt / (4 * M))
    dec_half = np.exp(-Dx * X ** 2 * dt / 2)
    ik = 1j * k

    def kin(r):
        # U r U^dagger with U diagonal in k
        a = np.fft.ifft(half_k[:, None] * np.fft.fft(r, axis=0), axis=0)
        return np.fft.fft(half_k.conj()[None, :] * np.fft.ifft(a, axis=1), axis=1)

    def gen(r):
        dxr = np.fft.ifft(ik[:, None] * np.fft.fft(r, axis=0), axis=0)
        dxpr = np.fft.ifft(ik[None, :] * np.fft.fft(r, axis=1), axis=1)
        out = np.zeros_like(r)
        if relaxation and g > 0:
            out -= g * X * (dxr - dxpr)
        if anomalous:
            out += 1j * anomalous * X * (dxr + dxpr)
        return out

    need_gen = (relaxation and g > 0) or bool(anomalous)
    r = np.array(state.rho, dtype=complex)
    tr0 = np.real(np.trace(r)) * dx
    edge = np.r_[0:5, n - 5:n]
    warned = False
    for step in range(steps):
        r = half_v * r
        if kinetic:
            r = kin(r)
        r = dec_half * r
        if need_gen:
            k1 = gen(r)
            k2 = gen(r + 0.5 * dt * k1)
            k3 = gen(r + 0.5 * dt * k2)
            k4 = gen(r + dt * k3)
            r = r + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        r = dec_half * r
        if kinetic:
            r = kin(r)
        r = half_v * r
        r = 0.5 * (r + r.conj().T)
        tr = np.real(np.trace(r)) * dx
        if not np.isfinite(tr) or abs(tr - tr0) > 1e-4:
            raise NumericalError(f"trace drifted to {tr!r} at step {step}")
        if not warned and np.sum(np.real(np.diag(r))[edge]) * dx > 1e-6:
            warnings.warn("probability leaking through the box boundary", RuntimeWarning, stacklevel=2)
            warned = True
        if callback is not None:
            callback(step, replace(state, rho=r, t=state.t + (step + 1) * dt))
    return replace(state, rho=r, t=state.t + steps * dt)


class DecoherenceTime(NamedTuple):
    tau_D: float
    lambda_T: float
    ratio_to_relaxation: float


def decoherence_time(params: QbmParams, separation: float) -> DecoherenceTime:
    """
    Decoherence time of a superposition of positions ``separation`` apart.

    Returns
    -------
    DecoherenceTime
        tau_D = (lambda_T / dx)^2 / gamma, lambda_T = hbar / sqrt(2 M kB T),
        ratio = (dx / lambda_T)^2.
    """
    if separation <= 0:
        raise ValueError("separation must be positive")
    if params.T <= 0:
        raise ConfigError("decoherence time undefined at T = 0")
    lam = params.thermal_wavelength
    ratio = (separation / lam) ** 2
    return DecoherenceTime(1.0 / (params.gamma0 * ratio), lam, ratio)


def cgs_params(mass_g: float, temperature_K: float, gamma0: float = 1.0, **kw) -> QbmParams:
    """Parameters in CGS units with physical hbar and kB."""
    return QbmParams(gamma0=gamma0, Gamma=kw.pop("Gamma", 1.0), T=temperature_K, M=mass_g,
                     Omega=kw.pop("Omega", 0.0), hbar=HBAR_CGS, kB=KB_CGS)
