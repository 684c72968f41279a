"""Closed-form coefficients of the Lorentzian environment.

Everything the evolutions need from the bath is derived from the triple
(eta, gamma, omega0): the spectral density, the exponential two-time
correlation function, its half-sided Fourier transform, the finite-time
relaxation coefficients and the coarse-graining double integrals. All
functions are pure and safe to call concurrently.

Units: frequencies in the reference frequency Delta, times in 1/Delta,
eta in Delta^2.
"""

from dataclasses import dataclass

import numpy as np

#: Half width of the |omega - omega'| window routed to the equal-frequency
#: coarse-graining formula. The distinct-frequency branch divides by
#: (omega - omega') and degrades near the diagonal, so the window errs
#: toward the degenerate branch.
OMEGA_DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class BathParams:
    """Lorentzian environment: coupling strength, width, central frequency.

    ``eta = 0`` is allowed and describes the decoupled limit.
    """

    eta: float
    gamma: float
    omega0: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta >= 0):
            raise ValueError(f"eta must be finite and >= 0, got {self.eta}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be finite and > 0, got {self.gamma}")
        if not np.isfinite(self.omega0):
            raise ValueError(f"omega0 must be finite, got {self.omega0}")


def _cexpm1(z):
    """exp(z) - 1, accurate for small |z|, for complex z (elementwise)."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    ex = np.exp(x)
    # exp(x+iy) - 1 = expm1(x) - 2 e^x sin^2(y/2) + i e^x sin(y)
    return (np.expm1(x) - 2.0 * ex * np.sin(0.5 * y) ** 2) + 1j * ex * np.sin(y)


def spectral_density(params, omega):
    """Lorentzian spectral density J(omega), strictly positive for eta > 0."""
    d = params.omega0 - np.asarray(omega, dtype=float)
    return params.eta * params.gamma / (params.gamma**2 + d**2)


def bcf(params, tau):
    """Bath correlation function alpha(tau) = eta e^(-gamma|tau| - i omega0 tau)."""
    tau = np.asarray(tau, dtype=float)
    return params.eta * np.exp(-params.gamma * np.abs(tau) - 1j * params.omega0 * tau)


def half_fourier(params, omega):
    """Half-sided Fourier transform of the correlation function.

    F(omega) = J(omega) + i S(omega) with
    S(omega) = eta (omega - omega0) / (gamma^2 + (omega0 - omega)^2).
    """
    omega = np.asarray(omega, dtype=float)
    d = params.omega0 - omega
    s = params.eta * (omega - params.omega0) / (params.gamma**2 + d**2)
    return spectral_density(params, omega) + 1j * s


def redfield_coeff(params, omega, t):
    """Finite-time relaxation coefficient F(omega, t) = int_0^t alpha(s) e^(i omega s) ds.

    Converges to :func:`half_fourier` for t >> 1/gamma; the deviation decays
    as eta e^(-gamma t) / sqrt(gamma^2 + (omega0 - omega)^2).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("redfield_coeff requires t >= 0")
    c = params.gamma + 1j * (params.omega0 - np.asarray(omega, dtype=float))
    return half_fourier(params, omega) * (-_cexpm1(-c * t))


def cg_coeff(params, omega, omega_p, tau, degeneracy_tol=OMEGA_DEGENERACY_TOL):
    """Coarse-graining coefficient G(omega, omega', tau).

    G = int_0^tau ds int_0^s du alpha(s - u) e^(i (omega' s - omega u)),
    evaluated in closed form; the equal-frequency expression is used whenever
    |omega - omega'| <= degeneracy_tol. G(omega, omega, tau)/tau approaches
    the half-sided Fourier transform for large tau.
    """
    if tau < 0:
        raise ValueError("cg_coeff requires tau >= 0")
    eta = params.eta
    c = params.gamma + 1j * (params.omega0 - omega)
    if abs(omega - omega_p) <= degeneracy_tol:
        return eta * tau / c + eta * _cexpm1(-c * tau) / c**2
    cp = params.gamma + 1j * (params.omega0 - omega_p)
    osc = 1j * _cexpm1(-1j * (omega - omega_p) * tau) / (omega - omega_p)
    return (eta / c) * (osc + _cexpm1(-cp * tau) / cp)
