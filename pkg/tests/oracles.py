"""Independent quadrature oracles for the closed-form bath coefficients.

Everything here recomputes the library's analytic expressions from their
defining integrals with adaptive Gauss-Kronrod quadrature (absolute
tolerance 1e-10 unless the Fourier weight machinery needs tighter), so the
tests never compare an expression against itself.
"""

import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, dblquad, quad

from mebench.bath import bcf

QUAD_OPTS = {"epsabs": 1e-10, "epsrel": 1e-10, "limit": 400}


def quad_complex(f, a, b, **kwargs):
    opts = {**QUAD_OPTS, **kwargs}
    re = quad(lambda x: f(x).real, a, b, **opts)[0]
    im = quad(lambda x: f(x).imag, a, b, **opts)[0]
    return re + 1j * im


def bcf_fourier_oracle(params, tau):
    """(1/pi) Integral of J(omega) e^{-i omega tau} over the whole real line.

    Centering at omega0 leaves an even Lorentzian times cos; the semi-
    infinite Fourier-weighted rule integrates the tail exactly instead of
    truncating it.
    """
    lor = lambda x: params.eta * params.gamma / (params.gamma**2 + x**2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        re = quad(lor, 0.0, np.inf, weight="cos", wvar=tau,
                  limit=800, epsabs=1e-13)[0]
    return (2.0 / np.pi) * re * np.exp(-1j * params.omega0 * tau)


def half_fourier_oracle(params, omega):
    """Truncated half-line transform of the correlation function."""
    horizon = 50.0 / params.gamma
    return quad_complex(lambda s: bcf(params, s) * np.exp(1j * omega * s),
                        0.0, horizon)


def redfield_oracle(params, omega, t):
    """Finite-time coefficient from its defining integral."""
    return quad_complex(lambda s: bcf(params, s) * np.exp(1j * omega * s), 0.0, t)


def cg_oracle(params, omega, omega_p, tau):
    """Nested quadrature of the coarse-graining double integral."""
    def integrand(u, s):
        return bcf(params, s - u) * np.exp(1j * (omega_p * s - omega * u))

    re = dblquad(lambda u, s: integrand(u, s).real, 0.0, tau, 0.0, lambda s: s,
                 epsabs=1e-10)[0]
    im = dblquad(lambda u, s: integrand(u, s).imag, 0.0, tau, 0.0, lambda s: s,
                 epsabs=1e-10)[0]
    return re + 1j * im


def dephasing_exponent(params, t):
    """Gamma(t) = int_0^t ds int_0^s du Re alpha(s - u)."""
    return dblquad(lambda u, s: bcf(params, s - u).real, 0.0, t, 0.0, lambda s: s,
                   epsabs=1e-12)[0]
