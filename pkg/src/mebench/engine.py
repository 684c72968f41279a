"""Shared numerical substrate for the benchmark.

Dense complex matrices, column-stacking vectorization, superoperator
assembly, adaptive integration of (time dependent) linear equations,
matrix exponentials, Hermitian eigensolves and nullspace extraction.
All routines are stateless and deterministic.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp


class EngineError(RuntimeError):
    """A numerical kernel could not deliver its contract."""


class IntegrationError(EngineError):
    """The adaptive integrator failed (step underflow, non-finite values)."""


def hs_norm(x):
    """Hilbert-Schmidt (Frobenius) norm, the distance used throughout."""
    return float(np.linalg.norm(x))


# ---------------------------------------------------------------------------
# vectorization (column stacking)
# ---------------------------------------------------------------------------

def vectorize(x):
    """Column-stack a square matrix: [[a, b], [c, d]] -> (a, c, b, d)."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    return x.reshape(-1, order="F")


def devectorize(v):
    """Inverse of :func:`vectorize`; the dimension is inferred."""
    v = np.asarray(v)
    n = math.isqrt(v.size)
    if n * n != v.size:
        raise ValueError(f"vector of length {v.size} is not a square matrix")
    return v.reshape((n, n), order="F")


def left_multiply(a):
    """Superoperator matrix of X -> A X."""
    a = np.asarray(a)
    return np.kron(np.eye(a.shape[0]), a)


def right_multiply(b):
    """Superoperator matrix of X -> X B."""
    b = np.asarray(b)
    return np.kron(b.T, np.eye(b.shape[0]))


def sandwich(a, b):
    """Superoperator matrix of X -> A X B, i.e. (B^T otimes A)."""
    return np.kron(np.asarray(b).T, np.asarray(a))


def commutator_superop(h):
    """Superoperator matrix of X -> -i [H, X]."""
    return -1j * (left_multiply(h) - right_multiply(h))


@dataclass(frozen=True)
class Superoperator:
    """Dense matrix acting on column-stacked operators.

    ``matrix`` has shape (n^2, n^2) for operators of dimension n.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"superoperator matrix must be square, got {m.shape}")
        if math.isqrt(m.shape[0]) ** 2 != m.shape[0]:
            raise ValueError(f"matrix size {m.shape[0]} is not a perfect square")

    @property
    def dim(self):
        """Dimension n of the operators acted upon."""
        return math.isqrt(self.matrix.shape[0])

    def apply(self, x):
        """Apply to an operator (matrix in, matrix out)."""
        return devectorize(self.matrix @ vectorize(x))

    def __matmul__(self, other):
        if isinstance(other, Superoperator):
            return Superoperator(self.matrix @ other.matrix)
        return NotImplemented


# ---------------------------------------------------------------------------
# time-indexed states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """States on a time grid: ``states[k]`` belongs to ``times[k]``."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("time grid and state stack disagree in length")

    def __len__(self):
        return len(self.times)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def integrate(rhs, y0, times, rtol=1e-9, atol=1e-12, max_step=np.inf):
    """Integrate y' = rhs(t, y) and return y at the requested times.

    Adaptive embedded Runge-Kutta 5(4) with dense output; ``times`` must be
    ascending. Returns an array of shape ``(len(times), len(y0))``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly ascending")
    y0 = np.atleast_1d(np.asarray(y0, dtype=complex))
    if times.size == 1:
        return y0[np.newaxis, :].copy()

    def checked_rhs(t, y):
        dy = np.asarray(rhs(t, y))
        if not np.all(np.isfinite(dy)):
            raise IntegrationError(
                f"right-hand side returned non-finite values at t = {t:.6g}")
        return dy

    sol = solve_ivp(
        checked_rhs,
        (times[0], times[-1]),
        y0,
        method="RK45",
        t_eval=times,
        rtol=rtol,
        atol=atol,
        max_step=max_step,
    )
    if not sol.success:
        t_fail = sol.t[-1] if sol.t.size else times[0]
        raise IntegrationError(f"RK45 failed near t = {t_fail:.6g}: {sol.message}")
    y = sol.y.T
    if not np.all(np.isfinite(y)):
        raise IntegrationError("integrator produced non-finite values")
    return y


def expm(m):
    """Matrix exponential (scaling-and-squaring with Pade approximant)."""
    m = np.asarray(m)
    if not np.all(np.isfinite(m)):
        raise EngineError("expm: input contains non-finite entries")
    out = scipy.linalg.expm(m)
    if not np.all(np.isfinite(out)):
        raise EngineError("expm: overflow (matrix norm too extreme)")
    return out


# ---------------------------------------------------------------------------
# eigensolves
# ---------------------------------------------------------------------------

def hermitian_eigs(x, herm_tol=1e-10):
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The input is checked to be Hermitian within ``herm_tol`` (relative to its
    norm) and symmetrized before the solve.
    """
    x = np.asarray(x)
    scale = max(1.0, hs_norm(x))
    if hs_norm(x - x.conj().T) > herm_tol * scale:
        raise EngineError("hermitian_eigs: input is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(0.5 * (x + x.conj().T))
    return vals, vecs


def nullspace(s, rtol=1e-11):
    """Numerical nullspace of a matrix via its smallest singular vectors.

    Returns an ``(n, k)`` array of orthonormal kernel vectors, where the
    kernel is detected as singular values below ``rtol`` times the largest.
    """
    s = np.asarray(s)
    if not np.all(np.isfinite(s)):
        raise EngineError("nullspace: input contains non-finite entries")
    _, sigma, vh = np.linalg.svd(s)
    if sigma.size == 0 or sigma[0] == 0.0:
        raise EngineError("nullspace: zero matrix has no meaningful kernel basis")
    mask = sigma <= rtol * sigma[0]
    if not np.any(mask):
        raise EngineError(
            f"nullspace: no numerical kernel (smallest relative singular value "
            f"{sigma[-1] / sigma[0]:.3e} above threshold {rtol:.1e})"
        )
    return vh[mask].conj().T
