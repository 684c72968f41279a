"""Exact reference dynamics via a damped auxiliary oscillator.

A Lorentzian environment is equivalent, as far as the reduced two-qubit
dynamics is concerned, to a single harmonic mode at omega0 coupled to the
system with strength sqrt(eta) and damped at rate gamma into a flat bath.
The composite system+mode state P obeys the GKSL equation

    dP/dt = -i [H_P, P] + gamma ([a, P a^dag] + h.c.),
    H_P   = H_S + sqrt(eta) L (a + a^dag) + omega0 a^dag a,

which is solved here with a truncated Fock space: steady state from the
kernel of the generator, truncation auto-converged by raising the Fock
cutoff in steps, propagation horizon fixed by closeness to the steady
state, and the exact reduced trajectory obtained by partial trace.

The generator is time independent, so states are advanced with matrix
exponentials (repeated squaring for the geometric horizon search); a
sparse path takes over when the composite dimension makes dense
superoperators impractical. This sidesteps the step-size limits an
explicit integrator would face for stiff weak-coupling parameters.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from . import engine
from .engine import Trajectory, devectorize, expm, hs_norm, vectorize

#: Largest vectorized-state dimension (4 d)^2 for which dense superoperators
#: (kernel SVD, exponential stepping) are used.
DENSE_SUPEROP_LIMIT = 4096


class TruncationError(RuntimeError):
    """The Fock-space ladder exceeded its cap without converging."""


class SteadyStateError(RuntimeError):
    """No unique, physical steady state could be extracted."""


class HorizonError(RuntimeError):
    """The propagation-horizon search hit its cap without relaxing."""


@dataclass(frozen=True)
class PseudoModeConfig:
    """Knobs of the convergence and horizon searches."""

    d_init: int = 6
    d_step: int = 4
    state_tol: float = 1e-6
    tmax_tol: float = 0.01
    d_cap: int = 120
    horizon_factor: float = 1e4

    def __post_init__(self):
        if self.d_init < 2:
            raise ValueError("d_init must be at least 2")
        if self.d_step < 1:
            raise ValueError("d_step must be at least 1")
        if not (0 < self.state_tol < 1 and 0 < self.tmax_tol < 1):
            raise ValueError("tolerances must lie in (0, 1)")


@dataclass(frozen=True)
class PseudoModeModel:
    """Composite system+mode model at a fixed Fock truncation."""

    h_p: np.ndarray
    lower: np.ndarray
    gamma: float
    d: int
    bath: object
    system: object

    @property
    def dim(self):
        return 4 * self.d

    def apply_generator(self, p):
        """Action of the composite GKSL generator on a (4d, 4d) matrix."""
        a = self.lower
        num = a.conj().T @ a
        comm = self.h_p @ p - p @ self.h_p
        diss = 2.0 * (a @ p @ a.conj().T) - num @ p - p @ num
        return -1j * comm + self.gamma * diss

    def superoperator(self):
        """Dense generator matrix on column-stacked composite states."""
        a = self.lower
        num = a.conj().T @ a
        eye = np.eye(self.dim)
        s = engine.commutator_superop(self.h_p).astype(complex)
        s += self.gamma * (2.0 * np.kron(a.conj(), a)
                           - np.kron(eye, num) - np.kron(num.T, eye))
        return s

    def sparse_superoperator(self):
        """CSR version of :meth:`superoperator` (memory-light for large d)."""
        a = sp.csr_matrix(self.lower)
        num = (a.conj().T @ a).tocsr()
        h = sp.csr_matrix(self.h_p)
        eye = sp.identity(self.dim, dtype=complex, format="csr")
        s = -1j * (sp.kron(eye, h, format="csr") - sp.kron(h.T, eye, format="csr"))
        s = s + self.gamma * (2.0 * sp.kron(a.conj(), a, format="csr")
                              - sp.kron(eye, num, format="csr")
                              - sp.kron(num.T, eye, format="csr"))
        return s.tocsr()


def lowering_operator(d):
    """Truncated Fock-space lowering operator, a |n> = sqrt(n) |n-1>."""
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)


def build_pseudomode(model, bath_params, d):
    """Assemble the composite generator at Fock truncation ``d``."""
    if d < 2:
        raise ValueError("truncation d must be at least 2")
    a_mode = lowering_operator(d)
    eye_d = np.eye(d, dtype=complex)
    number = a_mode.conj().T @ a_mode
    h_p = (np.kron(model.hamiltonian, eye_d)
           + np.sqrt(bath_params.eta) * np.kron(model.coupling, a_mode + a_mode.conj().T)
           + bath_params.omega0 * np.kron(np.eye(4, dtype=complex), number))
    lower = np.kron(np.eye(4, dtype=complex), a_mode)
    return PseudoModeModel(h_p=h_p, lower=lower, gamma=bath_params.gamma, d=d,
                           bath=bath_params, system=model)


def embed_with_vacuum(rho_sys, d):
    """Composite initial operator rho (x) |0><0| with the mode in vacuum."""
    vac = np.zeros((d, d), dtype=complex)
    vac[0, 0] = 1.0
    return np.kron(np.asarray(rho_sys, dtype=complex), vac)


def ptrace_mode(p, d):
    """Trace out the mode of a composite (4d, 4d) matrix."""
    return np.einsum("aibi->ab", np.asarray(p).reshape(4, d, 4, d))


# ---------------------------------------------------------------------------
# steady state
# ---------------------------------------------------------------------------

def steady_state(pm, dense_limit=DENSE_SUPEROP_LIMIT, detect_rtol=1e-11,
                 positivity_tol=1e-8):
    """Stationary composite state, normalized to unit trace.

    For vectorized dimensions up to ``dense_limit`` the kernel is extracted
    as the singular vector of the smallest singular value of the dense
    generator (a kernel of dimension > 1 is an error: the steady state is
    then not unique). Beyond that, dense factorizations scale too badly and
    the state is relaxed by long-time propagation until the generator
    residual falls below 1e-10.
    """
    n2 = pm.dim**2
    if n2 <= dense_limit:
        kernel = engine.nullspace(pm.superoperator(), rtol=detect_rtol)
        if kernel.shape[1] > 1:
            raise SteadyStateError(
                f"steady state not unique: numerical kernel has dimension "
                f"{kernel.shape[1]}"
            )
        p = devectorize(kernel[:, 0])
    else:
        p = _relax_to_steady(pm)
    tr = np.trace(p)
    if abs(tr) < 1e-12:
        raise SteadyStateError("kernel vector has vanishing trace")
    p = p / tr
    p = 0.5 * (p + p.conj().T)
    min_eig = float(np.linalg.eigvalsh(p).min())
    if min_eig < -positivity_tol:
        raise SteadyStateError(f"steady state not positive: min eigenvalue {min_eig:.3e}")
    return p


def _relax_to_steady(pm, residual_tol=1e-10, max_doublings=40):
    """Propagate a mixed state until the generator residual vanishes."""
    p = embed_with_vacuum(np.eye(4, dtype=complex) / 4.0, pm.d)
    span = 1.0 / pm.gamma

    def rhs(_, y):
        return vectorize(pm.apply_generator(devectorize(y)))

    for _ in range(max_doublings):
        y = engine.integrate(rhs, vectorize(p), [0.0, span], rtol=1e-10, atol=1e-13)
        p = devectorize(y[-1])
        if hs_norm(pm.apply_generator(p)) <= residual_tol:
            return p
        span *= 2.0
    raise SteadyStateError(
        f"long-time relaxation did not reach residual {residual_tol:.1e}"
    )


def converge_truncation(model, bath_params, cfg=PseudoModeConfig()):
    """Smallest Fock cutoff on the ladder d_init, d_init + d_step, ... whose
    reduced steady state has stopped moving.

    Convergence compares consecutive reduced steady states in relative
    Hilbert-Schmidt distance against ``cfg.state_tol``. The decoupled limit
    eta = 0 never populates the mode and returns immediately at ``d_init``
    (its steady state is not unique, so the ladder criterion is moot there;
    the stationary mixed-state x vacuum product is returned).
    """
    if bath_params.eta == 0.0:
        return cfg.d_init, embed_with_vacuum(np.eye(4, dtype=complex) / 4.0, cfg.d_init)

    prev_reduced = None
    d = cfg.d_init
    while d <= cfg.d_cap:
        p_inf = steady_state(build_pseudomode(model, bath_params, d))
        reduced = ptrace_mode(p_inf, d)
        if prev_reduced is not None:
            change = hs_norm(reduced - prev_reduced) / hs_norm(reduced)
            if change < cfg.state_tol:
                return d, p_inf
        prev_reduced = reduced
        d += cfg.d_step
    raise TruncationError(
        f"Fock truncation exceeded cap {cfg.d_cap} without reaching "
        f"relative steady-state change < {cfg.state_tol:.1e} "
        f"(eta={bath_params.eta}, gamma={bath_params.gamma})"
    )


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

class ReferencePropagator:
    """Advances composite states under the time-independent generator.

    Dense mode caches matrix exponentials per step size; sparse mode
    (vectorized dimension beyond ``dense_limit``) applies Krylov-free
    exponential action on vectors instead.
    """

    def __init__(self, pm, dense_limit=DENSE_SUPEROP_LIMIT):
        self.pm = pm
        self.dense = pm.dim**2 <= dense_limit
        if self.dense:
            self.superop = pm.superoperator()
            self._steps = {}
        else:
            self.superop_sp = pm.sparse_superoperator()

    def step_matrix(self, dt):
        """exp(generator * dt); dense mode only, cached per dt.

        Steps are quantized to 12 significant digits so that fp jitter in
        grid differences cannot defeat the cache.
        """
        dt = float(f"{dt:.12e}")
        phi = self._steps.get(dt)
        if phi is None:
            phi = expm(self.superop * dt)
            self._steps[dt] = phi
        return phi

    def advance(self, vstates, dt):
        """Advance column-stacked state vectors (shape (n^2,) or (n^2, k))."""
        if dt == 0.0:
            return vstates.copy()
        if self.dense:
            return self.step_matrix(dt) @ vstates
        return expm_multiply(self.superop_sp * dt, vstates)

    def trajectory(self, vstates, times):
        """States at the given ascending times (first entry may be > 0)."""
        times = np.asarray(times, dtype=float)
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly ascending")
        out = np.empty((len(times),) + vstates.shape, dtype=complex)
        current = self.advance(vstates, times[0]) if times[0] > 0 else vstates.copy()
        out[0] = current
        diffs = np.diff(times)
        uniform = diffs.size > 0 and np.allclose(diffs, diffs[0], rtol=1e-9, atol=0.0)
        if uniform:
            # fp jitter in linspace diffs must not defeat the expm cache
            h = (times[-1] - times[0]) / (len(times) - 1)
            for k in range(1, len(times)):
                current = self.advance(current, h)
                out[k] = current
        else:
            for k, dt in enumerate(diffs, start=1):
                current = self.advance(current, float(dt))
                out[k] = current
        return out


def determine_tmax(pm, p_inf, rho0_total, cfg=PseudoModeConfig(), refine_points=128,
                   confirm=4, propagator=None):
    """Propagation horizon: earliest time from which the composite state
    stays within ``cfg.tmax_tol`` relative Hilbert-Schmidt distance of the
    steady state.

    A geometric coarse pass (doubling times) brackets the settling, and a
    uniform refinement inside the bracket pins the horizon to better than
    1% relative resolution. Exceeding the horizon cap (or the doubling
    budget, for dynamics that never relax, e.g. eta = 0) raises
    :class:`HorizonError` with the last distance seen.
    """
    bath_params = pm.bath
    prop = propagator if propagator is not None else ReferencePropagator(pm)
    v_inf = vectorize(p_inf)
    norm_inf = hs_norm(p_inf)
    tol = cfg.tmax_tol
    if bath_params.eta > 0:
        t_cap = cfg.horizon_factor * max(1.0 / bath_params.gamma, 1.0,
                                         bath_params.gamma / bath_params.eta)
    else:
        t_cap = np.inf

    def distance(v):
        return hs_norm(v - v_inf) / norm_inf

    v0 = vectorize(embed_with_vacuum(rho0_total, pm.d) if rho0_total.shape[0] == 4
                   else np.asarray(rho0_total, dtype=complex))

    h0 = 0.01 * min(1.0 / bath_params.gamma, 1.0)
    ladder_t = [0.0]
    ladder_v = [v0]
    ladder_d = [distance(v0)]

    t = h0
    v = prop.advance(v0, h0)
    phi = None
    if prop.dense:
        phi = prop.step_matrix(h0)
    streak = 0
    max_doublings = 70
    for k in range(max_doublings):
        ladder_t.append(t)
        ladder_v.append(v)
        ladder_d.append(distance(v))
        if ladder_d[-1] < tol:
            streak += 1
            if streak >= confirm:
                break
        else:
            streak = 0
            if t >= t_cap:
                raise HorizonError(
                    f"horizon cap {t_cap:.3e} exceeded at relative distance "
                    f"{ladder_d[-1]:.3e} (tol {tol})"
                )
        # double the elapsed time: t=h0 -> 2 h0, afterwards t -> 2 t
        if k == 0:
            v = phi @ v if prop.dense else prop.advance(v, h0)
            t += h0
        else:
            if prop.dense:
                phi = phi @ phi
                v = phi @ v
            else:
                v = prop.advance(v, t)
            t *= 2.0
    else:
        raise HorizonError(
            f"no settling within {max_doublings} doublings "
            f"(last relative distance {ladder_d[-1]:.3e}, tol {tol}); "
            f"dynamics may never relax (cap {t_cap:.3e})"
        )

    # bracket: first sub-tol ladder point of the confirmed streak
    first_ok = len(ladder_d) - confirm
    t_lo, t_hi = ladder_t[first_ok - 1], ladder_t[first_ok]
    v_lo = ladder_v[first_ok - 1]

    # uniform refinement inside the bracket
    delta = (t_hi - t_lo) / refine_points
    sub_d = np.empty(refine_points + 1)
    sub_d[0] = distance(v_lo)
    v = v_lo
    for i in range(1, refine_points + 1):
        v = prop.advance(v, delta)
        sub_d[i] = distance(v)
    below = sub_d < tol
    idx = refine_points
    while idx > 0 and below[idx - 1]:
        idx -= 1
    return t_lo + idx * delta


def reference_trajectory(model, bath_params, rho0, times, d):
    """Exact reduced trajectory at Fock truncation ``d``.

    The composite starts in rho0 (x) vacuum; the mode is traced out at every
    grid time. ``rho0`` is any Hermitian 4x4 operator (the propagation is
    linear, so non-state inputs are fine).
    """
    times = np.asarray(times, dtype=float)
    pm = build_pseudomode(model, bath_params, d)
    prop = ReferencePropagator(pm)
    v0 = vectorize(embed_with_vacuum(rho0, d))
    vstates = prop.trajectory(v0, times)
    reduced = np.array([ptrace_mode(devectorize(v), d) for v in vstates])
    return Trajectory(times=times, states=reduced)
