"""The perturbative evolutions under assessment.

Six approximate propagators for the reduced two-qubit state, all driven by
the same jump decomposition of the coupling operator:

* RFE_TDC / RFE_AC - relaxation equation with finite-time respectively
  asymptotic coefficients (not of GKSL form),
* QOME  - fully secular GKSL equation with Lamb shift,
* PRWA  - QOME structure over clusters of nearby transition frequencies,
* CGME  - coarse-grained GKSL generator with free time parameter tau,
* EXPZ  - completely positive exponential of the coarse-graining map.

Generators are built as dense superoperators on column-stacked operators.
Time-dependent generators (RFE_TDC transient, CGME) are integrated with the
adaptive RK 5(4) integrator; constant generators are advanced by matrix
exponentials of the step, which is exact for them and free of step-size
limits on long horizons. Interaction-picture methods are transformed back
to the Schroedinger picture at output times only.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import engine
from .bath import cg_coeff, half_fourier, redfield_coeff, spectral_density
from .engine import (Superoperator, Trajectory, commutator_superop, devectorize,
                     expm, hs_norm, left_multiply, right_multiply, sandwich,
                     vectorize)
from .system import GROUP_TOL, cluster_frequencies, jump_decomposition

#: Beyond this many bath correlation times the finite-time coefficients are
#: indistinguishable from their asymptotic values (relative deviation
#: e^-40 ~ 4e-18), so the integration switches to exponential stepping with
#: the constant asymptotic generator.
TDC_SETTLING_FACTOR = 40.0


class Method(enum.Enum):
    RFE_TDC = "rfe_tdc"
    RFE_AC = "rfe_ac"
    QOME = "qome"
    PRWA = "prwa"
    CGME = "cgme"
    EXPZ = "expz"


@dataclass(frozen=True)
class GeneratorSpec:
    """A method plus its free parameters.

    ``tau_cg`` (required for CGME) is the coarse-graining time, ``cluster_tol``
    the frequency-clustering width of the PRWA. CGME and EXPZ live in the
    interaction picture, the others in the Schroedinger picture.
    """

    method: Method
    tau_cg: float | None = None
    cluster_tol: float = 0.1
    group_tol: float = GROUP_TOL

    def __post_init__(self):
        if self.method is Method.CGME and not (self.tau_cg and self.tau_cg > 0):
            raise ValueError("CGME requires tau_cg > 0")
        if self.cluster_tol < 0:
            raise ValueError("cluster_tol must be >= 0")

    @property
    def picture(self):
        if self.method in (Method.CGME, Method.EXPZ):
            return "interaction"
        return "schroedinger"

    def label(self):
        if self.method is Method.CGME:
            return f"cgme(tau={self.tau_cg:g})"
        return self.method.value


# ---------------------------------------------------------------------------
# generator assembly
# ---------------------------------------------------------------------------

def _dissipator(op):
    """Superoperator of rho -> A rho A^dag - (A^dag A rho + rho A^dag A)/2."""
    ada = op.conj().T @ op
    return sandwich(op, op.conj().T) - 0.5 * left_multiply(ada) - 0.5 * right_multiply(ada)


def _gksl_matrix(hamiltonian, freqs, ops, bath_params):
    """Secular GKSL generator: Lamb-shifted commutator plus 2J(w) dissipators."""
    lamb = np.zeros((4, 4), dtype=complex)
    gen = np.zeros((16, 16), dtype=complex)
    for w, op in zip(freqs, ops):
        f = complex(half_fourier(bath_params, w))
        lamb += f.imag * (op.conj().T @ op)
        gen += 2.0 * f.real * _dissipator(op)
    return gen + commutator_superop(hamiltonian + lamb)


def _rfe_pieces(model, group_tol):
    """Constant building blocks of the relaxation generator.

    For each jump frequency w, the generator adds
    F(w, t) [L_w rho, L] + h.c.; the two constant superoperator factors of
    F and conj(F) are precomputed here.
    """
    decomp = jump_decomposition(model, group_tol)
    coupling = decomp.coupling
    a_parts = []
    b_parts = []
    for op in decomp.operators:
        a_parts.append(sandwich(op, coupling) - left_multiply(coupling @ op))
        opd = op.conj().T
        b_parts.append(sandwich(coupling, opd) - right_multiply(opd @ coupling))
    return decomp.frequencies, np.array(a_parts), np.array(b_parts), commutator_superop(model.hamiltonian)


def _rfe_matrix(model, bath_params, t, variant, group_tol):
    freqs, a_parts, b_parts, comm = _rfe_pieces(model, group_tol)
    if variant == "tdc":
        coeffs = np.atleast_1d(redfield_coeff(bath_params, freqs, t))
    elif variant == "ac":
        coeffs = np.atleast_1d(half_fourier(bath_params, freqs))
    else:
        raise ValueError(f"unknown variant {variant!r} (expected 'tdc' or 'ac')")
    return (comm + np.tensordot(coeffs, a_parts, axes=(0, 0))
            + np.tensordot(coeffs.conj(), b_parts, axes=(0, 0)))


def rfe_generator(model, bath_params, t, variant="tdc", group_tol=GROUP_TOL):
    """Relaxation generator at time t ('tdc') or with asymptotic rates ('ac')."""
    return Superoperator(_rfe_matrix(model, bath_params, t, variant, group_tol))


def qome_generator(model, bath_params, group_tol=GROUP_TOL):
    """Fully secular GKSL generator over the jump decomposition."""
    decomp = jump_decomposition(model, group_tol)
    return Superoperator(_gksl_matrix(model.hamiltonian, decomp.frequencies,
                                      decomp.operators, bath_params))


def prwa_generator(model, bath_params, cluster_tol, group_tol=GROUP_TOL):
    """Partially secular GKSL generator over frequency clusters."""
    clustering = cluster_frequencies(jump_decomposition(model, group_tol), cluster_tol)
    return Superoperator(_gksl_matrix(model.hamiltonian, clustering.frequencies,
                                      clustering.operators, bath_params))


def _zmap_pieces(model, bath_params, tau, group_tol):
    """Coarse-graining map contributions, grouped by oscillation frequency.

    Expanding the double-integral second-order map over the jump components
    gives, per frequency pair (w, w') with coefficients
    W = G(w', w, tau), W' = G(w, w', tau):

        e^{i(w - w') t} [ (W + W'*) L_w' rho L_w^dag
                          - W L_w^dag L_w' rho - W'* rho L_w^dag L_w' ]

    The jump-coefficient matrix W + W'* is positive semidefinite, so the map
    and the generator built from it are of valid GKSL form; its diagonal
    part approaches tau (J + iS) for tau -> infinity, recovering the fully
    secular generator.
    """
    decomp = jump_decomposition(model, group_tol)
    pieces = {}
    for wi, li in zip(decomp.frequencies, decomp.operators):
        lid = li.conj().T
        for wj, lj in zip(decomp.frequencies, decomp.operators):
            w_coef = cg_coeff(bath_params, wj, wi, tau)
            w_swap = cg_coeff(bath_params, wi, wj, tau)
            jump = (w_coef + np.conj(w_swap)) * sandwich(lj, lid)
            lidlj = lid @ lj
            term = jump - w_coef * left_multiply(lidlj) - np.conj(w_swap) * right_multiply(lidlj)
            delta = wi - wj
            key = round(delta, 12)
            pieces[key] = pieces.get(key, 0) + term
    return pieces


def _cgme_matrix(pieces, tau, t):
    gen = np.zeros((16, 16), dtype=complex)
    for delta, term in pieces.items():
        gen += np.exp(1j * delta * t) * term
    return gen / tau


def cgme_generator(model, bath_params, tau_cg, t, group_tol=GROUP_TOL):
    """Coarse-grained GKSL generator in the interaction picture at time t."""
    if tau_cg <= 0:
        raise ValueError("tau_cg must be positive")
    pieces = _zmap_pieces(model, bath_params, tau_cg, group_tol)
    return Superoperator(_cgme_matrix(pieces, tau_cg, t))


def _zmap_matrix(model, bath_params, t, group_tol):
    """The accumulated coarse-graining map exponent Z_t (window [0, t])."""
    if t == 0.0:
        return np.zeros((16, 16), dtype=complex)
    pieces = _zmap_pieces(model, bath_params, t, group_tol)
    return sum(pieces.values())


def expz_map(model, bath_params, t, group_tol=GROUP_TOL):
    """Completely positive interaction-picture map exp(Z_t)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return Superoperator(expm(_zmap_matrix(model, bath_params, t, group_tol)))


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

def _interaction_frame_superop(model, t):
    """Superoperator of rho_int -> U rho_int U^dag with U = e^{-iHt}."""
    phases = np.exp(-1j * model.eigvals * t)
    u = (model.eigvecs * phases) @ model.eigvecs.conj().T
    return np.kron(u.conj(), u)


def _step_constant(gen, lam0, times, step_cache):
    """Advance a propagator matrix under a constant generator."""
    out = np.empty((len(times), 16, 16), dtype=complex)
    out[0] = lam0
    diffs = np.diff(times)
    uniform = diffs.size > 0 and np.allclose(diffs, diffs[0], rtol=1e-9, atol=0.0)
    lam = lam0
    h_uniform = (times[-1] - times[0]) / (len(times) - 1) if uniform else None
    for k, dt in enumerate(diffs, start=1):
        # quantized cache keys keep fp jitter in the grid from defeating the cache
        h = float(f"{h_uniform if uniform else float(dt):.12e}")
        phi = step_cache.get(h)
        if phi is None:
            phi = expm(gen * h)
            step_cache[h] = phi
        lam = phi @ lam
        out[k] = lam
    return out


def _integrate_propagator(rhs_matrix, lam0, times, rtol, atol):
    """Integrate d Lambda/dt = M(t) Lambda on the given grid."""
    def rhs(t, y):
        return (rhs_matrix(t) @ y.reshape(16, 16)).reshape(-1)

    y = engine.integrate(rhs, lam0.reshape(-1), times, rtol=rtol, atol=atol)
    return y.reshape(len(times), 16, 16)


def propagator_trajectory(gspec, model, bath_params, times, rtol=1e-9, atol=1e-12):
    """Schroedinger-picture propagator matrices Lambda(t_k) on the grid.

    ``times`` must be ascending and start at 0. Columns of Lambda(t) are the
    evolved column-stacked basis operators, so one call serves any number of
    initial conditions.
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly ascending and start at 0")
    eye = np.eye(16, dtype=complex)
    method = gspec.method

    if method in (Method.QOME, Method.PRWA, Method.RFE_AC):
        if method is Method.QOME:
            gen = qome_generator(model, bath_params, gspec.group_tol).matrix
        elif method is Method.PRWA:
            gen = prwa_generator(model, bath_params, gspec.cluster_tol, gspec.group_tol).matrix
        else:
            gen = _rfe_matrix(model, bath_params, 0.0, "ac", gspec.group_tol)
        return _step_constant(gen, eye, times, {})

    if method is Method.RFE_TDC:
        return _rfe_tdc_propagators(gspec, model, bath_params, times, rtol, atol)

    if method is Method.CGME:
        pieces = _zmap_pieces(model, bath_params, gspec.tau_cg, gspec.group_tol)
        lam_int = _integrate_propagator(lambda t: _cgme_matrix(pieces, gspec.tau_cg, t),
                                        eye, times, rtol, atol)
        return np.array([_interaction_frame_superop(model, t) @ lam
                         for t, lam in zip(times, lam_int)])

    if method is Method.EXPZ:
        out = np.empty((len(times), 16, 16), dtype=complex)
        for k, t in enumerate(times):
            lam_int = expm(_zmap_matrix(model, bath_params, t, gspec.group_tol))
            out[k] = _interaction_frame_superop(model, t) @ lam_int
        return out

    raise ValueError(f"unknown method {method}")


def _rfe_tdc_propagators(gspec, model, bath_params, times, rtol, atol):
    """Finite-time-coefficient relaxation propagator.

    Adaptive integration while the coefficients still move, exponential
    stepping with the (then numerically identical) asymptotic generator
    afterwards.
    """
    freqs, a_parts, b_parts, comm = _rfe_pieces(model, gspec.group_tol)
    t_settle = TDC_SETTLING_FACTOR / bath_params.gamma

    def gen_at(t):
        coeffs = redfield_coeff(bath_params, freqs, t)
        return (comm + np.tensordot(coeffs, a_parts, axes=(0, 0))
                + np.tensordot(coeffs.conj(), b_parts, axes=(0, 0)))

    eye = np.eye(16, dtype=complex)
    if bath_params.eta == 0.0 or times[-1] <= t_settle:
        return _integrate_propagator(gen_at, eye, times, rtol, atol)

    n_early = int(np.searchsorted(times, t_settle, side="right"))
    if times[n_early - 1] == t_settle:
        early = times[:n_early]
    else:
        early = np.concatenate([times[:n_early], [t_settle]])
    lam_early = _integrate_propagator(gen_at, eye, early, rtol, atol)

    gen_ac = _rfe_matrix(model, bath_params, 0.0, "ac", gspec.group_tol)
    tail_times = np.concatenate([[t_settle], times[n_early:]])
    lam_tail = _step_constant(gen_ac, lam_early[-1], tail_times, {})

    return np.concatenate([lam_early[:n_early], lam_tail[1:]], axis=0)


def apply_propagators(lams, rho0):
    """Apply a stack of propagator matrices to one initial operator."""
    v = lams @ vectorize(np.asarray(rho0, dtype=complex))
    return v.reshape(len(lams), 4, 4).transpose(0, 2, 1)


def propagate(gspec, model, bath_params, rho0, times, rtol=1e-9, atol=1e-12):
    """Schroedinger-picture trajectory of one Hermitian initial operator.

    ``rho0`` need not be positive (Pauli-basis inputs are allowed), only
    Hermitian; ``times`` must ascend from 0.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (4, 4):
        raise ValueError(f"rho0 must be 4x4, got {rho0.shape}")
    if hs_norm(rho0 - rho0.conj().T) > 1e-9 * max(1.0, hs_norm(rho0)):
        raise ValueError("rho0 must be Hermitian")
    lams = propagator_trajectory(gspec, model, bath_params, times, rtol, atol)
    states = apply_propagators(lams, rho0)
    if not np.all(np.isfinite(states)):
        raise engine.IntegrationError("propagation produced non-finite values")
    return Trajectory(times=np.asarray(times, dtype=float), states=states)


# ---------------------------------------------------------------------------
# GKSL structure checks
# ---------------------------------------------------------------------------

def choi_matrix(superop):
    """Choi matrix of a superoperator (column-stacking convention)."""
    m = superop.matrix if isinstance(superop, Superoperator) else np.asarray(superop)
    n = int(round(np.sqrt(m.shape[0])))
    return m.reshape(n, n, n, n).transpose(3, 1, 2, 0).reshape(n * n, n * n)


def _projected_choi(superop):
    m = superop.matrix if isinstance(superop, Superoperator) else np.asarray(superop)
    n = int(round(np.sqrt(m.shape[0])))
    c = choi_matrix(m)
    omega = vectorize(np.eye(n, dtype=complex)) / np.sqrt(n)
    proj = np.eye(n * n, dtype=complex) - np.outer(omega, omega.conj())
    pcp = proj @ c @ proj
    return 0.5 * (pcp + pcp.conj().T)


def dissipative_eigenvalues(superop):
    """Spectrum of the dissipative (Choi-projected) part of a generator.

    A Hermiticity- and trace-preserving generator is of GKSL form exactly
    when these eigenvalues are all non-negative.
    """
    return np.linalg.eigvalsh(_projected_choi(superop))


def kossakowski_matrix(superop, operators):
    """Kossakowski matrix of a generator over the given jump-operator basis.

    Solves P C P = sum_kl K_kl |vec B_l> <vec B_k| in the (not necessarily
    orthonormal) span of ``operators``; for the fully secular generator over
    its own jump basis this is diag(2 J(w)).
    """
    pcp = _projected_choi(superop)
    v = np.column_stack([vectorize(op) for op in operators])
    gram = v.conj().T @ v
    m = v.conj().T @ pcp @ v
    k = np.linalg.solve(gram, np.linalg.solve(gram, m.conj().T).conj().T)
    return 0.5 * (k + k.conj().T)
