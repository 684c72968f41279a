"""Assessment machinery: error bounds, positivity tracking, scaling fits.

The central quantity is an initial-state independent error bound: each of
the 16 two-qubit Pauli products is propagated under the exact reference and
under an approximate method, the per-component deviations

    eps_ab(t) = |Lambda_ref(t) - Lambda_M(t)) sigma_a (x) sigma_b| / 4

are summed and maximized over the propagation window. Because any state has
Bloch-tensor coefficients bounded by one, the result bounds the deviation
for arbitrary initial states. Alongside, a physical initial state (spin-up
pair) yields relative errors and the minimum-eigenvalue track used to flag
positivity violations.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import masters, pseudomode
from .engine import Trajectory, vectorize
from .pseudomode import PseudoModeConfig
from .system import build_model, pauli_product

#: A trajectory whose smallest eigenvalue dips below this threshold is
#: flagged as positivity violating (slack absorbs numerical error).
POSITIVITY_THRESHOLD = -1e-8

#: All 16 (alpha, beta) Pauli labels.
PAULI_LABELS = tuple(itertools.product(range(4), range(4)))

#: |up, up> projector in the product sz basis.
UPUP = np.zeros((4, 4), dtype=complex)
UPUP[0, 0] = 1.0


def pauli_label_index(alpha, beta):
    if not (0 <= alpha <= 3 and 0 <= beta <= 3):
        raise ValueError("Pauli labels run from 0 to 3")
    return 4 * alpha + beta


def _check_grids(ref, approx):
    if len(ref.times) != len(approx.times) or not np.allclose(ref.times, approx.times):
        raise ValueError("trajectories live on different time grids")


def partial_deviation(ref, approx):
    """Per-time deviation |ref - approx|/4 between two Pauli-seeded runs."""
    _check_grids(ref, approx)
    return 0.25 * np.linalg.norm(ref.states - approx.states, axis=(1, 2))


def error_bound_series(ref_stack, approx_stack):
    """Summed partial deviations over all 16 labels, per grid time."""
    ref_stack = np.asarray(ref_stack)
    approx_stack = np.asarray(approx_stack)
    if ref_stack.shape != approx_stack.shape or ref_stack.shape[0] != 16:
        raise ValueError("expected matching stacks of 16 Pauli-seeded trajectories")
    dev = 0.25 * np.linalg.norm(ref_stack - approx_stack, axis=(2, 3))
    return dev.sum(axis=0)


def error_bound(ref_stack, approx_stack):
    """Initial-state independent bound: max over time of the summed deviations."""
    return float(error_bound_series(ref_stack, approx_stack).max())


def relative_error(ref, approx):
    """Relative deviation |ref - approx| / |ref| per time, and its maximum."""
    _check_grids(ref, approx)
    num = np.linalg.norm(ref.states - approx.states, axis=(1, 2))
    den = np.linalg.norm(ref.states, axis=(1, 2))
    if np.any(den == 0):
        raise ValueError("reference trajectory has vanishing norm")
    series = num / den
    return series, float(series.max())


def min_eigenvalue_track(traj):
    """Smallest eigenvalue per grid time, its overall minimum, and the flag."""
    states = 0.5 * (traj.states + traj.states.conj().transpose(0, 2, 1))
    series = np.linalg.eigvalsh(states)[:, 0]
    minimum = float(series.min())
    return series, minimum, bool(minimum < POSITIVITY_THRESHOLD)


def observables(traj):
    """Expectation values of 1 (x) sz and sz (x) sz along a trajectory."""
    local = pauli_product(0, 3)
    nonlocal_zz = pauli_product(3, 3)
    loc = np.einsum("tij,ji->t", traj.states, local).real
    corr = np.einsum("tij,ji->t", traj.states, nonlocal_zz).real
    return loc, corr


def tau_averaged_reference(traj, model, tau):
    """Sliding average of the reference over the coarse-graining window.

    <rho(t)>_tau = (1/min(t, tau)) int_{t-min(t,tau)}^{t} rho_int(s) ds,
    accumulated trapezoidally in the interaction picture and transformed
    back; the t = 0 entry is the initial state itself. Requires the grid to
    resolve the window (step <= tau/10).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    times = traj.times
    h = np.diff(times)
    if np.any(h > tau / 10):
        raise ValueError("time grid too coarse for the averaging window (need step <= tau/10)")

    phases = np.exp(1j * np.outer(times, model.eigvals))
    v = model.eigvecs
    vd = v.conj().T

    def unitary(k):
        # e^{+iHt_k}, mapping Schroedinger states into the interaction picture
        return (v * phases[k]) @ vd

    rho_int = np.empty_like(traj.states)
    for k, state in enumerate(traj.states):
        u = unitary(k)
        rho_int[k] = u @ state @ u.conj().T

    cumulative = np.zeros_like(rho_int)
    np.cumsum(0.5 * (rho_int[1:] + rho_int[:-1]) * h[:, None, None], axis=0,
              out=cumulative[1:])

    def cumulative_at(t):
        # trapezoid-consistent integral over [0, t] for t between grid points
        k = int(np.searchsorted(times, t, side="right")) - 1
        k = min(max(k, 0), len(times) - 2)
        frac = (t - times[k]) / (times[k + 1] - times[k])
        val = rho_int[k] + frac * (rho_int[k + 1] - rho_int[k])
        return cumulative[k] + 0.5 * (rho_int[k] + val) * (t - times[k])

    out = np.empty_like(traj.states)
    out[0] = traj.states[0]
    for k in range(1, len(times)):
        t = times[k]
        window = min(t, tau)
        integral = cumulative[k] - cumulative_at(t - window)
        u = unitary(k)
        out[k] = u.conj().T @ (integral / window) @ u
    return Trajectory(times=times, states=out)


def fit_scaling(x, y):
    """Least-squares slope of log(y) versus log(x).

    Requires at least 4 strictly positive samples spanning 1.5 decades or
    more, as narrower fits say nothing about a power law.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 4:
        raise ValueError("need at least 4 points for a scaling fit")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("scaling fits need strictly positive data")
    if np.log10(x.max() / x.min()) < 1.5:
        raise ValueError("scaling fits need at least 1.5 decades of range")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# per-point assessment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorRecord:
    """Error measures of one method at one environment point."""

    method: str
    eta: float
    gamma: float
    epsilon_bound: float
    rel_err_max: float
    min_eig: float
    t_max: float
    d: int

    @property
    def positivity_flag(self):
        return self.min_eig < POSITIVITY_THRESHOLD


@dataclass(frozen=True)
class ReferenceBundle:
    """Converged exact-reference context for one environment point."""

    model: object
    bath: object
    d: int
    p_inf: np.ndarray
    t_max: float
    propagator: object


def prepare_reference(sys_params, bath_params, cfg=PseudoModeConfig(), rho0=None):
    """Converge the truncation and the horizon for one environment point."""
    model = build_model(sys_params)
    d, p_inf = pseudomode.converge_truncation(model, bath_params, cfg)
    pm = pseudomode.build_pseudomode(model, bath_params, d)
    prop = pseudomode.ReferencePropagator(pm)
    rho0 = UPUP if rho0 is None else rho0
    t_max = pseudomode.determine_tmax(pm, p_inf, rho0, cfg, propagator=prop)
    return ReferenceBundle(model=model, bath=bath_params, d=d, p_inf=p_inf,
                           t_max=t_max, propagator=prop)


def reference_states(bundle, rho0s, times):
    """Exact reduced trajectories for a batch of initial operators.

    Returns an array of shape (len(rho0s), len(times), 4, 4).
    """
    prop = bundle.propagator
    v0 = np.column_stack([vectorize(pseudomode.embed_with_vacuum(r, bundle.d))
                          for r in rho0s])
    vstates = prop.trajectory(v0, times)
    n, d, n_t, n_init = prop.pm.dim, bundle.d, len(times), len(rho0s)
    # undo column stacking: vec index (col*n + row) -> [col, row]
    full = vstates.reshape(n_t, n, n, n_init).transpose(0, 2, 1, 3)
    full = full.reshape(n_t, 4, d, 4, d, n_init)
    return np.einsum("taibik->ktab", full)


def method_states(gspec, model, bath_params, rho0s, times, rtol=1e-9, atol=1e-12):
    """Approximate trajectories for a batch of initial operators."""
    lams = masters.propagator_trajectory(gspec, model, bath_params, times, rtol, atol)
    v0 = np.column_stack([vectorize(np.asarray(r, dtype=complex)) for r in rho0s])
    v = lams @ v0
    return v.reshape(len(times), 4, 4, len(rho0s)).transpose(3, 0, 2, 1)


def default_time_grid(t_max, n_times=400, early_window=None, early_points=120):
    """Uniform grid on [0, t_max], optionally densified near t = 0.

    The dense early window resolves transients on the correlation-time
    scale (slippage dips) that a uniform grid would step over. Main-grid
    points inside the window are replaced by the dense ones so that the
    merged grid uses only a handful of distinct step sizes.
    """
    grid = np.linspace(0.0, t_max, n_times)
    if early_window is None or early_window >= t_max:
        return grid
    early = np.linspace(0.0, early_window, early_points, endpoint=False)
    return np.concatenate([early, grid[grid > early[-1]]])


def assess_point(sys_params, bath_params, gspecs, n_times=400, cfg=PseudoModeConfig(),
                 early_window=None, rtol=1e-9, atol=1e-12):
    """Error records of several methods at one environment point.

    Shares the converged reference across methods: 16 Pauli products plus
    the spin-up pair are propagated exactly once under the reference and
    once per method; bounds, relative errors and eigenvalue tracks are read
    off the same trajectories.
    """
    bundle = prepare_reference(sys_params, bath_params, cfg)
    times = default_time_grid(bundle.t_max, n_times, early_window)

    initials = [pauli_product(a, b) for a, b in PAULI_LABELS] + [UPUP]
    ref = reference_states(bundle, initials, times)
    ref_traj_up = Trajectory(times=times, states=ref[16])

    records = []
    for gspec in gspecs:
        approx = method_states(gspec, bundle.model, bath_params, initials, times,
                               rtol, atol)
        eps = error_bound(ref[:16], approx[:16])
        up_traj = Trajectory(times=times, states=approx[16])
        _, rel_max = relative_error(ref_traj_up, up_traj)
        _, min_eig, _ = min_eigenvalue_track(up_traj)
        records.append(ErrorRecord(
            method=gspec.label(), eta=bath_params.eta, gamma=bath_params.gamma,
            epsilon_bound=eps, rel_err_max=rel_max, min_eig=min_eig,
            t_max=bundle.t_max, d=bundle.d,
        ))
    return records, bundle
