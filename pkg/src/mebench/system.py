"""Two-qubit system with a collective coupling operator.

Builds the Hamiltonian H = (omega_a/2) sx (x) 1 + (omega_b/2) 1 (x) sx and
the coupling L = (sz (x) 1 + 1 (x) sz)/2, its eigendecomposition, the
decomposition of L into transition-frequency components L = sum_w L_w, and
the partial grouping of nearby transition frequencies into clusters.

All matrices are expressed in the product sz basis (uu, ud, du, dd); the
sx eigenvectors are psi_pm = (u pm d)/sqrt(2). Models and decompositions
are immutable after construction.
"""

from dataclasses import dataclass

import numpy as np

from .engine import hs_norm

SIGMA0 = np.eye(2, dtype=complex)
SIGMAX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMAY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMAZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI = (SIGMA0, SIGMAX, SIGMAY, SIGMAZ)

#: Default tolerance for merging numerically equal transition frequencies.
GROUP_TOL = 1e-9

#: Matrix norms below this are treated as vanishing jump components.
_DROP_TOL = 1e-12


def pauli_product(alpha, beta):
    """Two-qubit Pauli basis element sigma_alpha (x) sigma_beta."""
    return np.kron(PAULI[alpha], PAULI[beta])


@dataclass(frozen=True)
class SystemParams:
    """Qubit frequencies in units of the reference frequency.

    The canonical detuned case is (1, 0.95), the resonant one (1, 1).
    """

    omega_a: float = 1.0
    omega_b: float = 0.95

    def __post_init__(self):
        if not (np.isfinite(self.omega_a) and np.isfinite(self.omega_b)):
            raise ValueError("qubit frequencies must be finite")


@dataclass(frozen=True)
class SystemModel:
    params: SystemParams
    hamiltonian: np.ndarray
    coupling: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray


def build_model(params):
    """Assemble the two-qubit model and attach its eigendecomposition."""
    h = 0.5 * params.omega_a * np.kron(SIGMAX, SIGMA0) + 0.5 * params.omega_b * np.kron(SIGMA0, SIGMAX)
    coupling = 0.5 * (np.kron(SIGMAZ, SIGMA0) + np.kron(SIGMA0, SIGMAZ))
    eigvals, eigvecs = np.linalg.eigh(h)
    return SystemModel(params=params, hamiltonian=h, coupling=coupling,
                       eigvals=eigvals, eigvecs=eigvecs)


def _split_sorted(values, tol):
    """Single-linkage grouping of sorted 1-d values: split at gaps > tol."""
    groups = []
    start = 0
    for k in range(1, len(values) + 1):
        if k == len(values) or values[k] - values[k - 1] > tol:
            groups.append(slice(start, k))
            start = k
    return groups


@dataclass(frozen=True)
class JumpDecomposition:
    """Components of the coupling operator at its transition frequencies.

    ``operators[k]`` lowers the system energy by ``frequencies[k]`` (raises
    it for negative entries); the set is closed under (w, L_w) ->
    (-w, L_w^dagger) and sums back to the coupling operator.
    """

    frequencies: np.ndarray
    operators: np.ndarray
    coupling: np.ndarray
    group_tol: float

    def __len__(self):
        return len(self.frequencies)

    def operator(self, omega):
        """Component at the given frequency (within the grouping tolerance)."""
        idx = np.nonzero(np.abs(self.frequencies - omega) <= max(self.group_tol, 1e-12))[0]
        if idx.size != 1:
            raise KeyError(f"no unique jump component at omega = {omega}")
        return self.operators[idx[0]]


def jump_decomposition(model, group_tol=GROUP_TOL):
    """Decompose the coupling operator over transition frequencies.

    Eigenvalue differences are merged within ``group_tol`` (finite precision
    makes exact-degeneracy bookkeeping meaningless); components with
    vanishing matrix norm are dropped. Raises if two retained frequencies
    end up closer than twice the grouping tolerance, since the grouping is
    then ambiguous.
    """
    if group_tol <= 0:
        raise ValueError("group_tol must be positive")
    e = model.eigvals
    v = model.eigvecs
    l_eig = v.conj().T @ model.coupling @ v

    pairs = [(e[j] - e[i], i, j) for i in range(4) for j in range(4)]
    pairs.sort(key=lambda p: p[0])
    values = np.array([p[0] for p in pairs])

    freqs = []
    ops = []
    for sl in _split_sorted(values, group_tol):
        members = pairs[sl]
        block = np.zeros((4, 4), dtype=complex)
        for _, i, j in members:
            block[i, j] = l_eig[i, j]
        op = v @ block @ v.conj().T
        if hs_norm(op) <= _DROP_TOL:
            continue
        freqs.append(float(np.mean([m[0] for m in members])))
        ops.append(op)

    freqs = np.array(freqs)
    if len(freqs) > 1:
        gaps = np.diff(freqs)
        if np.any(gaps < 2 * group_tol):
            raise ValueError(
                f"ambiguous frequency grouping: retained frequencies closer than "
                f"{2 * group_tol:.3e} (gaps {gaps})"
            )
    return JumpDecomposition(frequencies=freqs, operators=np.array(ops),
                             coupling=model.coupling, group_tol=group_tol)


def interaction_picture_L(decomp, t):
    """Coupling operator in the interaction picture, sum_w e^(-i w t) L_w."""
    phases = np.exp(-1j * decomp.frequencies * t)
    return np.tensordot(phases, decomp.operators, axes=(0, 0))


@dataclass(frozen=True)
class Cluster:
    omega_bar: float
    members: np.ndarray
    operator: np.ndarray


@dataclass(frozen=True)
class FrequencyClustering:
    """Partition of the jump frequencies into clusters of nearby ones."""

    clusters: tuple
    cluster_tol: float

    def __len__(self):
        return len(self.clusters)

    @property
    def frequencies(self):
        return np.array([c.omega_bar for c in self.clusters])

    @property
    def operators(self):
        return np.array([c.operator for c in self.clusters])


def cluster_frequencies(decomp, cluster_tol):
    """Group jump frequencies within ``cluster_tol`` (single linkage).

    Each cluster is represented by the arithmetic mean of its members and
    carries the summed jump operator; ``cluster_tol = 0`` leaves every
    frequency in its own cluster.
    """
    if cluster_tol < 0:
        raise ValueError("cluster_tol must be >= 0")
    order = np.argsort(decomp.frequencies)
    freqs = decomp.frequencies[order]
    ops = decomp.operators[order]
    clusters = []
    for sl in _split_sorted(freqs, cluster_tol):
        members = freqs[sl]
        clusters.append(Cluster(
            omega_bar=float(np.mean(members)),
            members=members.copy(),
            operator=ops[sl].sum(axis=0),
        ))
    return FrequencyClustering(clusters=tuple(clusters), cluster_tol=cluster_tol)
