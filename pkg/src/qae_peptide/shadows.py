"""
Classical shadows with random local Pauli bases, and truncated Heisenberg
propagation of the trash-register projector through the encoder circuit.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .autoencoder import AnsatzConfig, _chain_index, _qubit_gates
from .quantum_core import (
    PauliObservable,
    PauliString,
    _apply_1q,
    _popcount,
    _zero_mask_probability,
    n_qubits_of,
    random_state,
)

BASES = "XYZ"
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.diag([1, -1j])
# Rotations taking the eigenbasis of X, Y, Z to the computational basis.
_ROTATIONS = (_H, _H @ _SDG, np.eye(2, dtype=complex))
DENSE_PROPAGATION_MAX = 6


@dataclass(frozen=True)
class ShadowConfig:
    n_snapshots: int = 50_000
    groups: int = 10
    seed: int = 0
    epsilon: float = 0.02
    delta: float = 0.1

    def __post_init__(self):
        if not self.n_snapshots >= self.groups >= 1:
            raise ValueError("need n_snapshots >= groups >= 1")


@dataclass
class Snapshots:
    """``bases[s, q]`` in {0, 1, 2} for X, Y, Z; ``outcomes[s, q]`` in {+1, -1}."""

    bases: np.ndarray
    outcomes: np.ndarray

    def __len__(self):
        return len(self.bases)

    def snapshot(self, s: int) -> list[tuple[str, int]]:
        return [(BASES[b], int(o)) for b, o in zip(self.bases[s], self.outcomes[s])]


def expand_projector(trash_qubits, n_qubits: int) -> PauliObservable:
    """``|0><0|`` on ``trash_qubits`` as ``2**-m`` times the sum of all I/Z strings on them."""
    trash = sorted({int(q) for q in trash_qubits})
    if not trash:
        raise ValueError("trash qubit set is empty")
    if trash[-1] >= n_qubits or trash[0] < 0:
        raise ValueError("trash qubit out of range")
    coeff = 0.5 ** len(trash)
    terms = []
    for letters in itertools.product("IZ", repeat=len(trash)):
        terms.append((coeff, PauliString.from_sparse(n_qubits, dict(zip(trash, letters)))))
    return PauliObservable(terms)


def sample_shadows(states, config: ShadowConfig) -> Snapshots:
    """Random-Pauli-basis snapshots.

    ``states`` is one state vector or a batch of rows; with a batch every snapshot
    first picks a row uniformly, i.e. it samples the mixture of the rows.
    """
    states = np.atleast_2d(np.asarray(states, dtype=complex))
    n = n_qubits_of(states)
    rng = np.random.default_rng(config.seed)
    n_snap = config.n_snapshots
    which = rng.integers(len(states), size=n_snap) if len(states) > 1 else np.zeros(n_snap, int)
    bases = rng.integers(3, size=(n_snap, n))
    uniform = rng.random(n_snap)
    outcomes = np.empty((n_snap, n), dtype=np.int8)
    keys = which * (3 ** n) + bases @ (3 ** np.arange(n - 1, -1, -1))
    for key in np.unique(keys):
        rows = np.flatnonzero(keys == key)
        psi = states[which[rows[0]]][None]
        for q in range(n):
            psi = _apply_1q(psi, q, _ROTATIONS[bases[rows[0], q]], n)
        cdf = np.cumsum(np.abs(psi[0]) ** 2)
        idx = np.minimum(np.searchsorted(cdf, uniform[rows] * cdf[-1], side="right"), len(cdf) - 1)
        bits = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
        outcomes[rows] = 1 - 2 * bits
    return Snapshots(bases, outcomes)


def _pauli_codes(p: PauliString) -> np.ndarray:
    return np.array([{"I": -1, "X": 0, "Y": 1, "Z": 2}[c] for c in p.ops])


def single_snapshot_estimates(snapshots: Snapshots, observable: PauliObservable) -> np.ndarray:
    """Per-snapshot unbiased estimates of ``<observable>``."""
    est = np.zeros(len(snapshots))
    for coeff, pauli in observable.terms:
        support = list(pauli.support)
        if not support:
            est += coeff
            continue
        codes = _pauli_codes(pauli)[support]
        match = np.all(snapshots.bases[:, support] == codes, axis=1)
        prod = np.prod(snapshots.outcomes[:, support], axis=1)
        est += coeff * (3.0 ** len(support)) * np.where(match, prod, 0)
    return est


def estimate_observable(snapshots: Snapshots, observable: PauliObservable, groups: int = 1) -> float:
    """Median of the group means of the per-snapshot estimates."""
    est = single_snapshot_estimates(snapshots, observable)
    if groups <= 1:
        return float(est.mean())
    chunks = np.array_split(est, groups)
    return float(np.median([c.mean() for c in chunks]))


def shadow_loss_estimate(states, params, ansatz: AnsatzConfig, config: ShadowConfig) -> tuple[float, float]:
    """Shadow estimate and exact value of the raw loss on the mixture of ``states``.

    Snapshots are taken of the encoder output; the projector is estimated through
    its I/Z expansion.
    """
    from .autoencoder import _as_batch, _forward
    out = _forward(_as_batch(states, ansatz), ansatz.check_params(params), ansatz)
    snaps = sample_shadows(out, config)
    proj = expand_projector(ansatz.trash_qubits, ansatz.n_qubits)
    exact = float(np.mean(_zero_mask_probability(out, ansatz.trash_qubits, ansatz.n_qubits)))
    return estimate_observable(snaps, proj, config.groups), exact


# Pauli-basis bookkeeping ---------------------------------------------------------

def _all_paulis(n: int) -> list[PauliString]:
    return [PauliString("".join(p)) for p in itertools.product("IXYZ", repeat=n)]


def pauli_coefficients(matrix: np.ndarray) -> tuple[list[PauliString], np.ndarray]:
    """Coefficients ``Tr[O P] / 2**n`` for every n-qubit Pauli string."""
    matrix = np.asarray(matrix, dtype=complex)
    n = n_qubits_of(matrix)
    basis = np.arange(1 << n)
    paulis = _all_paulis(n)
    coeffs = np.empty(len(paulis))
    for k, p in enumerate(paulis):
        idx, phase = p.action()
        # (P)_{b, idx[b]} = phase[b]  =>  Tr[O P] = sum_b O[idx[b], b] * phase[b]
        coeffs[k] = np.real(np.sum(matrix[idx, basis] * phase)) / (1 << n)
    return paulis, coeffs


def pauli_2_norm(observable) -> float:
    """``sqrt(sum_P |Tr[O P]|^2)`` over all Pauli strings on the observable's own qubits."""
    matrix = observable.matrix() if isinstance(observable, PauliObservable) else np.asarray(observable)
    n = n_qubits_of(matrix)
    _, coeffs = pauli_coefficients(matrix)
    traces = coeffs * (1 << n)
    return float(np.sqrt(np.sum(traces ** 2)))


def _truncate(matrix: np.ndarray, k: int, weights: np.ndarray, paulis) -> np.ndarray:
    _, coeffs = pauli_coefficients(matrix)
    dim = matrix.shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    for c, p, w in zip(coeffs, paulis, weights):
        if w <= k and c != 0.0:
            out += c * p.matrix()
    return out


def _layer_unitary(params: np.ndarray, ansatz: AnsatzConfig, layer: int) -> np.ndarray:
    n = ansatz.n_qubits
    gates = _qubit_gates(params, ansatz)
    u = np.eye(1 << n, dtype=complex)
    for q in range(n):
        u = _apply_1q(u.T, q, gates[layer, q], n).T
    return u[_chain_index(n)]


def backpropagate_truncated(ansatz: AnsatzConfig, params, observable: PauliObservable | None = None,
                            k: int | None = None) -> PauliObservable:
    """Heisenberg-propagate ``observable`` (default: the trash projector) back through the encoder.

    The last layer is conjugated exactly; after each intermediate layer the
    operator is projected onto Pauli strings of weight ``<= k``; the first layer
    is conjugated exactly again. ``k >= n`` reproduces ``U^dagger O U``.
    """
    n = ansatz.n_qubits
    if n > DENSE_PROPAGATION_MAX:
        raise ValueError(f"dense Pauli propagation is limited to {DENSE_PROPAGATION_MAX} qubits")
    params = ansatz.check_params(params)
    if observable is None:
        observable = expand_projector(ansatz.trash_qubits, n)
    k = n if k is None else k
    op = observable.matrix()
    paulis = _all_paulis(n)
    weights = np.array([p.weight for p in paulis])
    for layer in reversed(range(ansatz.depth)):
        u = _layer_unitary(params, ansatz, layer)
        op = u.conj().T @ op @ u
        if 0 < layer < ansatz.depth - 1:
            op = _truncate(op, k, weights, paulis)
    _, coeffs = pauli_coefficients(op)
    return PauliObservable((c, p) for c, p in zip(coeffs, paulis) if abs(c) > 1e-15)


def exact_heisenberg(ansatz: AnsatzConfig, params, observable: PauliObservable | None = None) -> np.ndarray:
    n = ansatz.n_qubits
    params = ansatz.check_params(params)
    if observable is None:
        observable = expand_projector(ansatz.trash_qubits, n)
    op = observable.matrix()
    for layer in reversed(range(ansatz.depth)):
        u = _layer_unitary(params, ansatz, layer)
        op = u.conj().T @ op @ u
    return op


def truncation_bound(k: int, n_trash: int) -> float:
    """``(2/3)**((k+1)/2)`` times the Pauli-2 norm of the m-qubit zero projector."""
    proj = expand_projector(range(n_trash), n_trash)
    return (2.0 / 3.0) ** ((k + 1) / 2) * pauli_2_norm(proj)


@dataclass
class TruncationReport:
    n: int
    d: int
    m: int
    k: int
    trials: int
    seed: int
    empirical_mean: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.empirical_mean <= self.bound

    @property
    def marginal(self) -> bool:
        """Violation within 10% of the bound: reported, not treated as failure."""
        return not self.passed and self.empirical_mean <= 1.1 * self.bound

    @property
    def failed(self) -> bool:
        return self.empirical_mean > 1.1 * self.bound

    def as_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "m": self.m, "k": self.k, "trials": self.trials,
                "seed": self.seed, "empirical_mean": self.empirical_mean, "bound": self.bound,
                "status": "pass" if self.passed else ("marginal" if self.marginal else "fail")}


def verify_truncation_bound(n: int = 4, d: int = 3, m: int = 1, k: int = 2, trials: int = 100,
                            seed: int = 0) -> TruncationReport:
    """Monte Carlo mean of ``|Tr[(O - O^(k)) rho]|`` over random encoder parameters and pure states."""
    ansatz = AnsatzConfig(n, d, m)
    root = np.random.SeedSequence(seed)
    errors = []
    for child in root.spawn(trials):
        rng = np.random.default_rng(child)
        params = rng.uniform(-np.pi, np.pi, ansatz.n_params)
        rho = random_state(n, rng)
        exact = exact_heisenberg(ansatz, params)
        approx = backpropagate_truncated(ansatz, params, k=k).matrix()
        errors.append(abs(np.real(np.vdot(rho, (exact - approx) @ rho))))
    return TruncationReport(n, d, m, k, trials, seed, float(np.mean(errors)), truncation_bound(k, m))
