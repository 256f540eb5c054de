"""
Dense state-vector primitives.

States are plain complex numpy arrays of length ``2**n``. Qubit 0 is the most
significant bit of the basis index, so ``|q0 q1 ... q_{n-1}>`` maps to index
``q0 * 2**(n-1) + ... + q_{n-1}``. Functions prefixed with ``_`` operate on
batches of shape ``(batch, 2**n)`` and skip validation; the public functions
validate their inputs and operate on single states.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NORM_TOL = 1e-10
EIG_TOL = 1e-12
DENSE_MAX_QUBITS = 12

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class QuantumStateError(ValueError):
    """Raised for malformed states, gates or index sets."""


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis, e.g. ``PauliString("XIZ")``."""

    ops: str

    def __post_init__(self):
        ops = self.ops.upper()
        if not ops or set(ops) - set("IXYZ"):
            raise QuantumStateError(f"invalid Pauli string {self.ops!r}")
        object.__setattr__(self, "ops", ops)

    @classmethod
    def from_sparse(cls, n_qubits: int, terms: dict[int, str]) -> "PauliString":
        ops = ["I"] * n_qubits
        for q, p in terms.items():
            if not 0 <= q < n_qubits:
                raise QuantumStateError(f"qubit {q} out of range for n={n_qubits}")
            ops[q] = p
        return cls("".join(ops))

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls("I" * n_qubits)

    @property
    def n_qubits(self) -> int:
        return len(self.ops)

    @property
    def weight(self) -> int:
        return sum(p != "I" for p in self.ops)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, p in enumerate(self.ops) if p != "I")

    def masks(self) -> tuple[int, int]:
        """Bit masks ``(x_mask, z_mask)`` with qubit 0 at the most significant bit."""
        n = self.n_qubits
        x = z = 0
        for q, p in enumerate(self.ops):
            bit = 1 << (n - 1 - q)
            if p in "XY":
                x |= bit
            if p in "ZY":
                z |= bit
        return x, z

    def action(self) -> tuple[np.ndarray, np.ndarray]:
        """Index/phase pair such that ``(P psi)[b] = phase[b] * psi[index[b]]``."""
        n = self.n_qubits
        basis = np.arange(1 << n)
        x, z = self.masks()
        n_y = sum(p == "Y" for p in self.ops)
        source = basis ^ x
        # P|c> = i^{n_y} (-1)^{popcount(c & z)} |c ^ x>
        parity = _popcount(source & z) & 1
        phase = (1j ** n_y) * (1 - 2 * parity)
        return source, phase.astype(complex)

    def matrix(self) -> np.ndarray:
        out = np.array([[1.0 + 0j]])
        for p in self.ops:
            out = np.kron(out, PAULI_MATRICES[p])
        return out

    def __str__(self):
        return self.ops


def _popcount(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    count = np.zeros_like(a)
    while np.any(a):
        count += a & 1
        a = a >> 1
    return count


class PauliObservable:
    """Real linear combination of Pauli strings with merged duplicate keys."""

    def __init__(self, terms: Iterable[tuple[float, PauliString]] = ()):
        merged: dict[PauliString, float] = {}
        n = None
        for coeff, pauli in terms:
            if not isinstance(pauli, PauliString):
                pauli = PauliString(pauli)
            if n is None:
                n = pauli.n_qubits
            elif pauli.n_qubits != n:
                raise QuantumStateError("mixed qubit counts in observable")
            merged[pauli] = merged.get(pauli, 0.0) + float(coeff)
        self._terms = merged
        self.n_qubits = n

    @property
    def terms(self) -> list[tuple[float, PauliString]]:
        return [(c, p) for p, c in self._terms.items()]

    def __len__(self):
        return len(self._terms)

    def coefficient(self, pauli: PauliString | str) -> float:
        if not isinstance(pauli, PauliString):
            pauli = PauliString(pauli)
        return self._terms.get(pauli, 0.0)

    @property
    def max_weight(self) -> int:
        return max((p.weight for p in self._terms), default=0)

    def matrix(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for c, p in self.terms:
            out += c * p.matrix()
        return out

    def expectation(self, state: np.ndarray) -> float:
        state = np.asarray(state, dtype=complex)
        total = 0.0
        for c, p in self.terms:
            idx, ph = p.action()
            total += c * float(np.real(np.vdot(state, ph * state[idx])))
        return total

    def __repr__(self):
        body = " + ".join(f"{c:.4g}*{p}" for c, p in self.terms)
        return f"PauliObservable({body or '0'})"


@dataclass
class DensityMatrix:
    """Density matrix on ``n_qubits`` with an optional low-rank factor.

    ``factor`` (shape ``(dim, r)``) satisfies ``matrix == factor @ factor.conj().T``
    when present; it is metadata used by fast trace-distance routines.
    """

    matrix: np.ndarray
    factor: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        dim = self.matrix.shape[0]
        if self.matrix.shape != (dim, dim) or dim & (dim - 1) or dim == 0:
            raise QuantumStateError(f"bad density matrix shape {self.matrix.shape}")

    @classmethod
    def from_state(cls, state: np.ndarray) -> "DensityMatrix":
        state = np.asarray(state, dtype=complex)
        return cls(np.outer(state, state.conj()), factor=state[:, None])

    @property
    def n_qubits(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank_hint(self) -> int | None:
        return None if self.factor is None else self.factor.shape[1]

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def rank(self, cutoff: float = EIG_TOL) -> int:
        return int(np.sum(self.eigvals() > cutoff))

    def check(self, atol: float = 1e-9) -> None:
        """Raise unless Hermitian, unit trace and positive semidefinite."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > NORM_TOL:
            raise QuantumStateError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > atol:
            raise QuantumStateError(f"density matrix trace {np.trace(m).real} != 1")
        if self.eigvals().min() < -atol:
            raise QuantumStateError("density matrix has negative eigenvalues")


def n_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[-1]
    if dim == 0 or dim & (dim - 1):
        raise QuantumStateError(f"state length {dim} is not a power of two")
    return dim.bit_length() - 1


def check_state(state, n_qubits: int | None = None) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim != 1:
        raise QuantumStateError("expected a 1-D state vector")
    n = n_qubits_of(state)
    if n_qubits is not None and n != n_qubits:
        raise QuantumStateError(f"state has {n} qubits, expected {n_qubits}")
    if abs(np.linalg.norm(state) - 1.0) > NORM_TOL:
        raise QuantumStateError(f"state norm {np.linalg.norm(state)} != 1")
    return state


def zero_state(n_qubits: int) -> np.ndarray:
    state = np.zeros(1 << n_qubits, dtype=complex)
    state[0] = 1.0
    return state


def basis_state(bits: str | Sequence[int]) -> np.ndarray:
    bits = [int(b) for b in bits]
    state = np.zeros(1 << len(bits), dtype=complex)
    state[int("".join(map(str, bits)), 2)] = 1.0
    return state


def random_state(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state."""
    v = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return v / np.linalg.norm(v)


def _check_qubit(q: int, n: int) -> None:
    if not (0 <= int(q) < n):
        raise QuantumStateError(f"qubit index {q} out of range for {n} qubits")


# gates -------------------------------------------------------------------

def rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]])


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _apply_1q(states: np.ndarray, qubit: int, gate: np.ndarray, n: int) -> np.ndarray:
    """Apply a 2x2 ``gate`` (or a batch of them, shape ``(batch, 2, 2)``) to ``qubit``."""
    batch = states.shape[0]
    view = states.reshape(batch, 1 << qubit, 2, 1 << (n - qubit - 1))
    if gate.ndim == 2:
        out = np.einsum("ij,bajc->baic", gate, view)
    else:
        out = np.einsum("bij,bajc->baic", gate, view)
    return out.reshape(batch, -1)


def _cnot_index(control: int, target: int, n: int) -> np.ndarray:
    basis = np.arange(1 << n)
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    return np.where(basis & cbit, basis ^ tbit, basis)


def apply_single_qubit_gate(state, qubit: int, gate) -> np.ndarray:
    """Return ``U_q |state>`` for a 2x2 unitary ``gate`` on ``qubit``."""
    state = check_state(state)
    n = n_qubits_of(state)
    _check_qubit(qubit, n)
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2, 2) or np.max(np.abs(gate.conj().T @ gate - np.eye(2))) > NORM_TOL:
        raise QuantumStateError("gate must be a 2x2 unitary")
    return _apply_1q(state[None], qubit, gate, n)[0]


def apply_cnot(state, control: int, target: int) -> np.ndarray:
    state = check_state(state)
    n = n_qubits_of(state)
    _check_qubit(control, n)
    _check_qubit(target, n)
    if control == target:
        raise QuantumStateError("control and target must differ")
    return state[_cnot_index(control, target, n)]


def _apply_pauli_rotation(states: np.ndarray, index: np.ndarray, phase: np.ndarray,
                          angles) -> np.ndarray:
    """Batched ``exp(-i a P)`` with per-row angles ``a`` (scalar or shape ``(batch,)``)."""
    angles = np.asarray(angles, dtype=float)
    if angles.ndim == 1:
        angles = angles[:, None]
    return np.cos(angles) * states - 1j * np.sin(angles) * (phase * states[:, index])


def apply_pauli_exponential(state, pauli: PauliString, angle: float) -> np.ndarray:
    """Return ``exp(-i angle P)|state> = cos(angle)|state> - i sin(angle) P|state>``."""
    state = check_state(state)
    if pauli.n_qubits != n_qubits_of(state):
        raise QuantumStateError("Pauli string and state sizes differ")
    index, phase = pauli.action()
    return _apply_pauli_rotation(state[None], index, phase, angle)[0]


# reductions ----------------------------------------------------------------

def _kept_and_traced(traced, n: int) -> tuple[list[int], list[int]]:
    traced = sorted({int(q) for q in traced})
    if not traced:
        raise QuantumStateError("traced qubit set is empty")
    for q in traced:
        _check_qubit(q, n)
    if len(traced) == n:
        raise QuantumStateError("cannot trace out every qubit")
    kept = [q for q in range(n) if q not in traced]
    return kept, traced


def _schmidt_factors(states: np.ndarray, traced: Sequence[int], n: int) -> np.ndarray:
    """Factor ``A`` with ``rho_kept = A A^dagger`` for each row, shape ``(batch, 2**k, 2**m)``."""
    kept, traced = _kept_and_traced(traced, n)
    batch = states.shape[0]
    t = states.reshape((batch,) + (2,) * n).transpose([0] + [q + 1 for q in kept + traced])
    return t.reshape(batch, 1 << len(kept), 1 << len(traced))


def partial_trace(state, traced_qubits: Iterable[int]) -> DensityMatrix:
    """Reduced density matrix of a pure state on the qubits not in ``traced_qubits``."""
    state = check_state(state)
    n = n_qubits_of(state)
    a = _schmidt_factors(state[None], list(traced_qubits), n)[0]
    return DensityMatrix(a @ a.conj().T, factor=a)


def partial_trace_dm(rho: np.ndarray, traced_qubits: Iterable[int]) -> np.ndarray:
    """Partial trace of a general (possibly mixed) density matrix."""
    rho = np.asarray(rho, dtype=complex)
    n = n_qubits_of(rho)
    kept, traced = _kept_and_traced(traced_qubits, n)
    t = rho.reshape((2,) * (2 * n))
    perm = kept + traced
    t = t.transpose(perm + [n + q for q in perm])
    k, m = 1 << len(kept), 1 << len(traced)
    return np.einsum("itjt->ij", t.reshape(k, m, k, m))


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the trace norm of ``a - b`` via a Hermitian eigendecomposition."""
    if a.dim != b.dim:
        raise QuantumStateError("density matrices have different dimensions")
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a.matrix - b.matrix))))


def fidelity_pure(a, b) -> float:
    a, b = check_state(a), check_state(b)
    if a.shape != b.shape:
        raise QuantumStateError("states have different dimensions")
    return float(abs(np.vdot(a, b)) ** 2)


def _zero_mask_probability(states: np.ndarray, trash: Sequence[int], n: int) -> np.ndarray:
    mask = 0
    for q in trash:
        mask |= 1 << (n - 1 - q)
    keep = (np.arange(1 << n) & mask) == 0
    return np.sum(np.abs(states[:, keep]) ** 2, axis=1)


def projector_zero_probability(state, trash_qubits: Iterable[int]) -> float:
    """Probability that every qubit in ``trash_qubits`` is measured as 0."""
    state = check_state(state)
    n = n_qubits_of(state)
    trash = sorted({int(q) for q in trash_qubits})
    if not trash:
        raise QuantumStateError("trash qubit set is empty")
    for q in trash:
        _check_qubit(q, n)
    return float(_zero_mask_probability(state[None], trash, n)[0])


def dense_evolution_oracle(hamiltonian: PauliObservable, t: float, initial) -> np.ndarray:
    """Exact ``exp(-i H t)|initial>`` via eigendecomposition of the dense Hamiltonian."""
    initial = check_state(initial)
    n = n_qubits_of(initial)
    if n > DENSE_MAX_QUBITS:
        raise QuantumStateError(f"dense evolution limited to {DENSE_MAX_QUBITS} qubits")
    if hamiltonian.n_qubits is None or len(hamiltonian) == 0:
        return initial.copy()
    if hamiltonian.n_qubits != n:
        raise QuantumStateError("Hamiltonian and state sizes differ")
    evals, evecs = np.linalg.eigh(hamiltonian.matrix())
    return evecs @ (np.exp(-1j * t * evals) * (evecs.conj().T @ initial))
