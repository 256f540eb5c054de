import numpy as np
import pytest
from hypothesis import given, strategies as st

from qae_peptide.quantum_core import (
    DensityMatrix, PauliObservable, PauliString, QuantumStateError, apply_cnot,
    apply_pauli_exponential, apply_single_qubit_gate, basis_state, dense_evolution_oracle,
    fidelity_pure, partial_trace, partial_trace_dm, projector_zero_probability, random_state,
    ry, trace_distance, zero_state,
)
from qae_peptide.encoding import trotter_evolve
from qae_peptide.verification import dense_partial_trace, dense_projector, embed_gate

X = np.array([[0, 1], [1, 0]], dtype=complex)
PLUS = np.array([1, 1]) / np.sqrt(2)


def dense_expm(h, angle):
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * angle * w)) @ v.conj().T


# Pauli strings -----------------------------------------------------------------------

def test_pauli_string_basics():
    p = PauliString("XIZ")
    assert p.n_qubits == 3 and p.weight == 2 and p.support == (0, 2)
    assert PauliString.from_sparse(3, {1: "Y"}) == PauliString("IYI")
    with pytest.raises(QuantumStateError):
        PauliString("XQ")


@given(st.text(alphabet="IXYZ", min_size=1, max_size=4))
def test_pauli_action_matches_kron_matrix(ops):
    p = PauliString(ops)
    rng = np.random.default_rng(len(ops))
    psi = random_state(p.n_qubits, rng)
    idx, phase = p.action()
    assert np.allclose(phase * psi[idx], p.matrix() @ psi, atol=1e-12)


def test_observable_merges_duplicates():
    obs = PauliObservable([(0.5, "ZI"), (0.25, "ZI"), (1.0, "IX")])
    assert len(obs) == 2
    assert obs.coefficient("ZI") == 0.75
    assert obs.max_weight == 1


# gates ---------------------------------------------------------------------------------

def test_identity_gate_keeps_state(rng):
    psi = random_state(3, rng)
    assert np.allclose(apply_single_qubit_gate(psi, 1, np.eye(2)), psi)


def test_x_flips_zero():
    assert np.allclose(apply_single_qubit_gate(zero_state(1), 0, X), [0, 1])


def test_ry_half_pi():
    out = apply_single_qubit_gate(zero_state(1), 0, ry(np.pi / 2))
    assert np.allclose(out, [np.cos(np.pi / 4), np.sin(np.pi / 4)])


def test_non_unitary_gate_rejected():
    with pytest.raises(QuantumStateError):
        apply_single_qubit_gate(zero_state(1), 0, np.array([[1, 1], [0, 1]]))


def test_cnot_examples():
    assert np.allclose(apply_cnot(basis_state("10"), 0, 1), basis_state("11"))
    assert np.allclose(apply_cnot(basis_state("00"), 0, 1), basis_state("00"))
    sup = (basis_state("00") + basis_state("10")) / np.sqrt(2)
    bell = (basis_state("00") + basis_state("11")) / np.sqrt(2)
    assert np.allclose(apply_cnot(sup, 0, 1), bell)
    with pytest.raises(QuantumStateError):
        apply_cnot(sup, 1, 1)


def test_pauli_exponential_examples(rng):
    psi = random_state(2, rng)
    assert np.allclose(apply_pauli_exponential(psi, PauliString("XZ"), 0.0), psi)
    out = apply_pauli_exponential(zero_state(1), PauliString("X"), np.pi / 2)
    assert np.allclose(out, [0, -1j])


def test_pauli_exponential_matches_dense_expm():
    rng = np.random.default_rng(7)
    psi = random_state(4, rng)
    p = PauliString("IXIY")
    ref = dense_expm(p.matrix(), 0.3) @ psi
    assert np.linalg.norm(apply_pauli_exponential(psi, p, 0.3) - ref) < 1e-10


@given(st.text(alphabet="IXYZ", min_size=3, max_size=3), st.floats(-np.pi, np.pi))
def test_pauli_exponential_inverse(ops, theta):
    psi = random_state(3, np.random.default_rng(3))
    p = PauliString(ops)
    back = apply_pauli_exponential(apply_pauli_exponential(psi, p, theta), p, -theta)
    assert np.allclose(back, psi, atol=1e-12)


@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 3), st.floats(-3, 3)), max_size=20))
def test_norm_preserved_by_gate_sequences(ops):
    psi = random_state(4, np.random.default_rng(11))
    for kind, q, angle in ops:
        if kind == 0:
            psi = apply_single_qubit_gate(psi, q, ry(angle))
        elif kind == 1:
            psi = apply_cnot(psi, q, (q + 1) % 4)
        else:
            psi = apply_pauli_exponential(psi, PauliString.from_sparse(4, {q: "Z"}), angle)
    assert abs(np.linalg.norm(psi) - 1) <= 1e-10


# partial trace -------------------------------------------------------------------------

def test_partial_trace_product_state():
    psi = np.kron([1, 0], PLUS)
    assert np.allclose(partial_trace(psi, [0]).matrix, np.outer(PLUS, PLUS))


@pytest.mark.parametrize("traced", [[0], [1]])
def test_partial_trace_bell_is_maximally_mixed(traced):
    bell = (basis_state("00") + basis_state("11")) / np.sqrt(2)
    assert np.allclose(partial_trace(bell, traced).matrix, np.eye(2) / 2)


def test_partial_trace_matches_index_sum_oracle():
    psi = random_state(3, np.random.default_rng(5))
    rho = np.outer(psi, psi.conj())
    ref = dense_partial_trace(rho, [1], 3)
    assert np.max(np.abs(partial_trace(psi, [1]).matrix - ref)) < 1e-12


@pytest.mark.parametrize("alpha", [0, 0.25, 0.5, 1])
def test_partial_trace_linearity(alpha):
    rng = np.random.default_rng(9)
    a, b = random_state(3, rng), random_state(3, rng)
    ra, rb = np.outer(a, a.conj()), np.outer(b, b.conj())
    mixed = partial_trace_dm(alpha * ra + (1 - alpha) * rb, [2])
    combo = alpha * partial_trace(a, [2]).matrix + (1 - alpha) * partial_trace(b, [2]).matrix
    assert np.max(np.abs(mixed - combo)) < 1e-12
    assert np.allclose(dense_partial_trace(alpha * ra + (1 - alpha) * rb, [2], 3), mixed)


def test_partial_trace_factor_reconstructs_matrix(rng):
    dm = partial_trace(random_state(5, rng), [3, 4])
    assert dm.rank_hint == 4
    assert np.allclose(dm.factor @ dm.factor.conj().T, dm.matrix)
    dm.check()


# distances -------------------------------------------------------------------------------

def test_trace_distance_examples():
    z0 = DensityMatrix.from_state([1, 0])
    z1 = DensityMatrix.from_state([0, 1])
    mixed = DensityMatrix(np.eye(2) / 2)
    assert trace_distance(z0, z0) == pytest.approx(0, abs=1e-15)
    assert trace_distance(z0, z1) == pytest.approx(1)
    assert trace_distance(z0, mixed) == pytest.approx(0.5)


@given(st.integers(0, 10_000))
def test_trace_distance_metric_axioms(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (partial_trace(random_state(4, rng), [3]) for _ in range(3))
    assert abs(trace_distance(a, b) - trace_distance(b, a)) <= 1e-12
    assert trace_distance(a, a) <= 1e-12
    assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-9


def test_fidelity_examples(rng):
    psi = random_state(2, rng)
    assert fidelity_pure(psi, psi) == pytest.approx(1)
    assert fidelity_pure([1, 0], [0, 1]) == pytest.approx(0)
    assert fidelity_pure([1, 0], PLUS) == pytest.approx(0.5)


@given(st.integers(0, 10_000), st.integers(2, 8))
def test_fidelity_gram_is_psd(seed, count):
    rng = np.random.default_rng(seed)
    states = [random_state(3, rng) for _ in range(count)]
    gram = np.array([[fidelity_pure(a, b) for b in states] for a in states])
    assert np.linalg.eigvalsh(gram).min() >= -1e-8


# projector ----------------------------------------------------------------------------

def test_projector_examples():
    assert projector_zero_probability(zero_state(4), [2, 3]) == pytest.approx(1)
    assert projector_zero_probability(basis_state("0001"), [3]) == pytest.approx(0)
    with pytest.raises(QuantumStateError):
        projector_zero_probability(zero_state(2), [])


def test_projector_matches_dense_oracle():
    psi = random_state(6, np.random.default_rng(4))
    ref = np.real(np.vdot(psi, dense_projector({4, 5}, 6) @ psi))
    assert abs(projector_zero_probability(psi, [4, 5]) - ref) < 1e-12


# dense evolution ---------------------------------------------------------------------

def test_dense_evolution_zero_hamiltonian(rng):
    psi = random_state(3, rng)
    assert np.allclose(dense_evolution_oracle(PauliObservable(), 1.0, psi), psi)


def test_dense_evolution_single_x():
    out = dense_evolution_oracle(PauliObservable([(1.0, "X")]), np.pi / 2, zero_state(1))
    assert np.allclose(out, [0, -1j])


def test_dense_evolution_agrees_with_fine_trotter():
    from qae_peptide.encoding import build_term_set
    rng = np.random.default_rng(21)
    terms = build_term_set(5)
    coeffs = np.zeros(len(terms))
    # magnitudes typical of folded one-hot coefficients (count / ceil(L/T))
    coeffs[rng.choice(len(terms), 20, replace=False)] = rng.uniform(-1 / 3, 1 / 3, 20)
    exact = dense_evolution_oracle(PauliObservable(zip(coeffs, terms)), 1.0, zero_state(5))
    assert abs(np.linalg.norm(exact) - 1) < 1e-12
    approx = trotter_evolve(coeffs, 5, 1.0, 4096)[0]
    assert np.linalg.norm(approx - exact) < 1e-4


def test_state_validation():
    with pytest.raises(QuantumStateError):
        apply_cnot(np.array([1, 1, 0]), 0, 1)
    with pytest.raises(QuantumStateError):
        apply_single_qubit_gate(np.array([1, 1, 0, 0]), 0, X)
    with pytest.raises(QuantumStateError):
        DensityMatrix(np.eye(3))


def test_embed_gate_oracle_consistency():
    assert np.allclose(embed_gate(X, 0, 2) @ basis_state("00"), basis_state("10"))
