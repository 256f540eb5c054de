import numpy as np
import pytest
from hypothesis import given, strategies as st

from qae_peptide.encoding import (
    AMINO_ACIDS, EncodingConfig, EncodingError, HamiltonianEncoder, build_term_set, fold_features,
    hamiltonian_encode, hamiltonian_from_features, one_hot_encode, one_hot_matrix, trotter_evolve,
)
from qae_peptide.quantum_core import dense_evolution_oracle, zero_state
from qae_peptide.verification import random_sequences

peptides = st.text(alphabet="".join(AMINO_ACIDS), min_size=1, max_size=12)


def test_one_hot_acd():
    cfg = EncodingConfig(4, 4)
    x = one_hot_encode("ACD", cfg)
    assert x.size == 80 and x.sum() == 3
    mat = x.reshape(20, 4)
    assert mat[0, 0] == mat[1, 1] == mat[2, 2] == 1


def test_one_hot_repeated_residue():
    mat = one_hot_encode("AAAA", EncodingConfig(4, 4)).reshape(20, 4)
    assert np.all(mat[0] == 1) and mat[1:].sum() == 0


@pytest.mark.parametrize("seq", ["", "ACB", "ACDEF"])
def test_one_hot_rejections(seq):
    with pytest.raises(EncodingError):
        one_hot_encode(seq, EncodingConfig(4, 4))


@given(peptides)
def test_one_hot_invariants(seq):
    mat = one_hot_encode(seq, EncodingConfig(4, 12)).reshape(20, 12)
    assert set(np.unique(mat)) <= {0.0, 1.0}
    assert mat.sum() == len(seq)
    assert np.all(mat.sum(axis=0) <= 1)


def test_term_set_two_qubits():
    assert [t.ops for t in build_term_set(2)] == ["XI", "YI", "ZI", "IX", "IY", "IZ", "XX", "YY", "ZZ"]


@pytest.mark.parametrize("n", range(2, 11))
def test_term_set_size_and_locality(n):
    terms = build_term_set(n)
    assert len(terms) == 6 * n - 3
    for t in terms:
        assert t.weight <= 2
        if t.weight == 2:
            a, b = t.support
            assert b == a + 1


def test_fold_examples():
    assert np.all(fold_features(np.zeros(7), 3) == 0)
    x = np.array([1.0, 0, 1, 1])
    assert np.allclose(fold_features(x, 4), x)
    assert np.allclose(fold_features([1, 0, 1, 1, 0], 2), [2 / 3, 1 / 3])


@given(peptides, st.integers(2, 10))
def test_coefficient_bound(seq, n):
    cfg = EncodingConfig(n, 12)
    c = fold_features(one_hot_encode(seq, cfg), 6 * n - 3)
    assert np.max(np.abs(c)) * cfg.evolution_time <= 1.0


def test_zero_input_gives_zero_state():
    cfg = EncodingConfig(4, 3)
    assert np.array_equal(hamiltonian_encode(np.zeros(cfg.feature_dim), cfg), zero_state(4))


def test_single_term_analytic():
    c = 0.7
    coeffs = np.zeros(9)
    coeffs[0] = c                     # X on qubit 0
    out = trotter_evolve(coeffs, 2, 1.0, 64)[0]
    expected = np.zeros(4, complex)
    expected[0], expected[2] = np.cos(c), -1j * np.sin(c)
    assert np.allclose(out, expected, atol=1e-12)


def test_trotter_vs_dense_oracle_and_first_order_scaling():
    rng = np.random.default_rng(0)
    for seq in random_sequences(rng, 20, 12, 8):
        errs = []
        for r in (16, 32, 64, 128):
            cfg = EncodingConfig(6, 12, 1.0, r)
            x = one_hot_encode(seq, cfg)
            exact = dense_evolution_oracle(hamiltonian_from_features(x, cfg), 1.0, zero_state(6))
            errs.append(np.linalg.norm(hamiltonian_encode(x, cfg) - exact))
        assert errs[2] < 1e-2
        assert errs[2] / errs[3] >= 1.8
        assert all(a >= b for a, b in zip(errs, errs[1:]))


def test_batched_matches_single():
    cfg = EncodingConfig(5, 10, 1.0, 16)
    seqs = ["ACDEFG", "WYV", "KLMNPQRS"]
    batch = hamiltonian_encode(one_hot_matrix(seqs, cfg), cfg)
    for row, s in zip(batch, seqs):
        assert np.array_equal(row, hamiltonian_encode(one_hot_encode(s, cfg), cfg))


def test_same_fold_same_state():
    cfg = EncodingConfig(2, 4, 1.0, 8)
    a = one_hot_encode("AC", cfg)
    b = np.roll(a, 9)                 # T = 9: shifting by T keeps every folded coefficient
    assert np.allclose(fold_features(a, 9), fold_features(b, 9))
    assert np.array_equal(hamiltonian_encode(a, cfg), hamiltonian_encode(b, cfg))


@given(peptides)
def test_encoding_deterministic_and_normalized(seq):
    cfg = EncodingConfig(4, 12, 1.0, 8)
    a = hamiltonian_encode(one_hot_encode(seq, cfg), cfg)
    assert np.array_equal(a, hamiltonian_encode(one_hot_encode(seq, cfg), cfg))
    assert abs(np.linalg.norm(a) - 1) < 1e-10


def test_config_validation_and_round_trip():
    cfg = EncodingConfig(6, 20, 0.5, 32)
    assert EncodingConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(EncodingError):
        EncodingConfig(1, 4)
    with pytest.raises(EncodingError):
        EncodingConfig(4, 4, trotter_steps=0)


def test_estimator_api():
    enc = HamiltonianEncoder(n_qubits=3, max_len=6, trotter_steps=8)
    out = enc.fit_transform(["ACD", "WW"])
    assert out.shape == (2, 8)
    assert enc.get_params()["n_qubits"] == 3
    direct = hamiltonian_encode(one_hot_matrix(["ACD", "WW"], enc.config), enc.config)
    assert np.array_equal(out, direct)
