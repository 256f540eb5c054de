import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qae_peptide import autoencoder as ae
from qae_peptide.encoding import EncodingConfig, hamiltonian_encode, one_hot_matrix
from qae_peptide.quantum_core import basis_state, random_state, zero_state
from qae_peptide.verification import (
    dense_circuit_unitary, dense_projector, finite_difference_gradient, planted_state_corpus,
)


def random_batch(n, count, seed):
    rng = np.random.default_rng(seed)
    return np.stack([random_state(n, rng) for _ in range(count)])


def test_config_layout():
    cfg = ae.AnsatzConfig(10, 30, 2)
    assert cfg.n_params == 900
    assert cfg.trash_qubits == (8, 9)
    assert cfg.variant_id == "10q-30l-2t"
    assert ae.AnsatzConfig.from_variant("10q-30l-2t") == cfg
    for bad in [(4, 2, 0), (4, 2, 4), (4, -1, 1)]:
        with pytest.raises(ValueError):
            ae.AnsatzConfig(*bad)
    for text in ("8q-10l", "8-10-1", "8q-10l-1tt"):
        with pytest.raises(ValueError):
            ae.AnsatzConfig.from_variant(text)


def test_zero_params_keep_zero_state():
    cfg = ae.AnsatzConfig(5, 3, 1)
    assert np.allclose(ae.ansatz_apply(zero_state(5), np.zeros(cfg.n_params), cfg), zero_state(5))


@given(st.integers(0, 1000))
def test_inverse_round_trip(seed):
    cfg = ae.AnsatzConfig(4, 3, 1)
    rng = np.random.default_rng(seed)
    psi, theta = random_state(4, rng), rng.uniform(-np.pi, np.pi, cfg.n_params)
    back = ae.ansatz_inverse_apply(ae.ansatz_apply(psi, theta, cfg), theta, cfg)
    assert np.max(np.abs(back - psi)) < 1e-12


def test_matches_dense_unitary_oracle():
    cfg = ae.AnsatzConfig(4, 2, 1)
    rng = np.random.default_rng(2)
    theta, psi = rng.uniform(-np.pi, np.pi, cfg.n_params), random_state(4, rng)
    ref = dense_circuit_unitary(theta, cfg) @ psi
    assert np.max(np.abs(ae.ansatz_apply(psi, theta, cfg) - ref)) < 1e-10


def test_loss_examples():
    cfg = ae.AnsatzConfig(3, 2, 1)
    zero = np.zeros(cfg.n_params)
    assert ae.raw_loss(zero_state(3)[None], zero, cfg) == pytest.approx(1)
    assert ae.qae_loss(zero_state(3)[None], zero, cfg) == pytest.approx(0)
    flipped = basis_state("001")
    assert ae.raw_loss(flipped[None], zero, cfg) == pytest.approx(0, abs=1e-15)
    assert ae.qae_loss(flipped[None], zero, cfg) == pytest.approx(1)


def test_loss_matches_dense_projector_oracle():
    cfg = ae.AnsatzConfig(6, 2, 2)
    batch = random_batch(6, 8, 3)
    theta = np.random.default_rng(3).uniform(-np.pi, np.pi, cfg.n_params)
    u, proj = dense_circuit_unitary(theta, cfg), dense_projector({4, 5}, 6)
    ref = np.mean([np.real(np.vdot(u @ s, proj @ (u @ s))) for s in batch])
    assert abs(ae.raw_loss(batch, theta, cfg) - ref) < 1e-12


def test_loss_equals_averaged_density_functional():
    cfg = ae.AnsatzConfig(5, 2, 1)
    batch = random_batch(5, 6, 4)
    theta = np.random.default_rng(4).uniform(-np.pi, np.pi, cfg.n_params)
    rho = np.mean([np.outer(s, s.conj()) for s in batch], axis=0)
    u = dense_circuit_unitary(theta, cfg)
    ref = 1 - np.real(np.trace(dense_projector({4}, 5) @ u @ rho @ u.conj().T))
    assert abs(ae.qae_loss(batch, theta, cfg) - ref) < 1e-10


@given(st.integers(0, 1000))
def test_loss_in_unit_interval(seed):
    cfg = ae.AnsatzConfig(4, 2, 2)
    rng = np.random.default_rng(seed)
    loss = ae.qae_loss(random_batch(4, 3, seed), rng.uniform(-9, 9, cfg.n_params), cfg)
    assert 0.0 <= loss <= 1.0


def single_ry_case(theta):
    # Only the Ry slot of a one-layer, one-trash circuit on |00>; qubit 1 is the trash qubit.
    cfg = ae.AnsatzConfig(2, 1, 1)
    params = np.zeros(cfg.n_params)
    params[4] = theta                 # layer 0, qubit 1, slot 1 (Ry)
    return cfg, params


def test_single_rotation_gradient_examples():
    cfg, p = single_ry_case(0.0)
    batch = zero_state(2)[None]
    assert ae.qae_loss(batch, p, cfg) == pytest.approx(0)
    assert ae.qae_gradient(batch, p, cfg)[4] == pytest.approx(0, abs=1e-15)
    cfg, p = single_ry_case(np.pi / 2)
    assert ae.qae_loss(batch, p, cfg) == pytest.approx(1 - np.cos(np.pi / 4) ** 2)
    assert ae.qae_gradient(batch, p, cfg)[4] == pytest.approx(0.5)


def test_parameter_shift_matches_finite_differences():
    cfg = ae.AnsatzConfig(6, 3, 1)
    batch = random_batch(6, 4, 5)
    theta = np.random.default_rng(5).uniform(-np.pi, np.pi, cfg.n_params)
    fd = finite_difference_gradient(batch, theta, cfg)
    assert np.max(np.abs(ae.qae_gradient(batch, theta, cfg) - fd)) < 1e-6


@given(st.integers(0, 1000))
def test_adjoint_gradient_equals_parameter_shift(seed):
    cfg = ae.AnsatzConfig(4, 2, 1)
    batch = random_batch(4, 3, seed)
    theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, cfg.n_params)
    loss, grad = ae.loss_and_gradient(batch, theta, cfg)
    assert loss == pytest.approx(ae.qae_loss(batch, theta, cfg), abs=1e-14)
    assert np.max(np.abs(grad - ae.qae_gradient(batch, theta, cfg))) < 1e-12


def test_zero_learning_rate_leaves_params():
    cfg = ae.AnsatzConfig(3, 2, 1)
    corpus = random_batch(3, 10, 6)
    theta0 = ae.init_params(cfg, 0)
    theta, log = ae.train(corpus, cfg, ae.TrainConfig(batch_size=10, learning_rate=0.0, epochs=3))
    assert np.array_equal(theta, theta0)
    assert len(log.loss) == 3 and max(log.loss) - min(log.loss) < 1e-15


def test_training_is_bit_reproducible():
    cfg = ae.AnsatzConfig(4, 2, 1)
    corpus = random_batch(4, 40, 7)
    tc = ae.TrainConfig(batch_size=8, epochs=2, seed=3)
    a, la = ae.train(corpus, cfg, tc)
    b, lb = ae.train(corpus, cfg, tc)
    assert np.array_equal(a, b) and la.to_csv() == lb.to_csv()
    assert la.epoch_boundaries == [5, 10]


def test_training_returns_best_logged_parameters():
    cfg = ae.AnsatzConfig(4, 2, 1)
    corpus = random_batch(4, 32, 8)
    seen = []
    tc = ae.TrainConfig(batch_size=32, epochs=6, seed=1)
    theta, log = ae.train(corpus, cfg, tc, on_epoch_end=lambda e, best, h: seen.append(best.copy()))
    # one batch per epoch: the logged loss is the full-corpus loss of the parameters before the step
    assert ae.qae_loss(corpus, theta, cfg) == pytest.approx(min(log.loss), abs=1e-12)
    assert len(seen) == 6


def test_parameter_shift_training_matches_adjoint():
    cfg = ae.AnsatzConfig(3, 2, 1)
    corpus = random_batch(3, 12, 9)
    a, _ = ae.train(corpus, cfg, ae.TrainConfig(batch_size=4, epochs=1))
    b, _ = ae.train(corpus, cfg, ae.TrainConfig(batch_size=4, epochs=1, gradient="parameter_shift"))
    assert np.allclose(a, b, atol=1e-10)


def test_planted_training_small():
    cfg = ae.AnsatzConfig(4, 3, 1)
    corpus, _ = planted_state_corpus(cfg, 200, seed=2)
    theta, log = ae.train(corpus, cfg, ae.TrainConfig(batch_size=16, learning_rate=0.05, epochs=15))
    assert ae.qae_loss(corpus, theta, cfg) < log.loss[0]
    assert max(log.grad_norm) > 1e-3


def test_planted_corpus_has_zero_loss_solution():
    cfg = ae.AnsatzConfig(6, 3, 2)
    corpus, planted = planted_state_corpus(cfg, 50, seed=1)
    assert ae.qae_loss(corpus, planted, cfg) < 1e-12


def test_embed_identity_pipeline():
    enc = EncodingConfig(4, 3)
    cfg = ae.AnsatzConfig(4, 2, 1)
    phi = ae.embed(np.zeros(enc.feature_dim), np.zeros(cfg.n_params), enc, cfg)
    expected = np.zeros((8, 8))
    expected[0, 0] = 1
    assert np.allclose(phi.matrix, expected)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_embedding_axioms_and_rank(m):
    enc = EncodingConfig(8, 12, 1.0, 16)
    cfg = ae.AnsatzConfig(8, 2, m)
    rng = np.random.default_rng(m)
    seqs = ["".join(rng.choice(list("ACDEFGHIKLMNPQRSTVWY"), 10)) for _ in range(20)]
    states = hamiltonian_encode(one_hot_matrix(seqs, enc), enc)
    for dm in ae.embed_states(states, rng.uniform(-np.pi, np.pi, cfg.n_params), cfg):
        dm.check()
        assert dm.dim == 2 ** (8 - m)
        assert dm.rank(1e-9) <= 2 ** m


def test_checkpoint_round_trip(tmp_path):
    cfg = ae.AnsatzConfig(4, 2, 1)
    theta = np.random.default_rng(0).uniform(-np.pi, np.pi, cfg.n_params)
    path = tmp_path / "ck.json"
    ae.save_checkpoint(path, theta, cfg, EncodingConfig(4, 5), seed=3, metadata={"epochs_done": 1})
    loaded = ae.load_checkpoint(path)
    assert np.array_equal(loaded["theta"], theta)
    assert loaded["ansatz"] == cfg and loaded["encoding"] == EncodingConfig(4, 5)
    assert json.loads(path.read_text())["seed"] == 3
    assert not list(tmp_path.glob("*.tmp"))


def test_wrong_param_count_rejected():
    cfg = ae.AnsatzConfig(3, 2, 1)
    with pytest.raises(ValueError):
        ae.ansatz_apply(zero_state(3), np.zeros(5), cfg)


def test_estimator_api():
    model = ae.QuantumAutoencoder(n_qubits=3, depth=2, n_trash=1, batch_size=8, epochs=2)
    states = random_batch(3, 16, 10)
    emb = model.fit(states).transform(states)
    assert len(emb) == 16 and emb[0].dim == 4
    assert 0 <= model.score(states) <= 1
    assert model.get_params()["depth"] == 2
