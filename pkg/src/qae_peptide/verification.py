"""
Independent reference computations and the property suites run by ``qae-peptide verify``.

Every oracle here avoids the fast code paths it checks: circuits are rebuilt
from full ``2**n x 2**n`` gate matrices, gradients come from finite
differences, SVM duals from exhaustive active-set enumeration.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from . import autoencoder as ae
from .data import synthesize_corpus
from .encoding import AMINO_ACIDS, EncodingConfig, hamiltonian_encode, \
    hamiltonian_from_features, one_hot_encode, one_hot_matrix
from .kernels import hamiltonian_kernel, qae_kernel
from .quantum_core import PAULI_MATRICES, dense_evolution_oracle, random_state, ry, rz, \
    trace_distance, zero_state
from .shadows import ShadowConfig, shadow_loss_estimate, verify_truncation_bound
from .svm import cross_validate, dual_objective, smo_train


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.value = float(self.value)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: value={self.value:.6g} threshold={self.threshold:.6g} {self.detail}".rstrip()


# dense oracles -------------------------------------------------------------------------

def embed_gate(gate: np.ndarray, qubit: int, n: int) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for q in range(n):
        out = np.kron(out, gate if q == qubit else np.eye(2))
    return out


def cnot_matrix(control: int, target: int, n: int) -> np.ndarray:
    p0 = np.diag([1, 0]).astype(complex)
    p1 = np.diag([0, 1]).astype(complex)
    a = embed_gate(p0, control, n)
    b = embed_gate(p1, control, n) @ embed_gate(PAULI_MATRICES["X"], target, n)
    return a + b


def dense_circuit_unitary(params, ansatz: ae.AnsatzConfig) -> np.ndarray:
    n = ansatz.n_qubits
    u = np.eye(1 << n, dtype=complex)
    for op, a, b in ae.ansatz_gate_sequence(params, ansatz):
        if op == "rz":
            g = embed_gate(rz(b), a, n)
        elif op == "ry":
            g = embed_gate(ry(b), a, n)
        else:
            g = cnot_matrix(a, b, n)
        u = g @ u
    return u


def dense_projector(trash, n: int) -> np.ndarray:
    p = np.array([[1.0 + 0j]])
    for q in range(n):
        p = np.kron(p, np.diag([1, 0]) if q in trash else np.eye(2))
    return p


def dense_zero_probability(state, trash, n: int) -> float:
    return float(np.real(np.vdot(state, dense_projector(set(trash), n) @ state)))


def dense_partial_trace(rho: np.ndarray, traced, n: int) -> np.ndarray:
    """Index-sum partial trace by explicit loops over basis labels."""
    kept = [q for q in range(n) if q not in traced]
    dk = 1 << len(kept)
    out = np.zeros((dk, dk), dtype=complex)
    for i in range(1 << n):
        bi = [(i >> (n - 1 - q)) & 1 for q in range(n)]
        for j in range(1 << n):
            bj = [(j >> (n - 1 - q)) & 1 for q in range(n)]
            if any(bi[q] != bj[q] for q in traced):
                continue
            ki = int("".join(str(bi[q]) for q in kept), 2)
            kj = int("".join(str(bj[q]) for q in kept), 2)
            out[ki, kj] += rho[i, j]
    return out


def finite_difference_gradient(batch, params, ansatz, h: float = 1e-5) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    grad = np.empty_like(params)
    for k in range(params.size):
        e = np.zeros_like(params)
        e[k] = h
        grad[k] = (ae.qae_loss(batch, params + e, ansatz) - ae.qae_loss(batch, params - e, ansatz)) / (2 * h)
    return grad


def brute_force_dual(K, labels, C: float) -> tuple[float, np.ndarray]:
    """Maximize the SVM dual by enumerating which variables sit at 0, at C, or are free.

    For each pattern the free variables solve the stationarity system with the
    equality constraint; the best feasible candidate is the global optimum of
    the (concave) dual.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(labels, dtype=float)
    n = len(y)
    Q = np.outer(y, y) * K
    best, best_alpha = -np.inf, None
    for pattern in itertools.product((0, 1, 2), repeat=n):
        pattern = np.array(pattern)
        alpha = np.where(pattern == 2, C, 0.0)
        free = np.flatnonzero(pattern == 1)
        if free.size:
            fixed = np.flatnonzero(pattern != 1)
            f = free.size
            A = np.zeros((f + 1, f + 1))
            A[:f, :f] = Q[np.ix_(free, free)]
            A[:f, f] = y[free]
            A[f, :f] = y[free]
            rhs = np.concatenate([1.0 - Q[np.ix_(free, fixed)] @ alpha[fixed], [-y[fixed] @ alpha[fixed]]])
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            if np.max(np.abs(A @ sol - rhs)) > 1e-9:
                continue
            alpha[free] = sol[:f]
        if abs(y @ alpha) > 1e-9 or alpha.min() < -1e-12 or alpha.max() > C + 1e-12:
            continue
        obj = dual_objective(alpha, K, y)
        if obj > best:
            best, best_alpha = obj, alpha
    return best, best_alpha


# shared generators -------------------------------------------------------------------------

def random_sequences(rng, count: int, max_len: int, min_len: int = 1) -> list[str]:
    return ["".join(rng.choice(list(AMINO_ACIDS), int(rng.integers(min_len, max_len + 1))))
            for _ in range(count)]


def planted_state_corpus(ansatz: ae.AnsatzConfig, n_states: int = 2000, seed: int = 0,
                         latent_time: float = 0.5, max_len: int = 12):
    """States ``W^dagger (|eta> (x) |0^m>)`` with ``W`` a random instance of the ansatz.

    ``W`` lies in the search space, so the loss can reach exactly zero. The latent
    states ``eta`` are Hamiltonian encodings of planted synthetic peptides on the
    ``n - m`` latent qubits. Returns ``(states, W)``.
    """
    rng = np.random.default_rng(seed)
    planted = rng.uniform(-np.pi, np.pi, ansatz.n_params)
    n_latent = ansatz.n_qubits - ansatz.n_trash
    corpus = synthesize_corpus(n_states, (max(1, max_len - 4), max_len), seed=seed + 1)
    if n_latent >= 2:
        enc = EncodingConfig(n_latent, max_len, latent_time, 16)
        eta = hamiltonian_encode(one_hot_matrix(corpus.sequences, enc), enc)
    else:
        eta = np.stack([random_state(1, rng) for _ in range(n_states)])
    full = np.zeros((n_states, 1 << ansatz.n_qubits), dtype=complex)
    full[:, ::1 << ansatz.n_trash] = eta
    return ae.ansatz_inverse_apply(full, planted, ansatz), planted


# suites ------------------------------------------------------------------------------------------

def suite_gradients(n_configs: int = 20, seed: int = 0, h: float = 1e-5) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_configs):
        n = int(rng.integers(2, 7))
        cfg = ae.AnsatzConfig(n, int(rng.integers(1, 5)), int(rng.integers(1, n)))
        batch = np.stack([random_state(n, rng) for _ in range(3)])
        params = rng.uniform(-np.pi, np.pi, cfg.n_params)
        shift = ae.qae_gradient(batch, params, cfg)
        worst = max(worst, float(np.max(np.abs(shift - finite_difference_gradient(batch, params, cfg, h)))))
    return [Check("parameter-shift vs central differences (max abs)", worst < 1e-6, worst, 1e-6,
                  f"configs={n_configs}")]


def suite_trotter(n_inputs: int = 20, n_qubits: int = 6, steps: int = 64, seed: int = 0,
                  max_len: int = 12, min_len: int = 8) -> list[Check]:
    # Very short peptides can land on mutually commuting terms, where the product
    # formula is exact and the step-doubling ratio is roundoff noise.
    rng = np.random.default_rng(seed)
    enc = EncodingConfig(n_qubits, max_len, 1.0, steps)
    enc2 = EncodingConfig(n_qubits, max_len, 1.0, 2 * steps)
    worst_err, worst_ratio = 0.0, np.inf
    for seq in random_sequences(rng, n_inputs, max_len, min_len):
        x = one_hot_encode(seq, enc)
        exact = dense_evolution_oracle(hamiltonian_from_features(x, enc), 1.0, zero_state(n_qubits))
        e1 = np.linalg.norm(hamiltonian_encode(x, enc) - exact)
        e2 = np.linalg.norm(hamiltonian_encode(x, enc2) - exact)
        worst_err = max(worst_err, e1)
        if e1 > 1e-10:
            worst_ratio = min(worst_ratio, e1 / e2)
    return [
        Check(f"Trotter r={steps} l2 error vs dense exponential (max)", worst_err < 1e-2, worst_err, 1e-2),
        Check("error ratio when r doubles (min)", worst_ratio >= 1.8, worst_ratio, 1.8),
    ]


def suite_embeddings(n_samples: int = 100, n_qubits: int = 8, seed: int = 0,
                     trash_counts=(1, 2, 3)) -> list[Check]:
    rng = np.random.default_rng(seed)
    enc = EncodingConfig(n_qubits, 12, 1.0, 64)
    states = hamiltonian_encode(one_hot_matrix(random_sequences(rng, n_samples, 12), enc), enc)
    checks = []
    for m in trash_counts:
        cfg = ae.AnsatzConfig(n_qubits, 3, m)
        params = rng.uniform(-np.pi, np.pi, cfg.n_params)
        worst_trace, worst_eig, worst_rank = 0.0, 0.0, 0
        for dm in ae.embed_states(states, params, cfg):
            w = np.linalg.eigvalsh(dm.matrix)
            worst_trace = max(worst_trace, abs(np.trace(dm.matrix).real - 1))
            worst_eig = min(worst_eig, w.min())
            worst_rank = max(worst_rank, int(np.sum(w > 1e-9)))
        checks += [
            Check(f"m={m} trace deviation", worst_trace <= 1e-9, worst_trace, 1e-9),
            Check(f"m={m} min eigenvalue", worst_eig >= -1e-9, worst_eig, -1e-9),
            Check(f"m={m} max rank", worst_rank <= 2 ** m, worst_rank, 2 ** m),
        ]
    return checks


def suite_kernel_axioms(seed: int = 0, n_triples: int = 50, n_sets: int = 50) -> list[Check]:
    rng = np.random.default_rng(seed)
    cfg = ae.AnsatzConfig(6, 2, 2)
    params = rng.uniform(-np.pi, np.pi, cfg.n_params)
    states = np.stack([random_state(6, rng) for _ in range(3 * n_triples)])
    emb = ae.embed_states(states, params, cfg)
    K = qae_kernel(emb).values
    diag = float(np.max(np.abs(np.diag(K) - 1)))
    lo, hi = float(K.min()), float(K.max())
    slack = 0.0
    for t in range(n_triples):
        a, b, c = emb[3 * t:3 * t + 3]
        slack = max(slack, trace_distance(a, c) - trace_distance(a, b) - trace_distance(b, c))
    lam = min(hamiltonian_kernel(np.stack([random_state(6, rng) for _ in range(12)])).min_eigenvalue()
              for _ in range(n_sets))
    return [
        Check("QAE kernel diagonal deviation", diag <= 1e-12, diag, 1e-12),
        Check("QAE kernel min entry", lo >= -1e-9, lo, -1e-9),
        Check("QAE kernel max entry", hi <= 1 + 1e-9, hi, 1 + 1e-9),
        Check("triangle inequality violation (max)", slack <= 1e-9, slack, 1e-9),
        Check("Hamiltonian Gram min eigenvalue", lam >= -1e-8, lam, -1e-8),
    ]


def suite_metrics(seed: int = 0) -> list[Check]:
    return suite_embeddings(seed=seed) + suite_kernel_axioms(seed=seed)


def suite_planted(n_qubits: int = 8, depth: int = 10, n_trash: int = 1, n_states: int = 2000,
                  epochs: int = 10, batch_size: int = 64, learning_rate: float = 1e-2,
                  seed: int = 0) -> list[Check]:
    cfg = ae.AnsatzConfig(n_qubits, depth, n_trash)
    corpus, _ = planted_state_corpus(cfg, n_states, seed)
    theta, history = ae.train(corpus, cfg, ae.TrainConfig(batch_size=batch_size,
                                                          learning_rate=learning_rate,
                                                          epochs=epochs, seed=seed + 1))
    final = ae.qae_loss(corpus, theta, cfg)
    return [
        Check("planted corpus training loss at returned parameters", final < 0.05, final, 0.05,
              f"best logged batch loss={min(history.loss):.4g}"),
        Check("logged gradient norm exceeds 1e-3", max(history.grad_norm) > 1e-3,
              max(history.grad_norm), 1e-3),
    ]


def suite_svm_oracle(seed: int = 0, n_instances: int = 20) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        n = int(rng.integers(2, 9))
        X = rng.normal(size=(n, 3))
        K = X @ X.T + 0.1 * np.eye(n)
        y = np.array([1, -1] + list(rng.choice([-1, 1], n - 2)), dtype=float)
        C = float(rng.choice([0.1, 1.0, 10.0]))
        model = smo_train(K, y, C=C, tol=1e-10)
        best, _ = brute_force_dual(K, y, C)
        worst = max(worst, abs(dual_objective(model.alpha, K, y) - best))
    X, y = separable_toy(seed=seed)
    acc = cross_validate(X @ X.T, y, k=5, seed=seed, C=10.0).mean
    return [
        Check("SMO vs brute-force dual objective (max abs)", worst <= 1e-6, worst, 1e-6,
              f"instances={n_instances}"),
        Check("separable toy 5-fold CV accuracy", acc == 1.0, acc, 1.0),
    ]


def separable_toy(n: int = 20, seed: int = 0):
    """Two well-separated Gaussian blobs with a margin, labels +-1."""
    rng = np.random.default_rng(seed)
    y = np.array([1, -1] * (n // 2), dtype=float)
    X = rng.normal(scale=0.3, size=(n, 2))
    X[:, 0] += 2.0 * y
    return X, y


def suite_shadows(n_trials: int = 10, n_qubits: int = 6, n_snapshots: int = 50_000, groups: int = 10,
                  seed: int = 0, batch: int = 8) -> list[Check]:
    rng = np.random.default_rng(seed)
    cfg = ae.AnsatzConfig(n_qubits, 3, 1)
    good, worst = 0, 0.0
    for t in range(n_trials):
        states = np.stack([random_state(n_qubits, rng) for _ in range(batch)])
        params = rng.uniform(-np.pi, np.pi, cfg.n_params)
        est, exact = shadow_loss_estimate(states, params, cfg,
                                          ShadowConfig(n_snapshots, groups, seed * 1000 + t))
        err = abs(est - exact)
        worst = max(worst, err)
        good += err < 0.02
    return [Check("shadow loss estimates within 0.02", good >= 9, good, 9,
                  f"of {n_trials}; worst error={worst:.4g}")]


def suite_truncation(seed: int = 0, trials: int = 100, ks=(2, 3)) -> list[Check]:
    checks = []
    for k in ks:
        rep = verify_truncation_bound(4, 3, 1, k, trials, seed)
        status = rep.as_dict()["status"]
        checks.append(Check(f"truncation k={k}: mean |Tr[(O-O^(k)) rho]| <= bound", not rep.failed,
                            rep.empirical_mean, rep.bound, f"status={status}"))
    return checks


SUITES = {
    "gradients": suite_gradients,
    "trotter": suite_trotter,
    "metrics": suite_metrics,
    "shadows": suite_shadows,
    "truncation": suite_truncation,
    "svm-oracle": suite_svm_oracle,
    "planted": suite_planted,
}


def run_suite(name: str, seed: int = 0) -> tuple[list[Check], float]:
    if name not in SUITES:
        raise KeyError(name)
    start = time.perf_counter()
    checks = SUITES[name](seed=seed)
    return checks, time.perf_counter() - start
