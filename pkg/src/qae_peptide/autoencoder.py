"""
Variational quantum autoencoder.

The encoder ``U(theta)`` has ``depth`` layers. Each layer applies ``Rz Ry Rz`` to
every qubit and then a chain of CNOTs ``(0->1), (1->2), ...``. The last
``n_trash`` qubits form the trash register; the model is trained to leave them
in ``|0...0>`` and the remaining latent register is the learned representation.
"""
from __future__ import annotations

import json
import logging
import math
import os
import re
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .encoding import EncodingConfig, hamiltonian_encode
from .quantum_core import (
    DensityMatrix,
    _apply_1q,
    _cnot_index,
    _schmidt_factors,
    _zero_mask_probability,
    check_state,
    n_qubits_of,
    ry,
    rz,
)

log = logging.getLogger(__name__)

_HALF_Z = np.diag([-0.5j, 0.5j])
_HALF_Y = -0.5j * np.array([[0, -1j], [1j, 0]])


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class AnsatzConfig:
    n_qubits: int
    depth: int
    n_trash: int = 1

    def __post_init__(self):
        if self.n_qubits < 1 or self.depth < 0:
            raise ValueError("n_qubits must be >= 1 and depth >= 0")
        if not 1 <= self.n_trash < max(self.n_qubits, 2):
            raise ValueError(f"n_trash must satisfy 1 <= m < n, got m={self.n_trash}")

    @property
    def n_params(self) -> int:
        return 3 * self.n_qubits * self.depth

    @property
    def trash_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.n_qubits - self.n_trash, self.n_qubits))

    @property
    def latent_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.n_qubits - self.n_trash))

    @property
    def variant_id(self) -> str:
        return f"{self.n_qubits}q-{self.depth}l-{self.n_trash}t"

    @classmethod
    def from_variant(cls, variant: str) -> "AnsatzConfig":
        match = re.fullmatch(r"(\d+)q-(\d+)l-(\d+)t", variant.strip())
        if match is None:
            raise ValueError(f"variant must look like <n>q-<d>l-<m>t, got {variant!r}")
        return cls(*(int(g) for g in match.groups()))

    def check_params(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float).reshape(-1)
        if params.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {params.size}")
        if not np.all(np.isfinite(params)):
            raise ValueError("parameters must be finite")
        return params


# circuit ---------------------------------------------------------------------

def _qubit_gates(params: np.ndarray, cfg: AnsatzConfig) -> np.ndarray:
    """Merged ``Rz(c) Ry(b) Rz(a)`` per (layer, qubit), shape ``(depth, n, 2, 2)``."""
    p = params.reshape(cfg.depth, cfg.n_qubits, 3)
    a, b, c = p[..., 0], p[..., 1], p[..., 2]
    cb, sb = np.cos(b / 2), np.sin(b / 2)
    ep = np.exp(-0.5j * (a + c))
    em = np.exp(-0.5j * (c - a))
    gates = np.empty(p.shape[:2] + (2, 2), dtype=complex)
    gates[..., 0, 0] = ep * cb
    gates[..., 0, 1] = -em * sb
    gates[..., 1, 0] = np.conj(em) * sb
    gates[..., 1, 1] = np.conj(ep) * cb
    return gates


def _chain_index(n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    for q in range(n - 1):
        idx = idx[_cnot_index(q, q + 1, n)]
    return idx


def _forward(states: np.ndarray, params: np.ndarray, cfg: AnsatzConfig) -> np.ndarray:
    n = cfg.n_qubits
    gates = _qubit_gates(params, cfg)
    chain = _chain_index(n)
    for layer in range(cfg.depth):
        for q in range(n):
            states = _apply_1q(states, q, gates[layer, q], n)
        states = states[:, chain]
    return states


def _inverse(states: np.ndarray, params: np.ndarray, cfg: AnsatzConfig) -> np.ndarray:
    n = cfg.n_qubits
    gates = _qubit_gates(params, cfg)
    unchain = np.argsort(_chain_index(n))
    for layer in reversed(range(cfg.depth)):
        states = states[:, unchain]
        for q in reversed(range(n)):
            states = _apply_1q(states, q, gates[layer, q].conj().T, n)
    return states


def _as_batch(states, cfg: AnsatzConfig) -> np.ndarray:
    states = np.asarray(states, dtype=complex)
    if states.ndim == 1:
        states = states[None]
    if states.ndim != 2 or states.shape[0] == 0:
        raise ValueError("expected a non-empty batch of state vectors")
    if n_qubits_of(states) != cfg.n_qubits:
        raise ValueError(f"states have {n_qubits_of(states)} qubits, ansatz expects {cfg.n_qubits}")
    return states


def ansatz_apply(state, params, config: AnsatzConfig) -> np.ndarray:
    """Apply ``U(params)`` to one state or a batch of row states."""
    params = config.check_params(params)
    single = np.ndim(state) == 1
    if single:
        state = check_state(state)
    out = _forward(_as_batch(state, config), params, config)
    return out[0] if single else out


def ansatz_inverse_apply(state, params, config: AnsatzConfig) -> np.ndarray:
    params = config.check_params(params)
    single = np.ndim(state) == 1
    out = _inverse(_as_batch(state, config), params, config)
    return out[0] if single else out


def ansatz_gate_sequence(params, config: AnsatzConfig) -> list[tuple]:
    """Explicit gate list ``("rz"|"ry", qubit, angle)`` / ``("cnot", c, t)`` in application order."""
    p = config.check_params(params).reshape(config.depth, config.n_qubits, 3)
    ops = []
    for layer in range(config.depth):
        for q in range(config.n_qubits):
            ops += [("rz", q, p[layer, q, 0]), ("ry", q, p[layer, q, 1]), ("rz", q, p[layer, q, 2])]
        ops += [("cnot", q, q + 1) for q in range(config.n_qubits - 1)]
    return ops


# loss & gradients ---------------------------------------------------------------

def raw_loss(batch, params, config: AnsatzConfig) -> float:
    """Mean probability of measuring all trash qubits in 0 (the quantity being maximized)."""
    params = config.check_params(params)
    out = _forward(_as_batch(batch, config), params, config)
    probs = _zero_mask_probability(out, config.trash_qubits, config.n_qubits)
    return float(np.mean(probs))


def qae_loss(batch, params, config: AnsatzConfig) -> float:
    """Training loss ``1 - raw_loss``; lies in [0, 1]."""
    return 1.0 - raw_loss(batch, params, config)


def qae_gradient(batch, params, config: AnsatzConfig) -> np.ndarray:
    """Parameter-shift gradient of :func:`qae_loss`.

    Every parameter drives an ``exp(-i theta G / 2)`` rotation with ``G`` a Pauli,
    so ``[f(theta + pi/2) - f(theta - pi/2)] / 2`` is exact.
    """
    params = config.check_params(params)
    batch = _as_batch(batch, config)
    grad = np.empty_like(params)
    shifted = params.copy()
    for k in range(params.size):
        shifted[k] = params[k] + np.pi / 2
        plus = qae_loss(batch, shifted, config)
        shifted[k] = params[k] - np.pi / 2
        minus = qae_loss(batch, shifted, config)
        shifted[k] = params[k]
        grad[k] = 0.5 * (plus - minus)
    return grad


def loss_and_gradient(batch, params, config: AnsatzConfig) -> tuple[float, np.ndarray]:
    """Training loss and its exact gradient from one forward and one backward sweep.

    Returns the same gradient as :func:`qae_gradient` (up to rounding) at
    ``O(gates)`` instead of ``O(params * gates)`` cost.
    """
    params = config.check_params(params)
    batch = _as_batch(batch, config)
    n, size = config.n_qubits, batch.shape[0]
    gates = _qubit_gates(params, config)
    chain = _chain_index(n)
    unchain = np.argsort(chain)

    inputs = []
    psi = batch
    for layer in range(config.depth):
        for q in range(n):
            inputs.append(psi)
            psi = _apply_1q(psi, q, gates[layer, q], n)
        psi = psi[:, chain]

    mask = 0
    for q in config.trash_qubits:
        mask |= 1 << (n - 1 - q)
    keep = (np.arange(1 << n) & mask) == 0
    raw = float(np.mean(np.sum(np.abs(psi[:, keep]) ** 2, axis=1)))
    lam = np.where(keep, psi, 0)

    p = params.reshape(config.depth, n, 3)
    grad = np.zeros_like(p)
    k = len(inputs)
    for layer in reversed(range(config.depth)):
        lam = lam[:, unchain]
        for q in reversed(range(n)):
            k -= 1
            psi_in = inputs[k]
            lv = lam.reshape(size, 1 << q, 2, -1)
            pv = psi_in.reshape(size, 1 << q, 2, -1)
            m = np.einsum("baic,bajc->ij", lv.conj(), pv)
            a, b, c = p[layer, q]
            d_a = gates[layer, q] @ _HALF_Z
            d_b = rz(c) @ ry(b) @ _HALF_Y @ rz(a)
            d_c = _HALF_Z @ gates[layer, q]
            grad[layer, q] = [np.sum(d * m).real for d in (d_a, d_b, d_c)]
            lam = _apply_1q(lam, q, gates[layer, q].conj().T, n)
    # d(1 - mean p)/dtheta = -(2 / B) Re <lambda| dU |psi>
    return 1.0 - raw, (-2.0 / size) * grad.reshape(-1)


# training ---------------------------------------------------------------------

@dataclass
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 10
    seed: int = 0
    loss_log_stride: int = 1
    gradient: str = "adjoint"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.loss_log_stride < 1:
            raise ValueError("loss_log_stride must be >= 1")
        if self.gradient not in ("adjoint", "parameter_shift"):
            raise ValueError(f"unknown gradient method {self.gradient!r}")


@dataclass
class TrainLog:
    batch_index: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    epoch_boundaries: list = field(default_factory=list)

    def record(self, index: int, loss: float, grad_norm: float) -> None:
        self.batch_index.append(int(index))
        self.loss.append(float(loss))
        self.grad_norm.append(float(grad_norm))

    def to_csv(self) -> str:
        lines = ["global_batch,loss,grad_norm"]
        lines += [f"{i},{l:.17g},{g:.17g}" for i, l, g in
                  zip(self.batch_index, self.loss, self.grad_norm)]
        return "\n".join(lines) + "\n"


class EncodedCorpus:
    """Lazily Hamiltonian-encodes one-hot feature rows when indexed."""

    def __init__(self, features, config: EncodingConfig):
        self.features = np.asarray(features, dtype=float)
        self.config = config

    def __len__(self):
        return len(self.features)

    def __getitem__(self, idx):
        return hamiltonian_encode(np.atleast_2d(self.features[idx]), self.config)


def init_params(config: AnsatzConfig, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-np.pi, np.pi, size=config.n_params)


def train(corpus, ansatz: AnsatzConfig, cfg: TrainConfig, initial_params=None,
          on_epoch_end=None) -> tuple[np.ndarray, TrainLog]:
    """Mini-batch Adam on the training loss.

    ``corpus`` is an array of row states or anything indexable by an index array
    that returns one (e.g. :class:`EncodedCorpus`). Returns the parameters with
    the lowest logged batch loss together with the log.
    """
    n_samples = len(corpus)
    if n_samples == 0:
        raise ValueError("empty training corpus")
    rng = np.random.default_rng(cfg.seed)
    theta = init_params(ansatz, cfg.seed) if initial_params is None \
        else ansatz.check_params(initial_params).copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    history = TrainLog()
    best, best_loss = theta.copy(), math.inf
    step = 0
    n_batches = math.ceil(n_samples / cfg.batch_size)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_samples)
        for b in range(n_batches):
            batch = corpus[order[b * cfg.batch_size:(b + 1) * cfg.batch_size]]
            if cfg.gradient == "adjoint":
                loss, grad = loss_and_gradient(batch, theta, ansatz)
            else:
                loss, grad = qae_loss(batch, theta, ansatz), qae_gradient(batch, theta, ansatz)
            if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
                raise TrainingError(
                    f"non-finite loss/gradient at epoch {epoch} batch {b} ({ansatz.variant_id})")
            if step % cfg.loss_log_stride == 0:
                history.record(step, loss, np.linalg.norm(grad))
                if loss < best_loss:
                    best, best_loss = theta.copy(), loss
            step += 1
            m = cfg.beta1 * m + (1 - cfg.beta1) * grad
            v = cfg.beta2 * v + (1 - cfg.beta2) * grad ** 2
            m_hat = m / (1 - cfg.beta1 ** step)
            v_hat = v / (1 - cfg.beta2 ** step)
            theta = theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
        history.epoch_boundaries.append(step)
        log.debug("epoch %d: last logged loss %.5f", epoch, history.loss[-1])
        if on_epoch_end is not None:
            on_epoch_end(epoch, best, history)
    return best, history


# embeddings --------------------------------------------------------------------

def embedding_factors(states, params, config: AnsatzConfig) -> np.ndarray:
    """Low-rank factors ``A_i`` (``2**(n-m) x 2**m``) with ``phi_i = A_i A_i^dagger``."""
    params = config.check_params(params)
    out = _forward(_as_batch(states, config), params, config)
    return _schmidt_factors(out, config.trash_qubits, config.n_qubits)


def embed_states(states, params, config: AnsatzConfig) -> list[DensityMatrix]:
    factors = embedding_factors(states, params, config)
    return [DensityMatrix(a @ a.conj().T, factor=a) for a in factors]


def embed(x, params, enc: EncodingConfig, ansatz: AnsatzConfig) -> DensityMatrix:
    """Learned feature state: encode, apply ``U(params)``, trace out the trash qubits."""
    if enc.n_qubits != ansatz.n_qubits:
        raise ValueError("encoding and ansatz disagree on n_qubits")
    state = hamiltonian_encode(np.asarray(x, dtype=float), enc)
    return embed_states(state[None], params, ansatz)[0]


# checkpoints -------------------------------------------------------------------

def save_checkpoint(path, params, ansatz: AnsatzConfig, encoding: EncodingConfig | None = None,
                    seed: int | None = None, metadata: dict | None = None) -> None:
    """Write a JSON checkpoint atomically (temp file + rename)."""
    payload = {
        "ansatz": asdict(ansatz),
        "encoding": encoding.to_dict() if encoding is not None else None,
        "seed": seed,
        "metadata": metadata or {},
        "theta": [float(f"{t:.17g}") for t in np.asarray(params, dtype=float)],
    }
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def load_checkpoint(path) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    ansatz = AnsatzConfig(**payload["ansatz"])
    return {
        "ansatz": ansatz,
        "encoding": EncodingConfig.from_dict(payload["encoding"]) if payload["encoding"] else None,
        "seed": payload["seed"],
        "metadata": payload["metadata"],
        "theta": ansatz.check_params(payload["theta"]),
    }


# estimator ---------------------------------------------------------------------

class QuantumAutoencoder(TransformerMixin, BaseEstimator):
    """scikit-learn style wrapper: ``fit`` trains on row states, ``transform`` embeds them.

    ``transform`` returns an object array of :class:`DensityMatrix` so it can be
    fed straight into :func:`qae_peptide.kernels.qae_kernel`.
    """

    def __init__(self, n_qubits=8, depth=10, n_trash=1, batch_size=64, learning_rate=1e-2,
                 epochs=10, seed=0, loss_log_stride=1):
        self.n_qubits = n_qubits
        self.depth = depth
        self.n_trash = n_trash
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed
        self.loss_log_stride = loss_log_stride

    @property
    def ansatz_config(self) -> AnsatzConfig:
        return AnsatzConfig(self.n_qubits, self.depth, self.n_trash)

    def fit(self, X, y=None):
        cfg = TrainConfig(batch_size=self.batch_size, learning_rate=self.learning_rate,
                          epochs=self.epochs, seed=self.seed,
                          loss_log_stride=self.loss_log_stride)
        X = X if isinstance(X, EncodedCorpus) else _as_batch(X, self.ansatz_config)
        self.params_, self.train_log_ = train(X, self.ansatz_config, cfg)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        return np.array(embed_states(X, self.params_, self.ansatz_config), dtype=object)

    def score(self, X, y=None):
        """Mean trash-register zero probability (higher is better)."""
        check_is_fitted(self, "params_")
        return raw_loss(X, self.params_, self.ansatz_config)
