"""One-hot peptide features and Hamiltonian-evolution state preparation."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .quantum_core import (
    PauliObservable,
    PauliString,
    _apply_pauli_rotation,
    zero_state,
)

AMINO_ACIDS = tuple("ACDEFGHIKLMNPQRSTVWY")


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class EncodingConfig:
    n_qubits: int = 8
    max_len: int = 65
    evolution_time: float = 1.0
    trotter_steps: int = 64
    alphabet: tuple = field(default=AMINO_ACIDS)

    def __post_init__(self):
        if not 2 <= self.n_qubits <= 12:
            raise EncodingError(f"n_qubits must be in [2, 12], got {self.n_qubits}")
        if self.trotter_steps < 1:
            raise EncodingError("trotter_steps must be >= 1")
        if self.max_len < 1:
            raise EncodingError("max_len must be >= 1")
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        if len(self.alphabet) != 20 or len(set(self.alphabet)) != 20:
            raise EncodingError("alphabet must hold 20 distinct residues")

    @property
    def feature_dim(self) -> int:
        return len(self.alphabet) * self.max_len

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alphabet"] = "".join(self.alphabet)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EncodingConfig":
        d = dict(d)
        if "alphabet" in d:
            d["alphabet"] = tuple(d["alphabet"])
        return cls(**d)


def one_hot_encode(sequence: str, config: EncodingConfig) -> np.ndarray:
    """Flattened ``20 x max_len`` one-hot matrix (rows = residue type, columns = position).

    Positions past the end of the sequence are left as all-zero padding columns.
    """
    if not sequence:
        raise EncodingError("empty sequence")
    if len(sequence) > config.max_len:
        raise EncodingError(f"sequence length {len(sequence)} exceeds max_len {config.max_len}")
    row_of = {aa: i for i, aa in enumerate(config.alphabet)}
    mat = np.zeros((len(config.alphabet), config.max_len))
    for pos, aa in enumerate(sequence):
        if aa not in row_of:
            raise EncodingError(f"non-canonical residue {aa!r} at position {pos}")
        mat[row_of[aa], pos] = 1.0
    return mat.reshape(-1)


def one_hot_matrix(sequences, config: EncodingConfig) -> np.ndarray:
    return np.stack([one_hot_encode(s, config) for s in sequences]) if len(sequences) else \
        np.zeros((0, config.feature_dim))


@lru_cache(maxsize=None)
def build_term_set(n_qubits: int) -> tuple[PauliString, ...]:
    """Single-qubit X, Y, Z on each site, then XX, YY, ZZ on neighbouring sites of an open chain."""
    if n_qubits < 2:
        raise EncodingError("term set needs at least 2 qubits")
    terms = []
    for q in range(n_qubits):
        for p in "XYZ":
            terms.append(PauliString.from_sparse(n_qubits, {q: p}))
    for q in range(n_qubits - 1):
        for p in "XYZ":
            terms.append(PauliString.from_sparse(n_qubits, {q: p, q + 1: p}))
    return tuple(terms)


def fold_features(x, term_count: int) -> np.ndarray:
    """Cyclically fold ``x`` onto ``term_count`` coefficients scaled by ``1 / ceil(L / T)``.

    Works row-wise on 2-D input.
    """
    if term_count < 1:
        raise EncodingError("term_count must be >= 1")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    length = x.shape[1]
    reps = math.ceil(length / term_count)
    padded = np.zeros((x.shape[0], reps * term_count))
    padded[:, :length] = x
    coeffs = padded.reshape(x.shape[0], reps, term_count).sum(axis=1) / reps
    return coeffs[0] if single else coeffs


def hamiltonian_from_features(x, config: EncodingConfig) -> PauliObservable:
    terms = build_term_set(config.n_qubits)
    coeffs = fold_features(x, len(terms))
    return PauliObservable(zip(coeffs, terms))


@lru_cache(maxsize=None)
def _term_actions(n_qubits: int):
    return [p.action() for p in build_term_set(n_qubits)]


def trotter_evolve(coeffs, n_qubits: int, t: float, steps: int) -> np.ndarray:
    """First-order Trotter evolution of ``|0^n>`` under ``sum_s c_s P_s`` for each coefficient row."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    actions = _term_actions(n_qubits)
    if coeffs.shape[1] != len(actions):
        raise EncodingError("coefficient count does not match the term set")
    states = np.tile(zero_state(n_qubits), (coeffs.shape[0], 1))
    angles = coeffs * (t / steps)
    active = [s for s in range(len(actions)) if np.any(angles[:, s])]
    for _ in range(steps):
        for s in active:
            index, phase = actions[s]
            states = _apply_pauli_rotation(states, index, phase, angles[:, s])
    return states


def hamiltonian_encode(x, config: EncodingConfig) -> np.ndarray:
    """``exp(-i H(x) t)|0^n>`` by first-order Trotterization; batched over rows of ``x``."""
    x = np.asarray(x, dtype=float)
    coeffs = fold_features(x, len(build_term_set(config.n_qubits)))
    states = trotter_evolve(coeffs, config.n_qubits, config.evolution_time, config.trotter_steps)
    return states[0] if x.ndim == 1 else states


class HamiltonianEncoder(TransformerMixin, BaseEstimator):
    """Map peptide sequences (or one-hot rows) to Hamiltonian-evolved state vectors.

    Stateless; ``fit`` only validates the configuration.
    """

    def __init__(self, n_qubits=8, max_len=65, evolution_time=1.0, trotter_steps=64):
        self.n_qubits = n_qubits
        self.max_len = max_len
        self.evolution_time = evolution_time
        self.trotter_steps = trotter_steps

    @property
    def config(self) -> EncodingConfig:
        return EncodingConfig(self.n_qubits, self.max_len, self.evolution_time, self.trotter_steps)

    def fit(self, X=None, y=None):
        self.config_ = self.config
        self.n_terms_ = len(build_term_set(self.n_qubits))
        return self

    def _features(self, X) -> np.ndarray:
        if len(X) and isinstance(X[0], str):
            return one_hot_matrix(list(X), self.config)
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.config.feature_dim:
            raise EncodingError(f"expected one-hot rows of width {self.config.feature_dim}")
        return X

    def transform(self, X) -> np.ndarray:
        return hamiltonian_encode(self._features(X), self.config).reshape(len(X), -1)
