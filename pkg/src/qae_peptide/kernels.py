"""Trace-distance and fidelity Gram matrices, PSD repair and kernel file I/O."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .quantum_core import DensityMatrix, QuantumStateError, trace_distance

QAE = "qae_trace_distance"
HAMILTONIAN = "hamiltonian_fidelity"
KINDS = (QAE, HAMILTONIAN)
PSD_POLICIES = ("none", "clip", "shift")
DEFAULT_POLICY = {QAE: "clip", HAMILTONIAN: "none"}

_MAGIC = b"QAEKERNEL1\n"


class KernelError(ValueError):
    pass


@dataclass
class KernelMatrix:
    values: np.ndarray
    kind: str
    psd_policy: str = "none"
    sample_ids: list = field(default_factory=list)
    col_ids: list | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in KINDS:
            raise KernelError(f"unknown kernel kind {self.kind!r}")
        if self.psd_policy not in PSD_POLICIES:
            raise KernelError(f"unknown psd policy {self.psd_policy!r}")
        if not self.sample_ids:
            self.sample_ids = [str(i) for i in range(self.values.shape[0])]

    @property
    def is_square(self) -> bool:
        return self.col_ids is None

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.values).min())

    def subset(self, rows, cols=None) -> np.ndarray:
        cols = rows if cols is None else cols
        return self.values[np.ix_(rows, cols)]


# trace distance ----------------------------------------------------------------

def _factor(dm: DensityMatrix) -> np.ndarray:
    if dm.factor is not None:
        return dm.factor
    w, v = np.linalg.eigh(dm.matrix)
    keep = w > 1e-14
    return v[:, keep] * np.sqrt(w[keep])


def _pair_distances(fa: np.ndarray, fb: np.ndarray) -> np.ndarray:
    """Trace distances between ``A_i A_i^+`` and ``B_i B_i^+`` for stacked factors.

    With ``[A B] = QR`` the difference ``[A B] diag(I, -I) [A B]^+`` shares its
    nonzero spectrum with the small Hermitian matrix ``R diag(I, -I) R^+``.
    """
    ra = fa.shape[2]
    _, r = np.linalg.qr(np.concatenate([fa, fb], axis=2))
    sign = np.ones(r.shape[2])
    sign[ra:] = -1
    mid = (r * sign[None, None, :]) @ r.conj().transpose(0, 2, 1)
    mid = 0.5 * (mid + mid.conj().transpose(0, 2, 1))
    return 0.5 * np.abs(np.linalg.eigvalsh(mid)).sum(axis=1)


def _check_embeddings(embeddings) -> list[DensityMatrix]:
    embeddings = list(embeddings)
    if not embeddings:
        raise KernelError("no embeddings given")
    for e in embeddings:
        if not isinstance(e, DensityMatrix):
            raise KernelError("trace-distance kernels need DensityMatrix inputs")
    dims = {e.dim for e in embeddings}
    if len(dims) != 1:
        raise KernelError(f"embeddings have mixed dimensions {sorted(dims)}")
    return embeddings


def _stack_factors(embeddings) -> np.ndarray:
    factors = [_factor(e) for e in embeddings]
    rank = max(f.shape[1] for f in factors)
    out = np.zeros((len(factors), factors[0].shape[0], rank), dtype=complex)
    for i, f in enumerate(factors):
        out[i, :, :f.shape[1]] = f
    return out


def trace_distance_matrix(rows, cols=None, method: str = "factor", chunk: int = 20000) -> np.ndarray:
    """Pairwise trace distances; ``method='dense'`` eigendecomposes every full difference matrix."""
    rows = _check_embeddings(rows)
    symmetric = cols is None
    cols = rows if symmetric else _check_embeddings(cols)
    if rows[0].dim != cols[0].dim:
        raise KernelError("row and column embeddings have different dimensions")
    n_r, n_c = len(rows), len(cols)
    out = np.zeros((n_r, n_c))
    if symmetric:
        ii, jj = np.triu_indices(n_r, k=1)
    else:
        ii, jj = (a.ravel() for a in np.meshgrid(np.arange(n_r), np.arange(n_c), indexing="ij"))
    if method == "dense":
        vals = np.array([trace_distance(rows[i], cols[j]) for i, j in zip(ii, jj)])
    elif method == "factor":
        fr = _stack_factors(rows)
        fc = fr if symmetric else _stack_factors(cols)
        vals = np.concatenate([
            _pair_distances(fr[ii[s:s + chunk]], fc[jj[s:s + chunk]])
            for s in range(0, len(ii), chunk)
        ]) if len(ii) else np.zeros(0)
    else:
        raise KernelError(f"unknown method {method!r}")
    out[ii, jj] = vals
    if symmetric:
        out[jj, ii] = vals
    return out


# kernels --------------------------------------------------------------------------

def qae_kernel(embeddings, sample_ids=None, method: str = "factor") -> KernelMatrix:
    """``K_ij = 1 - D(phi_i, phi_j)`` with an exact unit diagonal."""
    dist = trace_distance_matrix(embeddings, method=method)
    values = 1.0 - dist
    np.fill_diagonal(values, 1.0)
    return KernelMatrix(values, QAE, "none", list(sample_ids or []))


def _state_rows(states) -> np.ndarray:
    states = np.asarray(states)
    if states.dtype == object or states.ndim != 2:
        raise KernelError("fidelity kernels need a 2-D array of state vectors")
    return states.astype(complex)


def hamiltonian_kernel(states, sample_ids=None) -> KernelMatrix:
    """``K_ij = |<psi_i|psi_j>|^2`` (noiseless SWAP-test expectation)."""
    s = _state_rows(states)
    values = np.abs(s.conj() @ s.T) ** 2
    values = 0.5 * (values + values.T)
    return KernelMatrix(values, HAMILTONIAN, "none", list(sample_ids or []))


def _kind_of(items) -> str:
    if isinstance(items, np.ndarray) and items.dtype != object:
        return HAMILTONIAN
    items = list(items)
    if items and all(isinstance(x, DensityMatrix) for x in items):
        return QAE
    if items and not any(isinstance(x, DensityMatrix) for x in items):
        return HAMILTONIAN
    raise KernelError("mixed embedding and state inputs")


def cross_kernel(rows, cols, kind: str, row_ids=None, col_ids=None,
                 method: str = "factor") -> KernelMatrix:
    """Rectangular kernel between ``rows`` (e.g. test samples) and ``cols`` (training samples)."""
    if kind not in KINDS:
        raise KernelError(f"unknown kernel kind {kind!r}")
    if _kind_of(rows) != kind or _kind_of(cols) != kind:
        raise KernelError(f"inputs do not match kernel kind {kind!r}")
    if kind == QAE:
        values = 1.0 - trace_distance_matrix(rows, cols, method=method)
    else:
        r, c = _state_rows(rows), _state_rows(cols)
        if r.shape[1] != c.shape[1]:
            raise KernelError("row and column states have different dimensions")
        values = np.abs(r.conj() @ c.T) ** 2
    n_r, n_c = values.shape
    return KernelMatrix(values, kind, "none",
                        list(row_ids or [str(i) for i in range(n_r)]),
                        list(col_ids or [str(i) for i in range(n_c)]))


def psd_repair(K: KernelMatrix, policy: str | None = None) -> KernelMatrix:
    """Make a symmetric kernel positive semidefinite.

    ``clip`` projects onto the PSD cone (zeroes negative eigenvalues, the
    Frobenius-nearest PSD matrix); ``shift`` adds ``|lambda_min| I``; ``none``
    returns the values unchanged.
    """
    policy = DEFAULT_POLICY[K.kind] if policy is None else policy
    if policy not in PSD_POLICIES:
        raise KernelError(f"unknown psd policy {policy!r}")
    if not K.is_square:
        raise KernelError("psd_repair needs a square kernel")
    values = 0.5 * (K.values + K.values.T)
    if policy == "clip":
        w, v = np.linalg.eigh(values)
        if w.min() < 0:
            values = (v * np.clip(w, 0, None)) @ v.T
            values = 0.5 * (values + values.T)
    elif policy == "shift":
        lam = np.linalg.eigvalsh(values).min()
        if lam < 0:
            values = values + abs(lam) * np.eye(len(values))
    return replace(K, values=values, psd_policy=policy)


# I/O ----------------------------------------------------------------------------------

def write_kernel(path, K: KernelMatrix) -> None:
    """Binary format: magic line, one JSON header line, then row-major little-endian float64."""
    header = {
        "kind": K.kind,
        "shape": list(K.values.shape),
        "psd_policy": K.psd_policy,
        "sample_ids": [str(s) for s in K.sample_ids],
        "col_ids": None if K.col_ids is None else [str(s) for s in K.col_ids],
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(np.ascontiguousarray(K.values, dtype="<f8").tobytes())


def read_kernel(path) -> KernelMatrix:
    with open(path, "rb") as fh:
        if fh.readline() != _MAGIC:
            raise KernelError(f"{path}: not a kernel file")
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f8")
    shape = tuple(header["shape"])
    if data.size != shape[0] * shape[1]:
        raise KernelError(f"{path}: truncated kernel data")
    return KernelMatrix(data.reshape(shape).astype(float), header["kind"], header["psd_policy"],
                        header["sample_ids"], header["col_ids"])


def write_kernel_csv(path, K: KernelMatrix) -> None:
    cols = K.sample_ids if K.col_ids is None else K.col_ids
    with open(path, "w") as fh:
        fh.write("id," + ",".join(map(str, cols)) + "\n")
        for sid, row in zip(K.sample_ids, K.values):
            fh.write(f"{sid}," + ",".join(f"{v:.17g}" for v in row) + "\n")
