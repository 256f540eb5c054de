"""Quantum-autoencoder representations and kernel SVMs for peptide sequences."""
from .autoencoder import AnsatzConfig, QuantumAutoencoder, TrainConfig
from .encoding import EncodingConfig, HamiltonianEncoder
from .kernels import KernelMatrix, hamiltonian_kernel, psd_repair, qae_kernel
from .svm import SMOClassifier, cross_validate, smo_train

__version__ = "0.1.0"

__all__ = [
    "AnsatzConfig", "QuantumAutoencoder", "TrainConfig", "EncodingConfig", "HamiltonianEncoder",
    "KernelMatrix", "hamiltonian_kernel", "psd_repair", "qae_kernel", "SMOClassifier",
    "cross_validate", "smo_train",
]
