import numpy as np


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    """Positive square root through the eigendecomposition of the hermitian part."""
    H = (A + A.conj().T) / 2
    w, V = np.linalg.eigh(H)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def matrix_unit(dim: int, i: int, j: int) -> np.ndarray:
    E = np.zeros((dim, dim))
    E[i, j] = 1.0
    return E


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(G)
    return Q * (np.diag(R) / np.abs(np.diag(R)))
