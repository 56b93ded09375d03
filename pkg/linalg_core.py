"""
Dense real matrix helpers: norms, spectra, powers and commutators
"""
from typing import Any, List

import numpy as np

from config import TOL_SCHUR
from errors import InvalidInputError


def as_matrix(m: Any, square: bool = False) -> np.ndarray:
    """Coerce to a finite 2-D float64 array, raising InvalidInputError otherwise"""
    try:
        arr = np.asarray(m, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"Matrix entries must be real numbers: {e}")
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidInputError(f"Expected a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("Matrix has non-finite entries")
    if square and arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"Expected a square matrix, got shape {arr.shape}")
    return arr


def identity(d: int) -> np.ndarray:
    return np.eye(d, dtype=np.float64)


def spectral_norm(m: Any) -> float:
    """
    Largest singular value, computed as sqrt of the top eigenvalue of m^T m.

    Args:
        m: finite real matrix (any shape)
    Returns:
        nonnegative float
    """
    arr = as_matrix(m)
    gram = arr.T @ arr
    top = float(np.linalg.eigvalsh(gram)[-1])
    return float(np.sqrt(max(top, 0.0)))


def eigenvalues(m: Any) -> List[complex]:
    """Eigenvalues sorted by descending modulus"""
    arr = as_matrix(m, square=True)
    vals = np.linalg.eigvals(arr)
    order = np.argsort(-np.abs(vals), kind='stable')
    return [complex(v) for v in vals[order]]


def spectral_radius(m: Any) -> float:
    arr = as_matrix(m, square=True)
    return float(np.max(np.abs(np.linalg.eigvals(arr))))


def is_schur(m: Any, tol: float = TOL_SCHUR) -> bool:
    """True iff every eigenvalue lies strictly inside the unit disk (with margin tol)"""
    return spectral_radius(m) < 1.0 - tol


def matrix_power(m: Any, k: int) -> np.ndarray:
    """m multiplied by itself k times; k = 0 gives the identity"""
    arr = as_matrix(m, square=True)
    if k < 0:
        raise InvalidInputError(f"Exponent must be nonnegative, got {k}")
    result = identity(arr.shape[0])
    for _ in range(int(k)):
        result = result @ arr
    return result


def commutator(x: Any, y: Any) -> np.ndarray:
    """x y - y x"""
    a = as_matrix(x, square=True)
    b = as_matrix(y, square=True)
    if a.shape != b.shape:
        raise InvalidInputError(f"Commutator needs equal shapes, got {a.shape} and {b.shape}")
    return a @ b - b @ a
