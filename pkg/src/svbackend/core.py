"""Dimension-checked vector math shared by every back-end stage.

All accumulation happens in float64: the normalization stages subtract
near-equal quantities and would otherwise need per-module tolerances.
Standard deviations are population (divide by D) everywhere in this
package; this module is the single place that convention is set.
"""

import numpy as np

from .errors import DegenerateInputError


def as_vector(values) -> np.ndarray:
    """Coerce to a finite 1-D float64 vector."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite values")
    return v


def l2_norm(v: np.ndarray) -> float:
    """Euclidean norm, scaled so squaring cannot under/overflow."""
    peak = float(np.max(np.abs(v))) if v.size else 0.0
    if peak == 0.0:
        return 0.0
    scaled = v / peak
    return peak * float(np.sqrt(np.dot(scaled, scaled)))


def cosine(a, b) -> float:
    """Cosine similarity a.b / (|a| |b|), in [-1, 1].

    Dimension mismatch and zero-norm inputs are hard errors, never
    silent zeros.
    """
    a = as_vector(a)
    b = as_vector(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = l2_norm(a)
    nb = l2_norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine of a zero-norm vector is undefined")
    return float(np.dot(a / na, b / nb))


def dim_stats(v) -> tuple[float, float, float]:
    """(l1, l2, std) of one vector: sum |v_i|, euclidean norm, and the
    population standard deviation over the D components.

    std over fewer than 2 components is undefined and raises (it is not
    reported as zero).
    """
    v = as_vector(v)
    if v.shape[0] < 2:
        raise DegenerateInputError(
            "per-dimension std needs at least 2 components"
        )
    l1 = float(np.sum(np.abs(v)))
    l2 = l2_norm(v)
    std = float(np.std(v))  # population: divide by D
    return l1, l2, std


def unit_rows(matrix: np.ndarray) -> np.ndarray:
    """Rows scaled to unit l2 norm; zero rows are a hard error."""
    m = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateInputError("cannot normalize a zero-norm row")
    return m / norms
