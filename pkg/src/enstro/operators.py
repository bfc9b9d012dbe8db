"""Per-mode radial differential operators in harmonic-exact form.

The mode Laplacian and its first-order factor are assembled from locally
scaled first-derivative stencils using the identities

    f' + (c/r) f = r^{-c} (r^c f)'            (first-order factor)
    lap_k = (d/dr + (1-|k|)/r) o (d/dr + |k|/r)

so the discrete operators annihilate the harmonic profile ``r^{-|k|}``
exactly, not merely to truncation error.  The Robin boundary functional is
built from the same scaled one-sided stencil, which also makes the discrete
moment functionals telescope exactly under the evolution (see
``RadialGrid.flux_weights``).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse

from .errors import ShapeMismatchError
from .grid import RadialGrid, SpectralField

__all__ = [
    "scaled_derivative_matrix",
    "mode_laplacian_matrix",
    "robin_row",
    "outer_decay_row",
    "apply_Dk",
    "apply_mode_laplacian",
    "robin_residuals",
    "dissipation_sum",
]


def _scaled_entry_factors(grid: RadialGrid, c: float) -> np.ndarray:
    """Ratios ``(r_col / r_row)^c`` for every stored entry of the derivative
    matrix, computed in log space so large exponents stay well scaled."""
    dmat = grid._dmat.tocoo()
    logr = np.log(grid.nodes)
    return np.exp(c * (logr[dmat.col] - logr[dmat.row]))


def scaled_derivative_matrix(grid: RadialGrid, c: float) -> scipy.sparse.csr_matrix:
    """Matrix of the operator ``f -> f' + (c/r) f`` via local scaling.

    Exact on ``f = r^{-c}`` because the scaled stencil sees a constant there.
    """
    key = ("scaled_d", c)
    cached = grid._cache.get(key)
    if cached is not None:
        return cached
    dmat = grid._dmat.tocoo()
    vals = dmat.data * _scaled_entry_factors(grid, c)
    out = scipy.sparse.csr_matrix((vals, (dmat.row, dmat.col)), shape=dmat.shape)
    grid._cache[key] = out
    return out


def mode_laplacian_matrix(grid: RadialGrid, k: int) -> scipy.sparse.csr_matrix:
    """Matrix of ``lap_k f = (1/r)(r f')' - (k^2/r^2) f`` on the grid.

    Interior rows are second order; the end rows are one-sided compositions.
    The product of the two scaled factors keeps ``r^{-|k|}`` in the kernel
    exactly.
    """
    k = abs(int(k))
    key = ("lap", k)
    cached = grid._cache.get(key)
    if cached is not None:
        return cached
    dk = scaled_derivative_matrix(grid, float(k))
    ek = scaled_derivative_matrix(grid, float(1 - k))
    out = (ek @ dk).tocsr()
    grid._cache[key] = out
    return out


def laplacian_banded(grid: RadialGrid, k: int) -> np.ndarray:
    """Mode Laplacian in LAPACK banded storage with bandwidths (2, 2)."""
    k = abs(int(k))
    key = ("lap_banded", k)
    cached = grid._cache.get(key)
    if cached is not None:
        return cached
    lap = mode_laplacian_matrix(grid, k)
    n = grid.n
    ab = np.zeros((5, n))
    for off in range(-2, 3):
        diag = lap.diagonal(off)
        if off >= 0:
            ab[2 - off, off : off + diag.size] = diag
        else:
            ab[2 - off, : diag.size] = diag
    grid._cache[key] = ab
    return ab


def robin_row(grid: RadialGrid, k: int) -> np.ndarray:
    """Coefficients of the functional ``r0 w'(r0) + |k| w(r0)`` on the first
    three nodes, exact on ``w = r^{-|k|}``."""
    k = abs(int(k))
    key = ("robin", k)
    cached = grid._cache.get(key)
    if cached is not None:
        return cached
    r = grid.nodes[:3]
    row = grid.r0 * grid._d_first * (r / grid.r0) ** k
    grid._cache[key] = row
    return row


def outer_decay_row(grid: RadialGrid, k: int) -> np.ndarray:
    """Coefficients of ``psi'(rmax) + (|k|/rmax) psi(rmax)`` on the last three
    nodes (ordered last, last-1, last-2), exact on the decaying solution
    ``r^{-|k|}``; used as a reflection-free outer closure."""
    k = abs(int(k))
    key = ("outer", k)
    cached = grid._cache.get(key)
    if cached is not None:
        return cached
    r = grid.nodes[-1:-4:-1]
    row = grid._d_last * (r / grid.nodes[-1]) ** k
    grid._cache[key] = row
    return row


def apply_Dk(p: np.ndarray, k: int, g: RadialGrid) -> np.ndarray:
    """Apply ``D_k[f] = f' + (|k|/r) f`` to a radial profile."""
    p = np.asarray(p)
    if p.shape[-1] != g.n:
        raise ShapeMismatchError("profile length does not match grid")
    return scaled_derivative_matrix(g, float(abs(int(k)))) @ p


def apply_mode_laplacian(p: np.ndarray, k: int, g: RadialGrid) -> np.ndarray:
    """Apply the mode Laplacian ``lap_k`` to a radial profile."""
    p = np.asarray(p)
    if p.shape[-1] != g.n:
        raise ShapeMismatchError("profile length does not match grid")
    return mode_laplacian_matrix(g, k) @ p


def robin_residuals(w: SpectralField) -> np.ndarray:
    """Values of ``r0 w_k'(r0) + |k| w_k(r0)`` for every stored mode."""
    g = w.grid
    out = np.empty(w.kmax + 1, dtype=complex)
    for k in range(w.kmax + 1):
        out[k] = robin_row(g, k) @ w.profiles[k, :3]
    return out


def dissipation_sum(w: SpectralField) -> float:
    """Total squared norm of the completed-square factors,
    ``2 pi sum_k int |D_k[w_k]|^2 r dr`` over modes ``-kmax..kmax``.

    Nonnegative; vanishes exactly on the harmonic profiles ``r^{-|k|}``.
    """
    g = w.grid
    total = 0.0
    for k in range(w.kmax + 1):
        dk = apply_Dk(w.profiles[k], k, g)
        part = float(g.integrate_rdr(np.abs(dk) ** 2))
        total += part if k == 0 else 2.0 * part
    return 2.0 * np.pi * total
