"""Radial grids, angular Fourier transforms, and Parseval-consistent quadrature.

Conventions used throughout the package (fixed here, once):

* a real scalar field on the annulus ``r0 <= r <= rmax`` is expanded as
  ``f(r, phi) = sum_k f_k(r) exp(i k phi)`` with ``f_k = (1/2pi) \\oint f
  exp(-i k phi) dphi`` and ``f_{-k} = conj(f_k)``; only ``k = 0..K`` is stored;
* area integrals carry their ``2 pi`` factors explicitly, e.g.
  ``int f g dx = 2 pi sum_k int f_k conj(g_k) r dr``.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import ConfigurationError, DealiasingError, ShapeMismatchError

__all__ = [
    "RadialGrid",
    "SpectralField",
    "PhysicalField",
    "build_grid",
    "to_spectral",
    "to_physical",
    "radial_derivative",
    "l2_inner",
]


def _onesided_stencil(d1: float, d2: float) -> np.ndarray:
    """Second-order derivative stencil at a point from offsets d1, d2 (same sign)."""
    c0 = -(d1 + d2) / (d1 * d2)
    c1 = d2 / (d1 * (d2 - d1))
    c2 = -d1 / (d2 * (d2 - d1))
    return np.array([c0, c1, c2])


def _derivative_coefficients(nodes: np.ndarray):
    """Stencil coefficients of the first-derivative operator.

    Returns ``(lower, diag, upper, first, last)`` where the interior rows are
    the three-point centred stencil on the nonuniform grid and the end rows
    are three-point one-sided stencils, all second-order accurate.
    """
    h1 = nodes[1:-1] - nodes[:-2]
    h2 = nodes[2:] - nodes[1:-1]
    lower = -h2 / (h1 * (h1 + h2))
    diag = (h2 - h1) / (h1 * h2)
    upper = h1 / (h2 * (h1 + h2))
    first = _onesided_stencil(nodes[1] - nodes[0], nodes[2] - nodes[0])
    last = _onesided_stencil(nodes[-2] - nodes[-1], nodes[-3] - nodes[-1])
    return lower, diag, upper, first, last


def _derivative_matrix(nodes: np.ndarray) -> scipy.sparse.csr_matrix:
    n = nodes.size
    lower, diag, upper, first, last = _derivative_coefficients(nodes)
    rows, cols, vals = [], [], []
    rows += [0, 0, 0]
    cols += [0, 1, 2]
    vals += list(first)
    for j in range(1, n - 1):
        rows += [j, j, j]
        cols += [j - 1, j, j + 1]
        vals += [lower[j - 1], diag[j - 1], upper[j - 1]]
    rows += [n - 1, n - 1, n - 1]
    cols += [n - 1, n - 2, n - 3]
    vals += list(last)
    return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _rdr_weights(nodes: np.ndarray) -> np.ndarray:
    """Quadrature weights for ``int f(r) r dr`` exact per cell for linear f.

    Within each cell the integrand ``f * r`` is integrated exactly against the
    linear interpolant of f, so the rule is exact whenever the integrand is a
    polynomial of degree two or less on the cell.
    """
    a, b = nodes[:-1], nodes[1:]
    span = b - a
    m2 = (b**2 - a**2) / 2.0
    m3 = (b**3 - a**3) / 3.0
    wa = (b * m2 - m3) / span
    wb = (m3 - a * m2) / span
    w = np.zeros_like(nodes)
    w[:-1] += wa
    w[1:] += wb
    return w


def _ds_weights(nodes: np.ndarray) -> np.ndarray:
    """Plain trapezoidal weights for ``int f(r) dr``."""
    w = np.zeros_like(nodes)
    h = np.diff(nodes)
    w[:-1] += h / 2.0
    w[1:] += h / 2.0
    return w


def _flux_weights(nodes: np.ndarray, dmat: scipy.sparse.csr_matrix) -> np.ndarray:
    """Weights q for ``int g dr`` satisfying a discrete fundamental theorem.

    The returned vector obeys ``sum_j q_j (D u)_j = u[-1] - u[0]`` exactly for
    every grid vector u, where D is the derivative matrix of this grid.  Moment
    functionals built on these weights telescope exactly under the evolution
    operators, which is what makes the discrete moment invariants hold to
    roundoff rather than to truncation error.
    """
    n = nodes.size
    a = scipy.sparse.lil_matrix(dmat.T)
    b = np.zeros(n)
    b[0] = -1.0
    b[-1] = 1.0
    # The N equations have a one-dimensional redundancy (row sums of D are
    # zero), so one of them may be traded for a gauge pin without changing the
    # solution set.
    plain = _ds_weights(nodes)
    m = n // 2
    a[m, :] = 0.0
    a[m, m] = 1.0
    b_gauged = b.copy()
    b_gauged[m] = plain[m]
    a = a.tocsc()
    q = scipy.sparse.linalg.spsolve(a, b_gauged)
    # Remove the oscillatory null component: solutions differ by multiples of
    # the left null vector of D, which contributes nothing to the telescoping
    # identity but degrades plain quadrature accuracy.
    z = scipy.sparse.linalg.spsolve(a, np.eye(1, n, m).ravel())
    dq = q - plain
    q = q - (dq @ z) / (z @ z) * z
    residual = np.abs(dmat.T @ q - b).max()
    if residual > 1e-10 * max(1.0, np.abs(q).max()):
        raise ConfigurationError(
            f"flux-weight construction failed (residual {residual:.3e})"
        )
    return q


@dataclass(frozen=True)
class RadialGrid:
    """Discretisation of ``[r0, rmax]`` with quadrature and derivative stencils.

    Attributes
    ----------
    r0, rmax : float
        Body radius (in the disk plane) and outer truncation radius.
    nodes : ndarray
        Strictly increasing node positions, ``nodes[0] == r0`` and
        ``nodes[-1] == rmax``.
    weights : ndarray
        Quadrature weights for ``int f(r) r dr``, exact per cell for
        integrands of degree <= 2.
    stretch : str
        ``"uniform"`` or ``"geometric"``.
    """

    r0: float
    rmax: float
    nodes: np.ndarray
    weights: np.ndarray
    stretch: str
    token: str = field(default="", compare=False, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ConfigurationError("grid needs at least three nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ConfigurationError("grid nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        lower, diag, upper, first, last = _derivative_coefficients(nodes)
        object.__setattr__(self, "_d_lower", lower)
        object.__setattr__(self, "_d_diag", diag)
        object.__setattr__(self, "_d_upper", upper)
        object.__setattr__(self, "_d_first", first)
        object.__setattr__(self, "_d_last", last)
        dmat = _derivative_matrix(nodes)
        object.__setattr__(self, "_dmat", dmat)
        object.__setattr__(self, "flux_weights", _flux_weights(nodes, dmat))
        object.__setattr__(self, "_cache", {})
        if not self.token:
            object.__setattr__(self, "token", uuid.uuid4().hex)

    @property
    def n(self) -> int:
        return self.nodes.size

    def derivative(self, values: np.ndarray) -> np.ndarray:
        """First radial derivative along the last axis, second order."""
        values = np.asarray(values)
        if values.shape[-1] != self.n:
            raise ShapeMismatchError(
                f"profile length {values.shape[-1]} does not match grid size {self.n}"
            )
        out = np.empty_like(values, dtype=np.result_type(values, float))
        out[..., 1:-1] = (
            self._d_lower * values[..., :-2]
            + self._d_diag * values[..., 1:-1]
            + self._d_upper * values[..., 2:]
        )
        out[..., 0] = values[..., :3] @ self._d_first
        out[..., -1] = values[..., -1:-4:-1] @ self._d_last
        return out

    def integrate_rdr(self, values: np.ndarray) -> np.ndarray:
        """``int f(r) r dr`` along the last axis."""
        return np.asarray(values) @ self.weights

    def integrate_ds(self, values: np.ndarray) -> np.ndarray:
        """``int f(r) dr`` along the last axis, with the flux-compatible weights."""
        return np.asarray(values) @ self.flux_weights


def build_grid(r0: float, rmax: float, n: int, stretch: str = "geometric") -> RadialGrid:
    """Construct a radial grid on ``[r0, rmax]``.

    ``stretch="uniform"`` gives equispaced nodes; ``stretch="geometric"`` gives
    a smooth log-type stretching with at least a quarter of the nodes inside
    ``r <= 2 r0`` so the boundary layer at the body is resolved.

    Raises
    ------
    ConfigurationError
        If ``r0 <= 0``, ``rmax <= r0``, ``n < 16``, or the stretch name is
        unknown.
    """
    if r0 <= 0:
        raise ConfigurationError("r0 must be positive")
    if rmax <= r0:
        raise ConfigurationError("rmax must exceed r0")
    if n < 16:
        raise ConfigurationError("n must be at least 16")
    xi = np.linspace(0.0, 1.0, n)
    if stretch == "uniform":
        nodes = r0 + (rmax - r0) * xi
    elif stretch == "geometric":
        span = np.log(rmax / r0)
        target = 0.28  # fraction of nodes inside r <= 2 r0, with margin over 1/4
        if span <= np.log(2.0) / target:
            nodes = r0 * np.exp(span * xi)
        else:
            # Exponent quadratic in xi: log-uniform near the body, stretched
            # further out, C-infinity so the stencils stay second order.
            a = (np.log(2.0) - target**2 * span) / (target - target**2)
            nodes = r0 * np.exp(a * xi + (span - a) * xi**2)
    else:
        raise ConfigurationError(f"unknown stretch {stretch!r}")
    nodes[0] = r0
    nodes[-1] = rmax
    return RadialGrid(r0, rmax, nodes, _rdr_weights(nodes), stretch)


def grid_from_nodes(nodes: np.ndarray, stretch: str = "custom") -> RadialGrid:
    """Rebuild a grid from stored node positions (snapshot restore path)."""
    nodes = np.asarray(nodes, dtype=float)
    return RadialGrid(float(nodes[0]), float(nodes[-1]), nodes, _rdr_weights(nodes), stretch)


@dataclass(frozen=True)
class SpectralField:
    """Complex radial profiles ``w_k(r)`` for angular modes ``k = 0..kmax``.

    Negative modes are implied by conjugate symmetry, so the mode-0 profile
    must be real for the physical field to be real.
    """

    grid: RadialGrid
    profiles: np.ndarray

    def __post_init__(self):
        profiles = np.asarray(self.profiles, dtype=complex)
        if profiles.ndim != 2 or profiles.shape[1] != self.grid.n:
            raise ShapeMismatchError(
                f"profiles shape {profiles.shape} does not match grid size {self.grid.n}"
            )
        object.__setattr__(self, "profiles", profiles)

    @property
    def kmax(self) -> int:
        return self.profiles.shape[0] - 1

    @classmethod
    def zeros(cls, grid: RadialGrid, kmax: int) -> "SpectralField":
        return cls(grid, np.zeros((kmax + 1, grid.n), dtype=complex))

    def validate(self, tol: float = 1e-12):
        scale = max(np.abs(self.profiles).max(), 1.0)
        if not np.all(np.isfinite(self.profiles)):
            raise ValueError("non-finite entries in spectral field")
        if np.abs(self.profiles[0].imag).max() > tol * scale:
            raise ValueError("mode-0 profile must be real")

    def with_profiles(self, profiles: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, profiles)

    def boundary_values(self) -> np.ndarray:
        """Trace coefficients ``w_k(r0)``."""
        return self.profiles[:, 0].copy()

    def scaled(self, factor: complex) -> "SpectralField":
        return SpectralField(self.grid, self.profiles * factor)


@dataclass(frozen=True)
class PhysicalField:
    """Real samples on the tensor grid nodes x equispaced angles."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != self.grid.n:
            raise ShapeMismatchError(
                f"values shape {values.shape} does not match grid size {self.grid.n}"
            )
        object.__setattr__(self, "values", values)

    @property
    def nphi(self) -> int:
        return self.values.shape[1]

    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.nphi) / self.nphi


def to_spectral(f: PhysicalField, kmax: int | None = None) -> SpectralField:
    """Angular Fourier analysis; ``w_k = (1/2pi) \\oint f exp(-i k phi) dphi``."""
    nphi = f.nphi
    if kmax is None:
        kmax = (nphi - 1) // 2
    if nphi < 2 * kmax + 1:
        raise DealiasingError(f"nphi={nphi} too small for kmax={kmax}")
    coeffs = np.fft.rfft(f.values, axis=1) / nphi
    return SpectralField(f.grid, coeffs[:, : kmax + 1].T.copy())


def to_physical(w: SpectralField, nphi: int) -> PhysicalField:
    """Angular Fourier synthesis on ``nphi`` equispaced angles."""
    if nphi < 2 * w.kmax + 1:
        raise DealiasingError(f"nphi={nphi} too small for kmax={w.kmax}")
    spec = np.zeros((w.grid.n, nphi // 2 + 1), dtype=complex)
    spec[:, : w.kmax + 1] = w.profiles.T * nphi
    return PhysicalField(w.grid, np.fft.irfft(spec, n=nphi, axis=1))


def radial_derivative(p: np.ndarray, g: RadialGrid) -> np.ndarray:
    """Second-order first derivative of one or more radial profiles."""
    return g.derivative(p)


def l2_inner(w1: SpectralField, w2: SpectralField, weight: np.ndarray | None = None) -> float:
    """Weighted L2 pairing ``int f g dx = 2 pi sum_k int w1_k conj(w2_k) wt r dr``.

    ``weight`` is an optional radial profile; it defaults to one.  The sum runs
    over all modes ``-kmax..kmax`` using conjugate symmetry, so the result is
    real for two real fields (the real part is returned).
    """
    if w1.grid is not w2.grid and not np.array_equal(w1.grid.nodes, w2.grid.nodes):
        raise ShapeMismatchError("fields live on different grids")
    if w1.kmax != w2.kmax:
        raise ShapeMismatchError("fields have different mode counts")
    wt = w1.grid.weights if weight is None else w1.grid.weights * np.asarray(weight)
    prods = w1.profiles * np.conj(w2.profiles)
    sums = prods @ wt
    total = sums[0] + 2.0 * np.sum(sums[1:])
    return float((2.0 * np.pi * total).real)
