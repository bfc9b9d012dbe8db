"""Velocity reconstruction, vorticity moments, and boundary trace operators.

The interior velocity comes from a per-mode streamfunction two-point problem
rather than a volume convolution: ``lap_k psi_k = -src_k`` with ``psi_k(r0)=0``
(no penetration), closed at the outer truncation by a decay-matching row so
the induced field continues like ``r^{-|k|}`` instead of reflecting.  The
uniform stream enters mode 1 through the classical flow-past-a-disk
streamfunction, which the conformal normalisation leaves unchanged for every
shipped map.

The boundary traces are quadratures of ``s^{-|k|+1} f_k(s)``; they use the
grid's flux-compatible weights so the trace, the moment functionals, and the
Robin rows of the stepper stay one consistent family.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .conformal import ConformalMap, disk_map, jacobian_weight
from .errors import ShapeMismatchError
from .grid import RadialGrid, SpectralField, to_physical, to_spectral, PhysicalField
from .operators import laplacian_banded, outer_decay_row

__all__ = [
    "VelocityField",
    "BoundaryTrace",
    "moments",
    "velocity_from_vorticity",
    "gtau_trace",
    "l_trace",
    "boundary_slip",
]


@dataclass(frozen=True)
class VelocityField:
    """Spectral radial and tangential velocity profiles, disk-plane components.

    For mapped domains these are the conformally transported components that
    drive the mapped advection form; on the disk they are the physical polar
    components.  Both satisfy no penetration at ``r0`` and the discrete
    divergence-free identity by construction.
    """

    grid: RadialGrid
    ur: np.ndarray
    uphi: np.ndarray
    v_inf: float

    @property
    def kmax(self) -> int:
        return self.ur.shape[0] - 1

    def max_speed(self, nphi: int | None = None) -> float:
        """Maximum pointwise speed on the sampling grid (CFL guard input)."""
        nphi = nphi or max(2 * self.kmax + 9, 16)
        ur = to_physical(SpectralField(self.grid, self.ur), nphi).values
        up = to_physical(SpectralField(self.grid, self.uphi), nphi).values
        return float(np.sqrt(ur**2 + up**2).max())


@dataclass(frozen=True)
class BoundaryTrace:
    """Complex trace coefficients at the body circle, modes 0..kmax."""

    values: np.ndarray
    r0: float

    @property
    def kmax(self) -> int:
        return self.values.size - 1


def _product_modes(f: SpectralField, samples: np.ndarray, kmax_out: int) -> np.ndarray:
    """Modes of ``samples * f`` where samples live on (n, nphi); exact when
    nphi resolves the combined band."""
    nphi = samples.shape[1]
    phys = to_physical(f, nphi)
    prod = PhysicalField(f.grid, phys.values * samples)
    return to_spectral(prod, kmax_out).profiles


def _mapped_weight_times(f: SpectralField, map: ConformalMap, kmax_out: int) -> np.ndarray:
    """Modes of ``J * f`` for the Jacobian weight of the map."""
    band_guess = 8
    nphi = 2 * (f.kmax + kmax_out) + 2 * band_guess + 9
    jac = jacobian_weight(map, f.grid, nphi)
    return _product_modes(f, jac.values, kmax_out)


def _moment_integrals(profiles: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``int s^{-k+1} p_k(s) ds`` for k = 0..kmax with the flux weights."""
    kmax = profiles.shape[0] - 1
    powers = grid.nodes[None, :] ** (1.0 - np.arange(kmax + 1)[:, None])
    return (profiles * powers) @ grid.flux_weights


def moments(w: SpectralField, map: ConformalMap | None = None,
            kmax: int | None = None) -> np.ndarray:
    """No-slip moments ``M_k`` of the vorticity, k = 0..kmax.

    On the disk ``M_k = int s^{-k+1} w_k(s) ds``; for a mapped domain the
    area element brings in the Jacobian weight, so the integrand is the
    corresponding mode of ``J w``.
    """
    grid = w.grid
    if kmax is None:
        kmax = w.kmax
    if kmax > w.kmax:
        raise ShapeMismatchError("requested moment order exceeds stored modes")
    map = map or disk_map(grid.r0)
    if map.is_identity:
        profiles = w.profiles[: kmax + 1]
    else:
        profiles = _mapped_weight_times(w, map, kmax)
    return _moment_integrals(profiles, grid)


def _stream_ab(grid: RadialGrid, k: int) -> np.ndarray:
    key = ("stream_ab", k)
    cached = grid._cache.get(key)
    if cached is not None:
        return cached
    n = grid.n
    ab = laplacian_banded(grid, k).copy()
    # Inner Dirichlet row (no penetration).
    ab[2, 0] = 1.0
    ab[1, 1] = 0.0
    ab[0, 2] = 0.0
    # Outer decay-matching row, exact on r^{-|k|}.
    row = outer_decay_row(grid, k)
    ab[2, n - 1] = row[0]
    ab[3, n - 2] = row[1]
    ab[4, n - 3] = row[2]
    grid._cache[key] = ab
    return ab


def velocity_from_vorticity(w: SpectralField, v_inf: float,
                            map: ConformalMap | None = None) -> VelocityField:
    """Reconstruct the velocity induced by the vorticity plus the uniform
    stream, mode by mode.

    Flags (warns) when the circulation moment ``M_0`` is not numerically zero,
    since the decay closure of the axisymmetric mode then misrepresents the
    far field.
    """
    grid = w.grid
    map = map or disk_map(grid.r0)
    kmax = w.kmax
    if map.is_identity:
        source = w.profiles
    else:
        source = _mapped_weight_times(w, map, kmax)

    m0 = float(_moment_integrals(source[:1], grid)[0].real)
    scale = max(float(np.abs(source).max()) * grid.rmax, 1e-30)
    if abs(m0) > 1e-8 * scale:
        warnings.warn(
            f"nonzero circulation moment M_0 = {m0:.3e}; far-field closure "
            "assumes zero total circulation", RuntimeWarning, stacklevel=2)

    r = grid.nodes
    psi = np.empty((kmax + 1, grid.n), dtype=complex)
    for k in range(kmax + 1):
        rhs = -source[k].astype(complex)
        rhs[0] = 0.0
        rhs[-1] = 0.0
        psi[k] = scipy.linalg.solve_banded((2, 2), _stream_ab(grid, k), rhs)
    if kmax >= 1:
        psi[1] += (-0.5j * v_inf) * (r - grid.r0**2 / r)
    kvec = np.arange(kmax + 1)[:, None]
    ur = 1j * kvec * psi / r[None, :]
    uphi = -grid.derivative(psi)
    ur[0] = 0.0
    return VelocityField(grid, ur, uphi, v_inf)


def gtau_trace(f: SpectralField) -> BoundaryTrace:
    """Tangential boundary trace of the free-space stream operator,
    ``-(r0^{|k|-1}/2) * int s^{-|k|+1} f_k(s) ds`` per mode."""
    grid = f.grid
    integrals = _moment_integrals(f.profiles, grid)
    k = np.arange(f.kmax + 1)
    coeff = -0.5 * grid.r0 ** (k - 1.0)
    return BoundaryTrace(coeff * integrals, grid.r0)


def l_trace(f: SpectralField, map: ConformalMap | None = None) -> BoundaryTrace:
    """Mapped-domain analogue of the tangential trace: the disk-plane trace of
    the Jacobian-weighted field.  Identical to ``gtau_trace`` on the disk."""
    map = map or disk_map(f.grid.r0)
    if map.is_identity:
        return gtau_trace(f)
    weighted = SpectralField(f.grid, _mapped_weight_times(f, map, f.kmax))
    return gtau_trace(weighted)


def boundary_slip(v: VelocityField, nphi: int | None = None) -> float:
    """Maximum tangential speed on the body circle."""
    nphi = nphi or max(4 * (v.kmax + 1), 32)
    traces = v.uphi[:, 0]
    spec = np.zeros(nphi // 2 + 1, dtype=complex)
    spec[: traces.size] = traces * nphi
    profile = np.fft.irfft(spec, n=nphi)
    return float(np.abs(profile).max())
