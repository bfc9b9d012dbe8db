"""Linear vorticity evolution per angular mode with the no-slip Robin rows.

Each mode obeys ``J dw_k/dt = nu lap_k w_k`` on the disk-plane grid, closed by
the boundary rows

    r0 w_k'(r0) + |k| w_k(r0) = rhs_k        (rhs 0 for the pure linear flow)
    w_k(rmax) = 0

For the identity map the mass weight J is one and the modes decouple into
banded solves.  For mapped domains J depends on the angle, which couples
neighbouring modes through the mass term; that case is solved as one sparse
system assembled over all modes, factorised once per configuration.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .conformal import ConformalMap, disk_map, jacobian_weight
from .errors import ConfigurationError, ShapeMismatchError
from .grid import RadialGrid, SpectralField
from .operators import (
    apply_Dk,
    apply_mode_laplacian,
    dissipation_sum,
    laplacian_banded,
    mode_laplacian_matrix,
    robin_residuals,
    robin_row,
)

__all__ = [
    "SolverConfig",
    "FlowState",
    "apply_mode_laplacian",
    "apply_Dk",
    "dissipation_sum",
    "robin_residuals",
    "step_stokes",
    "project_orthogonality",
    "gaussian_ring",
    "noise_field",
]

_SCHEMES = ("cn", "be")


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping configuration shared by the linear and nonlinear solvers."""

    nu: float
    v_inf: float = 0.0
    dt: float = 1e-3
    scheme: str = "cn"
    map: ConformalMap | None = None
    disable_advection: bool = False
    cfl_action: str = "warn"  # warn | abort | ignore
    threads: int = 1

    def __post_init__(self):
        if self.nu <= 0:
            raise ConfigurationError("viscosity must be positive")
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if self.scheme not in _SCHEMES:
            raise ConfigurationError(f"scheme must be one of {_SCHEMES}")
        if self.cfl_action not in ("warn", "abort", "ignore"):
            raise ConfigurationError("cfl_action must be warn, abort or ignore")


@dataclass(frozen=True)
class FlowState:
    """Immutable snapshot of a run: time, vorticity, and solver context.

    ``velocity`` caches the reconstruction belonging to ``w``; the nonlinear
    stepper threads the previous advection term through ``advection_prev`` for
    its two-step extrapolations.
    """

    t: float
    w: SpectralField
    config: SolverConfig
    velocity: object | None = None
    advection_prev: SpectralField | None = None

    @property
    def map(self) -> ConformalMap:
        return self.config.map or disk_map(self.w.grid.r0)


def _theta(scheme: str) -> float:
    return 0.5 if scheme == "cn" else 1.0


class _DiskStepper:
    """Independent banded solve per mode (identity map, unit mass)."""

    def __init__(self, grid: RadialGrid, kmax: int, nu: float, dt: float, scheme: str,
                 threads: int = 1):
        self.grid = grid
        self.kmax = kmax
        self.nu = nu
        self.dt = dt
        self.scheme = scheme
        self.threads = max(1, int(threads))
        th = _theta(scheme)
        n = grid.n
        self._lhs = []
        self._rhs_ops = []
        for k in range(kmax + 1):
            ab = -th * nu * laplacian_banded(grid, k).copy()
            ab[2] += 1.0 / dt
            # Robin row on the first three nodes replaces the interior pattern.
            rr = robin_row(grid, k)
            ab[2, 0] = rr[0]
            ab[1, 1] = rr[1]
            ab[0, 2] = rr[2]
            # Outer Dirichlet row.
            ab[2, n - 1] = 1.0
            ab[3, n - 2] = 0.0
            ab[4, n - 3] = 0.0
            self._lhs.append(ab)
            lap = mode_laplacian_matrix(grid, k)
            self._rhs_ops.append(None if scheme == "be" else (1.0 - th) * nu * lap)

    def _step_mode(self, k, profile, robin_rhs_k, forcing_k):
        rhs = profile / self.dt
        if self._rhs_ops[k] is not None:
            rhs = rhs + self._rhs_ops[k] @ profile
        if forcing_k is not None:
            rhs = rhs + forcing_k
        rhs[0] = robin_rhs_k
        rhs[-1] = 0.0
        return scipy.linalg.solve_banded((2, 2), self._lhs[k], rhs)

    def step(self, profiles: np.ndarray, robin_rhs: np.ndarray | None,
             forcing: np.ndarray | None) -> np.ndarray:
        kmax = self.kmax
        if robin_rhs is None:
            robin_rhs = np.zeros(kmax + 1, dtype=complex)
        out = np.empty_like(profiles)
        if self.threads > 1:
            with concurrent.futures.ThreadPoolExecutor(self.threads) as pool:
                futures = {
                    pool.submit(self._step_mode, k, profiles[k], robin_rhs[k],
                                None if forcing is None else forcing[k]): k
                    for k in range(kmax + 1)
                }
                for fut, k in futures.items():
                    out[k] = fut.result()
        else:
            for k in range(kmax + 1):
                out[k] = self._step_mode(k, profiles[k], robin_rhs[k],
                                         None if forcing is None else forcing[k])
        return out


def _jacobian_modes(grid: RadialGrid, map: ConformalMap, kmax: int):
    """Angular Fourier modes of the Jacobian weight, truncated to the
    numerically significant band."""
    nphi = max(64, 4 * (kmax + 4))
    jac = jacobian_weight(map, grid, nphi)
    modes = jac.angular_modes()
    mags = np.abs(modes).max(axis=1)
    band = 0
    for p in range(modes.shape[0]):
        if mags[p] > 1e-13 * max(mags[0], 1.0):
            band = p
    return modes[: band + 1], band


class _MappedStepper:
    """One sparse real system over all modes; mass rows couple modes through
    the angular harmonics of the Jacobian weight."""

    def __init__(self, grid: RadialGrid, kmax: int, nu: float, dt: float, scheme: str,
                 map: ConformalMap):
        self.grid = grid
        self.kmax = kmax
        self.nu = nu
        self.dt = dt
        self.scheme = scheme
        th = _theta(scheme)
        n = grid.n
        jmodes, band = _jacobian_modes(grid, map, kmax)
        nmodes = kmax + 1
        size = 2 * nmodes * n
        interior = np.arange(1, n - 1)

        lhs_r, lhs_c, lhs_v = [], [], []
        rhs_r, rhs_c, rhs_v = [], [], []

        def base(k, comp):
            return (2 * k + comp) * n

        def add_mass(rows, cols, vals, k, m, coeff, conj_source):
            # coeff: complex radial profile multiplying w_m (or conj(w_m)).
            re, im = coeff.real[interior], coeff.imag[interior]
            sign = -1.0 if conj_source else 1.0
            # Real target row.
            rows.extend(base(k, 0) + interior); cols.extend(base(m, 0) + interior)
            vals.extend(re / dt)
            rows.extend(base(k, 0) + interior); cols.extend(base(m, 1) + interior)
            vals.extend(-sign * im / dt)
            # Imaginary target row.
            rows.extend(base(k, 1) + interior); cols.extend(base(m, 0) + interior)
            vals.extend(im / dt)
            rows.extend(base(k, 1) + interior); cols.extend(base(m, 1) + interior)
            vals.extend(sign * re / dt)

        for k in range(nmodes):
            for m in range(nmodes):
                q = k - m
                if abs(q) <= band:
                    coeff = jmodes[q] if q >= 0 else np.conj(jmodes[-q])
                    add_mass(lhs_r, lhs_c, lhs_v, k, m, coeff, conj_source=False)
                    add_mass(rhs_r, rhs_c, rhs_v, k, m, coeff, conj_source=False)
                if m >= 1 and k + m <= band:
                    coeff = jmodes[k + m]
                    add_mass(lhs_r, lhs_c, lhs_v, k, m, coeff, conj_source=True)
                    add_mass(rhs_r, rhs_c, rhs_v, k, m, coeff, conj_source=True)

        for k in range(nmodes):
            lap = mode_laplacian_matrix(grid, k).tocoo()
            mask = (lap.row >= 1) & (lap.row <= n - 2)
            rr, cc, vv = lap.row[mask], lap.col[mask], lap.data[mask]
            for comp in (0, 1):
                lhs_r.extend(base(k, comp) + rr); lhs_c.extend(base(k, comp) + cc)
                lhs_v.extend(-th * nu * vv)
                if scheme != "be":
                    rhs_r.extend(base(k, comp) + rr); rhs_c.extend(base(k, comp) + cc)
                    rhs_v.extend((1.0 - th) * nu * vv)
            row = robin_row(grid, k)
            for comp in (0, 1):
                for j in range(3):
                    lhs_r.append(base(k, comp) + 0); lhs_c.append(base(k, comp) + j)
                    lhs_v.append(row[j])
                lhs_r.append(base(k, comp) + n - 1); lhs_c.append(base(k, comp) + n - 1)
                lhs_v.append(1.0)

        lhs = scipy.sparse.csc_matrix((lhs_v, (lhs_r, lhs_c)), shape=(size, size))
        self._rhs_mat = scipy.sparse.csr_matrix((rhs_v, (rhs_r, rhs_c)), shape=(size, size))
        self._lu = scipy.sparse.linalg.splu(lhs)
        self._n = n

    def _pack(self, profiles: np.ndarray) -> np.ndarray:
        out = np.empty(2 * profiles.shape[0] * self._n)
        for k in range(profiles.shape[0]):
            out[(2 * k) * self._n:(2 * k + 1) * self._n] = profiles[k].real
            out[(2 * k + 1) * self._n:(2 * k + 2) * self._n] = profiles[k].imag
        return out

    def _unpack(self, x: np.ndarray, nmodes: int) -> np.ndarray:
        out = np.empty((nmodes, self._n), dtype=complex)
        for k in range(nmodes):
            re = x[(2 * k) * self._n:(2 * k + 1) * self._n]
            im = x[(2 * k + 1) * self._n:(2 * k + 2) * self._n]
            out[k] = re + 1j * im
        return out

    def step(self, profiles: np.ndarray, robin_rhs: np.ndarray | None,
             forcing: np.ndarray | None) -> np.ndarray:
        nmodes = profiles.shape[0]
        n = self._n
        rhs = self._rhs_mat @ self._pack(profiles)
        if forcing is not None:
            packed = self._pack(forcing)
            for k in range(nmodes):
                sl_re = slice((2 * k) * n + 1, (2 * k + 1) * n - 1)
                sl_im = slice((2 * k + 1) * n + 1, (2 * k + 2) * n - 1)
                rhs[sl_re] += packed[(2 * k) * n + 1:(2 * k + 1) * n - 1]
                rhs[sl_im] += packed[(2 * k + 1) * n + 1:(2 * k + 2) * n - 1]
        if robin_rhs is not None:
            for k in range(nmodes):
                rhs[(2 * k) * n] = robin_rhs[k].real
                rhs[(2 * k + 1) * n] = robin_rhs[k].imag
        x = self._lu.solve(rhs)
        out = self._unpack(x, nmodes)
        out[0] = out[0].real + 0j
        return out


def get_stepper(grid: RadialGrid, kmax: int, config: SolverConfig):
    """Build or reuse the implicit diffusion stepper for this configuration."""
    map = config.map or disk_map(grid.r0)
    key = ("stepper", kmax, config.nu, config.dt, config.scheme, map.token,
           config.threads)
    stepper = grid._cache.get(key)
    if stepper is None:
        if map.is_identity:
            stepper = _DiskStepper(grid, kmax, config.nu, config.dt, config.scheme,
                                   config.threads)
        else:
            stepper = _MappedStepper(grid, kmax, config.nu, config.dt, config.scheme, map)
        grid._cache[key] = stepper
    return stepper


def step_stokes(s: FlowState, dt: float) -> FlowState:
    """Advance the linear vorticity flow by one implicit step.

    Crank-Nicolson by default, backward Euler when the configuration says so;
    the Robin rows are enforced with zero right-hand side and the outer row
    pins ``w_k(rmax) = 0``.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    config = s.config if s.config.dt == dt else dataclasses.replace(s.config, dt=dt)
    stepper = get_stepper(s.w.grid, s.w.kmax, config)
    new_profiles = stepper.step(s.w.profiles, None, None)
    return dataclasses.replace(
        s, t=s.t + dt, w=s.w.with_profiles(new_profiles),
        velocity=None, advection_prev=None,
    )


def _correction_shapes(grid: RadialGrid, kmax: int) -> np.ndarray:
    """Per-mode profiles used by the moment projection.

    Mode 0 takes a narrow Gaussian bump away from both boundaries (the
    constant-profile minimiser is not square integrable on the unbounded
    domain).  Modes k >= 1 take the harmonic minimiser ``r^{-k}``, tapered to
    zero near the outer truncation with a C^3 polynomial so the Dirichlet row
    stays exact while the Robin row still annihilates the shape.
    """
    key = ("proj_shapes", kmax)
    cached = grid._cache.get(key)
    if cached is not None:
        return cached
    r = grid.nodes
    shapes = np.empty((kmax + 1, grid.n))
    rb = 2.0 * grid.r0
    sb = 0.2 * grid.r0
    shapes[0] = np.exp(-(((r - rb) / sb) ** 2))
    t = np.clip((r - 0.75 * grid.rmax) / (0.25 * grid.rmax), 0.0, 1.0)
    taper = 1.0 - t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)
    logr = np.log(r)
    for k in range(1, kmax + 1):
        shapes[k] = np.exp(-k * logr) * taper
    grid._cache[key] = shapes
    return shapes


def project_orthogonality(w: SpectralField, v_inf: float,
                          map: ConformalMap | None = None,
                          tol: float = 1e-11, max_iter: int = 60) -> SpectralField:
    """Impose the no-slip moment constraints on a vorticity field.

    After projection the moments satisfy ``M_1 = i v_inf`` and ``M_k = 0`` for
    every other stored mode, to within ``tol`` relative to the field scale.
    Each constraint is corrected along a fixed single-mode profile, so a field
    already satisfying the constraints is returned unchanged.
    """
    from .biot_savart import moments

    grid = w.grid
    kmax = w.kmax
    map = map or disk_map(grid.r0)
    targets = np.zeros(kmax + 1, dtype=complex)
    if kmax >= 1:
        targets[1] = 1j * v_inf
    shapes = _correction_shapes(grid, kmax)
    powers = grid.nodes[None, :] ** (1.0 - np.arange(kmax + 1)[:, None])
    shape_moments = (shapes * powers) @ grid.flux_weights

    field = w
    scale = max(np.abs(targets).max(), 1.0e-30,
                float(np.abs((np.abs(field.profiles) * powers) @ grid.flux_weights).max()))
    for _ in range(max_iter):
        current = moments(field, map, kmax)
        resid = targets - current
        resid[0] = resid[0].real
        if np.abs(resid).max() <= tol * scale:
            return field
        profiles = field.profiles.copy()
        profiles += (resid / shape_moments)[:, None] * shapes
        field = field.with_profiles(profiles)
    raise RuntimeError("moment projection did not converge")


def gaussian_ring(grid: RadialGrid, kmax: int, amplitude: float, center: float,
                  width: float, mode: int) -> SpectralField:
    """Ring vorticity ``A exp(-beta (r - rc)^2) cos(m phi)`` as a spectral field."""
    if mode > kmax:
        raise ConfigurationError("ring mode exceeds kmax")
    profiles = np.zeros((kmax + 1, grid.n), dtype=complex)
    bump = np.exp(-width * (grid.nodes - center) ** 2)
    profiles[mode] = (amplitude if mode == 0 else amplitude / 2.0) * bump
    return SpectralField(grid, profiles)


def noise_field(grid: RadialGrid, kmax: int, amplitude: float, seed: int) -> SpectralField:
    """Band-limited random field: smooth radial bumps with random weights,
    geometrically damped in the mode index."""
    rng = np.random.default_rng(seed)
    r = grid.nodes
    span = grid.rmax - grid.r0
    centers = grid.r0 + span * np.array([0.05, 0.1, 0.18, 0.28, 0.4])
    widths = span * np.array([0.03, 0.05, 0.07, 0.09, 0.12])
    basis = np.exp(-(((r[None, :] - centers[:, None]) / widths[:, None]) ** 2))
    profiles = np.zeros((kmax + 1, grid.n), dtype=complex)
    damp = 0.7 ** np.arange(kmax + 1)
    coeff = rng.standard_normal((kmax + 1, centers.size, 2))
    for k in range(kmax + 1):
        c = coeff[k, :, 0] + 1j * coeff[k, :, 1]
        if k == 0:
            c = coeff[k, :, 0].astype(complex)
        profiles[k] = amplitude * damp[k] * (c @ basis)
    return SpectralField(grid, profiles)
