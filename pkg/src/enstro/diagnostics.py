"""Scalar functionals of the vorticity budget and residuals of its identities.

All quantities follow the package's explicit ``2 pi`` normalisation.  The two
budget identities monitored here are, in that normalisation,

    (1/2) dE/dt + nu P - nu S            = 0        (linear flow)
    (1/2) dE/dt + nu P - nu S + 2 A      = 0        (nonlinear flow)

with E the enstrophy, P the palinstrophy, S the fractional boundary seminorm,
A the advective boundary term, and the equivalent forms with ``P - S``
replaced by the completed-square dissipation sum D.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .biot_savart import moments, velocity_from_vorticity
from .conformal import ConformalMap, disk_map, jacobian_weight
from .grid import SpectralField, l2_inner, to_physical
from .navier_stokes import advection, boundary_advective_term
from .operators import dissipation_sum
from .stokes import FlowState

__all__ = [
    "DiagnosticsRecord",
    "enstrophy",
    "palinstrophy",
    "boundary_h12",
    "dissipation_sum",
    "compute_record",
    "residual_linear",
    "residual_nonlinear",
    "sign_split",
]


@dataclass
class DiagnosticsRecord:
    """Per-step scalars of the vorticity budget.

    Residual fields are filled once neighbouring records exist; they stay zero
    at the ends of a run.
    """

    t: float
    enstrophy: float
    palinstrophy: float
    boundary_h12: float
    dissipation: float
    advective_boundary: float
    moments: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    residual_linear: float = 0.0
    residual_nonlinear: float = 0.0


def enstrophy(w: SpectralField, map: ConformalMap | None = None) -> float:
    """Squared L2 norm of the vorticity over the flow domain.

    On the disk this is the plain Parseval sum; for a mapped domain the area
    element brings in the Jacobian weight, evaluated by angularly exact
    physical-space quadrature.
    """
    map = map or disk_map(w.grid.r0)
    if map.is_identity:
        return l2_inner(w, w)
    nphi = 2 * w.kmax + 25
    jac = jacobian_weight(map, w.grid, nphi)
    f = to_physical(w, nphi).values
    radial = (f * f * jac.values).sum(axis=1) * (2.0 * np.pi / nphi)
    return float(radial @ w.grid.weights)


def palinstrophy(w: SpectralField) -> float:
    """Squared L2 norm of the vorticity gradient,
    ``2 pi sum_k int (|w_k'|^2 + k^2/r^2 |w_k|^2) r dr``."""
    g = w.grid
    dw = g.derivative(w.profiles)
    kvec = np.arange(w.kmax + 1)[:, None]
    dens = np.abs(dw) ** 2 + (kvec / g.nodes[None, :]) ** 2 * np.abs(w.profiles) ** 2
    sums = dens @ g.weights
    return float(2.0 * np.pi * (sums[0] + 2.0 * sums[1:].sum()))


def boundary_h12(w: SpectralField) -> float:
    """Fractional (exponent 1/2) boundary seminorm, ``2 pi sum_k |k| |w_k(r0)|^2``."""
    wall = np.abs(w.profiles[:, 0]) ** 2
    k = np.arange(w.kmax + 1)
    return float(2.0 * np.pi * 2.0 * (k[1:] * wall[1:]).sum())


def compute_record(state: FlowState, nonlinear: bool = False,
                   moment_orders: int = 4) -> DiagnosticsRecord:
    """Evaluate every budget scalar for one state."""
    w = state.w
    map = state.map
    e = enstrophy(w, map)
    p = palinstrophy(w)
    s = boundary_h12(w)
    d = dissipation_sum(w)
    a = 0.0
    if nonlinear and not state.config.disable_advection:
        v = state.velocity
        if v is None:
            v = velocity_from_vorticity(w, state.config.v_inf, map)
        b = advection(v, w, map)
        a = boundary_advective_term(w, b, map)
    m = moments(w, map, min(moment_orders, w.kmax))
    return DiagnosticsRecord(state.t, e, p, s, d, a, m)


def _check_history(h) -> float:
    if len(h) < 2:
        raise ValueError("need at least two records to form residuals")
    times = np.array([rec.t for rec in h])
    dts = np.diff(times)
    if dts.min() <= 0 or abs(dts.max() - dts.min()) > 1e-9 * dts.max():
        raise ValueError("history must be uniformly spaced in time")
    return float(dts[0])


def residual_linear(h: list[DiagnosticsRecord], nu: float):
    """Per-step residuals of the linear budget at the interior records.

    Returns ``(res_grad, res_sq)`` where ``res_grad[i]`` uses the gradient
    form ``(1/2) dE/dt + nu (P - S)`` and ``res_sq[i]`` the completed-square
    form ``(1/2) dE/dt + nu D``, both with centred differences, for records
    ``1 .. len(h)-2``.
    """
    dt = _check_history(h)
    e = np.array([rec.enstrophy for rec in h])
    p = np.array([rec.palinstrophy for rec in h])
    s = np.array([rec.boundary_h12 for rec in h])
    d = np.array([rec.dissipation for rec in h])
    dedt_half = (e[2:] - e[:-2]) / (4.0 * dt)
    res_grad = dedt_half + nu * (p[1:-1] - s[1:-1])
    res_sq = dedt_half + nu * d[1:-1]
    return res_grad, res_sq


def residual_nonlinear(h: list[DiagnosticsRecord], nu: float):
    """Per-step residuals of the nonlinear budget (adds the ``+2A`` term)."""
    res_grad, res_sq = residual_linear(h, nu)
    a = np.array([rec.advective_boundary for rec in h])[1:-1]
    return res_grad + 2.0 * a, res_sq + 2.0 * a


def sign_split(record: DiagnosticsRecord, nu: float) -> dict:
    """Signed contributions to ``(1/2) dE/dt`` and the completed-square gap."""
    return {
        "viscous_volume": -nu * record.palinstrophy,
        "boundary_viscous": nu * record.boundary_h12,
        "advective": -2.0 * record.advective_boundary,
        "net": (-nu * record.palinstrophy + nu * record.boundary_h12
                - 2.0 * record.advective_boundary),
        "quadratic_gap": record.palinstrophy - record.boundary_h12 - record.dissipation,
    }
