"""Conformal maps between exterior domains and the exterior of a disk.

Maps are normalised to the identity at infinity: ``inverse(z) = z + O(1/z)``
and ``inverse_derivative(z) = 1 + O(1/z^2)``.  Only closed-form maps ship
(identity and the Joukowski ellipse family); evaluation never touches a grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import RadialGrid

__all__ = ["ConformalMap", "JacobianWeight", "disk_map", "joukowski_map", "jacobian_weight"]


@dataclass(frozen=True)
class ConformalMap:
    """Pair of maps between a flow domain and the exterior of the disk ``|z| > r0``.

    ``forward`` sends a physical point p to the disk plane, ``inverse`` sends a
    disk-plane point z back, and ``inverse_derivative`` is the complex
    derivative of the inverse map.  ``c = 0`` is the identity (disk domain).
    """

    kind: str
    r0: float
    c: float = 0.0

    @property
    def is_identity(self) -> bool:
        return self.c == 0.0

    @property
    def token(self) -> tuple:
        return (self.kind, self.r0, self.c)

    def forward(self, p):
        p = np.asarray(p, dtype=complex)
        if self.is_identity:
            return p.copy()
        c2 = self.c * self.c
        q = np.sqrt(p * p - 4.0 * c2)
        # Add the square root constructively so the computed quadratic root is
        # the one with the larger modulus, which is the exterior branch.
        q = np.where((p.conjugate() * q).real >= 0.0, q, -q)
        return (p + q) / 2.0

    def inverse(self, z):
        z = np.asarray(z, dtype=complex)
        if self.is_identity:
            return z.copy()
        return z + (self.c * self.c) / z

    def inverse_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        if self.is_identity:
            return np.ones_like(z)
        return 1.0 - (self.c * self.c) / (z * z)

    def ellipse_semi_axes(self) -> tuple[float, float]:
        """Semi-axes of the image of ``|z| = r0`` under the inverse map."""
        c2 = self.c * self.c
        return self.r0 + c2 / self.r0, self.r0 - c2 / self.r0


def disk_map(r0: float) -> ConformalMap:
    """Identity map: the flow domain already is the exterior of the disk."""
    if r0 <= 0:
        raise ConfigurationError("r0 must be positive")
    return ConformalMap("disk", r0, 0.0)


def joukowski_map(r0: float, c: float) -> ConformalMap:
    """Map with ``inverse(z) = z + c^2 / z``, sending ``|z| > r0`` onto the
    exterior of the ellipse with semi-axes ``r0 + c^2/r0`` and ``r0 - c^2/r0``.

    Requires ``0 <= c < r0`` for injectivity on the exterior.
    """
    if r0 <= 0:
        raise ConfigurationError("r0 must be positive")
    if not 0.0 <= c < r0:
        raise ConfigurationError("joukowski parameter must satisfy 0 <= c < r0")
    return ConformalMap("joukowski", r0, c)


@dataclass(frozen=True)
class JacobianWeight:
    """Samples of ``J(z) = |inverse_derivative(z)|^2`` on a polar tensor grid."""

    grid: RadialGrid
    values: np.ndarray  # shape (n_nodes, nphi)

    @property
    def nphi(self) -> int:
        return self.values.shape[1]

    def angular_modes(self, band: int | None = None) -> np.ndarray:
        """Nonnegative angular Fourier modes ``J_p(r)``; J is real so
        ``J_{-p} = conj(J_p)``."""
        modes = np.fft.rfft(self.values, axis=1) / self.nphi
        if band is not None:
            modes = modes[:, : band + 1]
        return modes.T.copy()


def jacobian_weight(map: ConformalMap, g: RadialGrid, nphi: int) -> JacobianWeight:
    """Evaluate the Jacobian factor of the mapped equations on the polar grid."""
    if nphi < 4:
        raise ConfigurationError("nphi must be at least 4")
    if g.nodes[0] < map.r0 * (1.0 - 1e-12):
        raise DomainError("grid extends inside the body disk")
    if map.is_identity:
        return JacobianWeight(g, np.ones((g.n, nphi)))
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    z = g.nodes[:, None] * np.exp(1j * phi)[None, :]
    vals = np.abs(map.inverse_derivative(z)) ** 2
    return JacobianWeight(g, vals)
