"""Conformal chart for the simply connected space forms of curvature eps >= 0.

The model metric is g = lambda(x)^2 * (dx_1^2 + ... + dx_n^2) on a coordinate
ball, with

    lambda(x) = 1 / (1 + (eps/4) |x|^2).

eps = 0 is Euclidean space, eps > 0 the round sphere of curvature eps in
stereographic coordinates (one hemisphere when the chart radius stays below
2/sqrt(eps)).  eps < 0 is accepted by the same formulas but lies outside the
supported theory; constructing such a chart requires an explicit opt-in flag.

All tensor components returned by this module are expressed in the orthonormal
frame e_a = lambda^{-1} d/dx_a unless a docstring says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ChartDomainError(ValueError):
    """A point lies outside the chart's accepted coordinate ball."""


@dataclass(frozen=True)
class SpaceFormChart:
    """Curvature parameter, ambient dimension, and accepted coordinate radius.

    Parameters
    ----------
    epsilon : float
        Sectional curvature of the model.  Must be >= 0 unless
        ``allow_negative_curvature`` is set; negative values are experimental
        and unsupported by the verification suite.
    dim : int
        Ambient dimension, 2 or 3.
    chart_radius : float, optional
        Largest coordinate radius |x| the chart accepts.  For eps > 0 it must
        stay strictly below the equatorial radius 2/sqrt(eps) (default: 90%
        of it).  For eps < 0 it must stay below the singular radius
        2/sqrt(-eps) of the conformal factor (default: half of it).
    """

    epsilon: float
    dim: int = 2
    chart_radius: float = field(default=None)  # type: ignore[assignment]
    allow_negative_curvature: bool = False

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        eps = float(self.epsilon)
        if eps < 0 and not self.allow_negative_curvature:
            raise ValueError(
                "epsilon < 0 is experimental and outside the supported theory; "
                "pass allow_negative_curvature=True to opt in"
            )
        limit = np.inf
        if eps > 0:
            limit = 2.0 / np.sqrt(eps)       # equator of the stereographic chart
        elif eps < 0:
            limit = 2.0 / np.sqrt(-eps)      # conformal factor blows up here
        radius = self.chart_radius
        if radius is None:
            # stay clearly inside the equator (eps > 0) or the singular
            # radius (eps < 0) while leaving room for generic test points
            radius = limit if np.isinf(limit) else (0.9 if eps > 0 else 0.5) * limit
        radius = float(radius)
        if radius <= 0:
            raise ValueError("chart_radius must be positive")
        if np.isfinite(limit) and radius >= limit:
            raise ValueError(
                f"chart_radius {radius} must be < {limit} for epsilon={eps}"
            )
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "chart_radius", radius)

    def validate_points(self, x) -> np.ndarray:
        """Return ``x`` as an array of shape (..., dim), rejecting points
        outside the accepted coordinate ball."""
        pts = np.asarray(x, dtype=float)
        if pts.shape[-1] != self.dim:
            raise ChartDomainError(
                f"expected points with last axis {self.dim}, got shape {pts.shape}"
            )
        r = np.sqrt(np.sum(pts * pts, axis=-1))
        rmax = float(np.max(r)) if r.size else 0.0
        if rmax > self.chart_radius * (1.0 + 1e-12):
            raise ChartDomainError(
                f"point radius {rmax:.6g} exceeds chart_radius {self.chart_radius:.6g}"
            )
        return pts


@dataclass(frozen=True)
class PointJet:
    """Second-order data of a scalar at one point, in the orthonormal frame.

    ``grad`` and ``hess`` are the covariant gradient and Hessian expressed in
    the frame e_a = lambda^{-1} d/dx_a.  ``one_sided`` marks jets built from
    one-sided finite-difference stencils at grid boundaries.
    """

    point: np.ndarray
    value: float
    grad: np.ndarray
    hess: np.ndarray
    one_sided: bool = False


def conformal_factor(chart: SpaceFormChart, x) -> np.ndarray | float:
    """lambda(x) = 1/(1 + (eps/4)|x|^2), broadcasting over leading axes."""
    pts = chart.validate_points(x)
    r2 = np.sum(pts * pts, axis=-1)
    lam = 1.0 / (1.0 + 0.25 * chart.epsilon * r2)
    return float(lam) if lam.ndim == 0 else lam


def _log_lambda_derivatives(chart: SpaceFormChart, pts: np.ndarray):
    """First and second coordinate derivatives of log(lambda).

    d(log lambda)_a   = -(eps/2) x_a lambda
    d2(log lambda)_ab = -(eps/2) lambda delta_ab + (eps^2/4) x_a x_b lambda^2
    """
    eps = chart.epsilon
    r2 = np.sum(pts * pts, axis=-1)
    lam = 1.0 / (1.0 + 0.25 * eps * r2)
    d1 = -0.5 * eps * pts * lam[..., None]
    eye = np.eye(chart.dim)
    d2 = (
        -0.5 * eps * lam[..., None, None] * eye
        + 0.25 * eps**2 * (lam**2)[..., None, None]
        * pts[..., :, None] * pts[..., None, :]
    )
    return lam, d1, d2


def christoffel(chart: SpaceFormChart, x) -> np.ndarray:
    """Christoffel symbols Gamma^c_{ab} of the conformal metric in chart
    coordinates, shape (..., dim, dim, dim) indexed [c, a, b].

    Gamma^c_{ab} = delta_ca phi_b + delta_cb phi_a - delta_ab phi_c
    with phi = log(lambda).
    """
    pts = chart.validate_points(x)
    _, phi, _ = _log_lambda_derivatives(chart, pts)
    eye = np.eye(chart.dim)
    # indices: [..., c, a, b]
    gamma = (
        eye[:, :, None] * phi[..., None, None, :]
        + eye[:, None, :] * phi[..., None, :, None]
        - eye[None, :, :] * phi[..., :, None, None]
    )
    return gamma


def frame_components(chart: SpaceFormChart, x, coord_grad, coord_hess):
    """Convert coordinate derivatives of a scalar to frame components.

    Takes the plain coordinate gradient and Hessian, applies the Christoffel
    correction u_{;ab} = d2u_ab - Gamma^c_{ab} du_c, and rescales both tensors
    into the orthonormal frame lambda^{-1} * (coordinate basis).  Broadcasts
    over leading axes.
    """
    pts = chart.validate_points(x)
    du = np.asarray(coord_grad, dtype=float)
    d2u = np.asarray(coord_hess, dtype=float)
    lam = 1.0 / (1.0 + 0.25 * chart.epsilon * np.sum(pts * pts, axis=-1))
    gamma = christoffel(chart, pts)
    correction = np.einsum("...cab,...c->...ab", gamma, du)
    grad = du / lam[..., None]
    hess = (d2u - correction) / (lam * lam)[..., None, None]
    return grad, hess


def covariant_jet(chart: SpaceFormChart, sampler, x) -> PointJet:
    """Evaluate the covariant jet of an analytic scalar at one point.

    ``sampler(x)`` must return ``(value, grad, hess)`` in plain chart
    coordinates; the result carries frame components.
    """
    pts = chart.validate_points(x)
    if pts.ndim != 1:
        raise ValueError("covariant_jet takes a single point")
    value, du, d2u = sampler(pts)
    grad, hess = frame_components(chart, pts, du, d2u)
    return PointJet(point=pts, value=float(value), grad=grad, hess=hess)


def sectional_curvature_probe(chart: SpaceFormChart, x) -> float:
    """Sectional curvature of the chart metric at ``x``.

    Uses the conformal-curvature formula for g = e^{2 phi} delta with flat
    background: the coordinate plane (a, b) has

        K_ab = -lambda^{-2} (phi_aa + phi_bb + |dphi|^2 - phi_a^2 - phi_b^2).

    All planes agree for this chart; the mean over coordinate planes is
    returned and should equal epsilon to rounding.
    """
    pts = chart.validate_points(x)
    if pts.ndim != 1:
        raise ValueError("sectional_curvature_probe takes a single point")
    lam, d1, d2 = _log_lambda_derivatives(chart, pts)
    norm2 = float(np.dot(d1, d1))
    vals = []
    for a in range(chart.dim):
        for b in range(a + 1, chart.dim):
            k = -(d2[a, a] + d2[b, b] + norm2 - d1[a] ** 2 - d1[b] ** 2) / lam**2
            vals.append(k)
    return float(np.mean(vals))
