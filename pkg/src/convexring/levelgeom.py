"""Level-set geometry of scalar fields: curvature, sigma_k, rank, structure.

Two independent computational routes to the elementary symmetric functions of
the level-set principal curvatures are kept deliberately separate:

* :func:`second_fundamental_form` builds h_ij = -u_{;ij}/|grad u| in an
  adapted tangent frame and exposes its eigenvalues (the principal
  curvatures of the level set with respect to the normal grad u / |grad u|).
* :func:`sigma_k_level` never touches the tangent frame: it contracts the
  gradient with the Newton transformation of the full covariant Hessian,

      sigma_k[level] = (-1)^k  g^T T_k(D2u) g / |g|^(k+2),

  where T_k(A) = sum_{j<=k} (-1)^j sigma_{k-j}(A) A^j and the sigma_j(A) come
  from trace identities, not eigenvalues.

Agreement of the two routes is a nontrivial identity and is enforced by the
test suite; do not collapse them into one implementation.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import prod
from typing import Any, Callable, Sequence

import numpy as np

from .field import ScalarField
from .spaceform import PointJet, SpaceFormChart, frame_components

GRAD_FLOOR = 1e-8


class SingularGradientError(ValueError):
    """|grad u| fell below the floor where a level-set frame was needed."""


class LevelRangeError(ValueError):
    """Requested level value is not strictly between the boundary values."""


class TopologyError(RuntimeError):
    """A level curve failed to cross each radial grid line exactly once."""


# -- frames and curvature -----------------------------------------------------


def _tangent_frame(unit_normal: np.ndarray) -> np.ndarray:
    """Gram-Schmidt tangent basis seeded from coordinate axes.

    Axes are taken in order of increasing |axis . normal| (ties resolved by
    lowest index), which makes the frame deterministic.
    Returns an (n-1, n) array of orthonormal tangent vectors.
    """
    n = unit_normal.shape[0]
    order = np.argsort(np.abs(unit_normal), kind="stable")
    frame = []
    for axis in order[: n - 1]:
        v = np.zeros(n)
        v[axis] = 1.0
        v = v - np.dot(v, unit_normal) * unit_normal
        for t in frame:
            v = v - np.dot(v, t) * t
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            raise SingularGradientError("degenerate tangent frame")
        frame.append(v / norm)
    return np.array(frame)


def second_fundamental_form(jet: PointJet, grad_floor: float = GRAD_FLOOR) -> np.ndarray:
    """h_ij = -u_{;ij} / |grad u| on the tangent space of the level set.

    Eigenvalues are the principal curvatures with respect to the unit normal
    grad u / |grad u|; they are positive when the level set is convex toward
    increasing u.
    """
    g = np.asarray(jet.grad, dtype=float)
    norm = float(np.linalg.norm(g))
    if norm < grad_floor:
        raise SingularGradientError(
            f"|grad u| = {norm:.3e} below floor {grad_floor:.1e} at {jet.point.tolist()}"
        )
    e_n = g / norm
    tangents = _tangent_frame(e_n)
    h = -tangents @ np.asarray(jet.hess, dtype=float) @ tangents.T / norm
    return 0.5 * (h + h.T)


def principal_curvatures(jet: PointJet, grad_floor: float = GRAD_FLOOR) -> np.ndarray:
    """Sorted eigenvalues of the second fundamental form."""
    return np.linalg.eigvalsh(second_fundamental_form(jet, grad_floor))


# -- sigma_k: two routes ------------------------------------------------------


def elementary_symmetric(values: Sequence[float], k: int) -> float:
    """e_k of a small list of numbers (direct sum over k-subsets)."""
    if k == 0:
        return 1.0
    vals = list(values)
    if k > len(vals):
        return 0.0
    return float(sum(prod(c) for c in combinations(vals, k)))


def _sigma_traces(a: np.ndarray, k_max: int) -> list[float]:
    """sigma_0..sigma_k_max of a symmetric matrix from trace identities.

    Eigenvalue-free on purpose: p1 = tr A, p2 = tr A^2, p3 = tr A^3 give
    sigma_1 = p1, sigma_2 = (p1^2 - p2)/2, sigma_3 = (p1^3 - 3 p1 p2 + 2 p3)/6.
    """
    if k_max > 3:
        raise ValueError("trace route implemented for sigma_0..sigma_3")
    out = [1.0]
    if k_max >= 1:
        p1 = float(np.trace(a))
        out.append(p1)
    if k_max >= 2:
        p2 = float(np.trace(a @ a))
        out.append((p1 * p1 - p2) / 2.0)
    if k_max >= 3:
        p3 = float(np.trace(a @ a @ a))
        out.append((p1**3 - 3.0 * p1 * p2 + 2.0 * p3) / 6.0)
    return out


def sigma_k_level(jet: PointJet, k: int, grad_floor: float = GRAD_FLOOR) -> float:
    """k-th elementary symmetric function of the level-set curvatures,
    evaluated through the full covariant Hessian (no tangent frame).

    Valid for 1 <= k <= n-1.
    """
    g = np.asarray(jet.grad, dtype=float)
    n = g.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    norm = float(np.linalg.norm(g))
    if norm < grad_floor:
        raise SingularGradientError(
            f"|grad u| = {norm:.3e} below floor {grad_floor:.1e} at {jet.point.tolist()}"
        )
    a = np.asarray(jet.hess, dtype=float)
    sigmas = _sigma_traces(a, k)
    # Newton transformation T_k(A) = sum_{j=0..k} (-1)^j sigma_{k-j}(A) A^j
    t_k = np.zeros_like(a)
    power = np.eye(n)
    for j in range(k + 1):
        t_k = t_k + (-1.0) ** j * sigmas[k - j] * power
        power = power @ a
    quad = float(g @ t_k @ g)
    return (-1.0) ** k * quad / norm ** (k + 2)


def phi_test(jet: PointJet, l: int, grad_floor: float = GRAD_FLOOR) -> float:
    """phi = |grad u|^(l+3) * sigma_{l+1}(principal curvatures), 0 <= l <= n-2.

    The quantity whose sign encodes strict convexity of the level set at
    curvature rank l+1; computed on the eigenvalue route.
    """
    g = np.asarray(jet.grad, dtype=float)
    n = g.shape[0]
    if not 0 <= l <= n - 2:
        raise ValueError(f"l must be in [0, {n - 2}], got {l}")
    norm = float(np.linalg.norm(g))
    if norm < grad_floor:
        raise SingularGradientError(f"|grad u| below floor at {jet.point.tolist()}")
    curvatures = principal_curvatures(jet, grad_floor)
    return norm ** (l + 3) * elementary_symmetric(curvatures, l + 1)


# -- level extraction ---------------------------------------------------------


@dataclass
class LevelSetReport:
    """Extracted level polyline with pointwise curvature."""

    level: float
    points: np.ndarray      # (m+1, 2), closed: last row repeats the first
    kappa: np.ndarray       # (m+1,)
    kappa_min: float
    grad_min: float


def extract_level(f: ScalarField, c: float,
                  grad_floor: float = GRAD_FLOOR) -> LevelSetReport:
    """Trace the level set {u = c} through the grid.

    Walks every theta column, finds the unique radial edge where u crosses c
    (linear interpolation in s), and evaluates curvature from the
    linearly interpolated covariant jet.  The returned polyline is ordered by
    theta and closed.
    """
    grid = f.grid
    values = f.values
    if f.boundary_values is not None:
        lo, hi = sorted(f.boundary_values)
    else:
        lo, hi = float(values.min()), float(values.max())
    if not lo < c < hi:
        raise LevelRangeError(f"level {c} outside the open range ({lo}, {hi})")

    table = f.jet_table()
    pts = np.empty((grid.ntheta + 1, 2))
    kap = np.empty(grid.ntheta + 1)
    grad_min = np.inf
    for j in range(grid.ntheta):
        col = values[:, j] - c
        crossings = np.nonzero(col[:-1] * col[1:] <= 0)[0]
        # an exact node hit shows up in both adjacent edges; deduplicate
        if len(crossings) > 1:
            crossings = [i for i in crossings if col[i] != 0 or i == 0] or [crossings[0]]
            uniq = [crossings[0]]
            for i in crossings[1:]:
                if i != uniq[-1] + 1 or col[i] != 0:
                    uniq.append(i)
            crossings = uniq
        if len(crossings) != 1:
            raise TopologyError(
                f"level {c} crosses theta column {j} {len(crossings)} times"
            )
        i = int(crossings[0])
        denom = col[i] - col[i + 1]
        t = 0.0 if denom == 0 else col[i] / denom
        s_star = grid.s[i] + t * grid.hs
        pts[j] = grid.map_point(s_star, grid.theta[j])
        grad = (1 - t) * table["grad"][i, j] + t * table["grad"][i + 1, j]
        hess = (1 - t) * table["hess"][i, j] + t * table["hess"][i + 1, j]
        jet = PointJet(point=pts[j], value=c, grad=grad, hess=hess)
        h = second_fundamental_form(jet, grad_floor)
        kap[j] = h[0, 0]
        grad_min = min(grad_min, float(np.linalg.norm(grad)))
    pts[-1] = pts[0]
    kap[-1] = kap[0]
    return LevelSetReport(
        level=float(c), points=pts, kappa=kap,
        kappa_min=float(np.min(kap)), grad_min=float(grad_min),
    )


# -- rank scans ---------------------------------------------------------------


@dataclass
class RankScan:
    """Curvature-rank census over a set of sample jets."""

    samples: int
    min_rank: int
    max_rank: int
    lambda_min: float
    location: np.ndarray
    threshold: float

    @property
    def constant_rank(self) -> bool:
        return self.min_rank == self.max_rank


def rank_scan(source, levels: Sequence[float] | None = None,
              rank_threshold: float | None = None,
              points: np.ndarray | None = None,
              grad_floor: float = GRAD_FLOOR) -> RankScan:
    """Count principal curvatures above a threshold across many samples.

    ``source`` is either a :class:`ScalarField` (samples every interior node,
    optionally restricted to nodes whose value lies inside the band spanned
    by ``levels``) or a callable ``x -> PointJet`` (requires ``points``).
    The default threshold is 10 h^2 for fields and 1e-8 for analytic jets.
    """
    jets: list[PointJet] = []
    if isinstance(source, ScalarField):
        grid = source.grid
        if rank_threshold is None:
            rank_threshold = 10.0 * grid.max_spacing**2
        table = source.jet_table()
        band = None
        if levels is not None:
            band = (min(levels), max(levels))
        for i in range(1, grid.ns - 1):
            for j in range(grid.ntheta):
                if band is not None and not band[0] <= table["value"][i, j] <= band[1]:
                    continue
                jets.append(PointJet(
                    point=grid.nodes[i, j], value=float(table["value"][i, j]),
                    grad=table["grad"][i, j], hess=table["hess"][i, j],
                ))
    else:
        if points is None:
            raise ValueError("analytic source needs explicit sample points")
        if rank_threshold is None:
            rank_threshold = 1e-8
        jets = [source(np.asarray(p, dtype=float)) for p in points]
    if not jets:
        raise ValueError("rank scan has no sample points")

    min_rank = None
    max_rank = None
    lam_min = np.inf
    where = jets[0].point
    for jet in jets:
        eigs = principal_curvatures(jet, grad_floor)
        rank = int(np.sum(eigs > rank_threshold))
        if min_rank is None or rank < min_rank:
            min_rank = rank
        if max_rank is None or rank > max_rank:
            max_rank = rank
        if eigs[0] < lam_min:
            lam_min = float(eigs[0])
            where = jet.point
    return RankScan(
        samples=len(jets), min_rank=int(min_rank), max_rank=int(max_rank),
        lambda_min=lam_min, location=np.asarray(where), threshold=float(rank_threshold),
    )


# -- structure condition ------------------------------------------------------


@dataclass
class StructureReport:
    """Pointwise PSD test of M = 2 H Hess(H) - 3 dH x dH - 4 eps H^2 I."""

    points_checked: int
    passed: bool
    min_eigenvalue: float
    worst_point: np.ndarray
    per_point: list[float]


def fd_scalar_sampler(fn: Callable[[np.ndarray], float], step: float = 1e-5):
    """Wrap a plain callable into a (value, grad, hess) sampler by central
    differences, for use where analytic derivatives are not available."""

    def sampler(x: np.ndarray):
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        value = float(fn(x))
        grad = np.empty(n)
        hess = np.empty((n, n))
        for a in range(n):
            xp, xm = x.copy(), x.copy()
            xp[a] += step
            xm[a] -= step
            grad[a] = (fn(xp) - fn(xm)) / (2 * step)
            hess[a, a] = (fn(xp) - 2 * value + fn(xm)) / step**2
        for a in range(n):
            for b in range(a + 1, n):
                xpp, xpm, xmp, xmm = x.copy(), x.copy(), x.copy(), x.copy()
                xpp[[a, b]] += step
                xmm[[a, b]] -= step
                xpm[a] += step
                xpm[b] -= step
                xmp[a] -= step
                xmp[b] += step
                hess[a, b] = hess[b, a] = (
                    fn(xpp) - fn(xpm) - fn(xmp) + fn(xmm)
                ) / (4 * step**2)
        return value, grad, hess

    return sampler


def structure_condition_check(h_sampler, chart: SpaceFormChart,
                              points: np.ndarray,
                              psd_tol: float = 1e-10) -> StructureReport:
    """Check 3 H_a H_b + 4 eps H^2 delta_ab <= 2 H H_{;ab} pointwise.

    ``h_sampler(x)`` must return (H, dH, d2H) in chart coordinates; the
    covariant correction and frame rescaling happen here.  The condition is
    evaluated as positive semidefiniteness of

        M = 2 H Hess(H) - 3 grad H x grad H - 4 eps H^2 I

    and a point passes when the smallest eigenvalue of M is >= -psd_tol.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    eps = chart.epsilon
    eye = np.eye(chart.dim)
    margins: list[float] = []
    worst = pts[0]
    lam_min = np.inf
    for x in pts:
        value, dh, d2h = h_sampler(x)
        grad, hess = frame_components(chart, x, dh, d2h)
        m = 2.0 * value * hess - 3.0 * np.outer(grad, grad) - 4.0 * eps * value**2 * eye
        lam = float(np.linalg.eigvalsh(m)[0])
        margins.append(lam)
        if lam < lam_min:
            lam_min = lam
            worst = x
    return StructureReport(
        points_checked=len(pts),
        passed=bool(lam_min >= -psd_tol),
        min_eigenvalue=lam_min,
        worst_point=np.asarray(worst),
        per_point=margins,
    )
