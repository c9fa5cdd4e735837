"""Solvers for the minimal graph equation on an annular grid.

The chart form of the equation is conservative,

    d/dx_a ( lambda^(n-2) du/dx_a / W ) = lambda^n H(x),
    W = sqrt(1 + lambda^(-2) |Du|^2),

with H = 0 for minimal graphs (the left side is -lambda^n times the mean
curvature of the graph).  Discretization is conservative flux differencing on
the mapped grid: fluxes live on cell faces, face gradients come from compact
stencils pushed through the analytic blend-map Jacobian, and the divergence
is taken back at nodes.  Newton's method uses the exact flux Jacobian
dA/dp = lambda^(n-2) (I/W - lambda^(-2) p p^T / W^3) and damped line search.

Dirichlet rows (s = 0 outer, s = 1 inner) are never touched by the solvers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .field import ScalarField
from .levelgeom import extract_level
from .ring import AnnularGrid

LINEAR_SOLVERS = ("direct-banded", "stabilized-iterative")


class SolverError(RuntimeError):
    """Structural failure: bad options, singular linear system, or a
    violated post condition."""


class ContinuationError(RuntimeError):
    """tau-continuation could not reach a target; carries the partial trace."""

    def __init__(self, message: str, trace: "ContinuationTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass
class SolveOptions:
    newton_tol: float = 1e-10          # on the max-norm of the nodal residual
    max_newton: int = 50
    linear_solver: str = "direct-banded"
    linear_tol: float = 1e-12          # iterative solver only
    min_step: float = 2.0**-20         # line-search floor

    def __post_init__(self):
        if self.linear_solver not in LINEAR_SOLVERS:
            raise SolverError(
                f"linear_solver must be one of {LINEAR_SOLVERS}, got {self.linear_solver!r}"
            )
        if min(self.newton_tol, self.linear_tol, self.min_step) <= 0.0:
            raise SolverError("tolerances must be positive")
        if self.max_newton < 1:
            raise SolverError("max_newton must be at least 1")


@dataclass
class SolveReport:
    converged: bool
    newton_iterations: int
    final_residual_max: float
    tau: float
    min_gradient_norm: float
    wall_time: float


@dataclass
class StepRecord:
    """One accepted continuation step with its convexity diagnostics."""

    tau: float
    report: SolveReport
    field: ScalarField
    min_interior_gradient: float
    min_level_curvature: float
    outer_boundary_min_gradient: float


@dataclass
class ContinuationTrace:
    steps: list[StepRecord] = dc_field(default_factory=list)

    @property
    def tau_schedule(self) -> list[float]:
        return [s.tau for s in self.steps]

    @property
    def final_field(self) -> ScalarField | None:
        return self.steps[-1].field if self.steps else None


# -- discrete operator --------------------------------------------------------


class _Assembler:
    """Face geometry and flux assembly for one grid.

    Fluxes are evaluated on s-faces (i+1/2, j) and theta-faces (i, j+1/2);
    theta-faces are only needed on interior rows.  ``linear=True`` freezes
    W = 1, which is the harmonic (conformal Laplace) operator.
    """

    def __init__(self, grid: AnnularGrid, linear: bool = False):
        self.grid = grid
        self.linear = linear
        chart = grid.ring.chart
        self.eps = chart.epsilon
        self.n = chart.dim
        ns, nt = grid.ns, grid.ntheta
        self.hs, self.ht = grid.hs, grid.htheta

        # s-faces
        sf = grid.s[:-1] + 0.5 * grid.hs
        ss, tt = np.meshgrid(sf, grid.theta, indexing="ij")
        self._sface = self._face_geometry(ss, tt)
        # theta-faces on interior rows
        tf = grid.theta + 0.5 * grid.htheta
        ss, tt = np.meshgrid(grid.s[1:-1], tf, indexing="ij")
        self._tface = self._face_geometry(ss, tt)
        # node data on interior rows
        jac = grid.map_jacobian(*np.meshgrid(grid.s[1:-1], grid.theta, indexing="ij"))
        self.det_node = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        pts = grid.nodes[1:-1]
        lam = 1.0 / (1.0 + 0.25 * self.eps * np.sum(pts * pts, axis=-1))
        self.lam_node_n = lam**self.n
        self.interior_nodes = pts

    def _face_geometry(self, ss, tt):
        jac = self.grid.map_jacobian(ss, tt)
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        jinv = np.empty_like(jac)
        jinv[..., 0, 0] = jac[..., 1, 1]
        jinv[..., 0, 1] = -jac[..., 0, 1]
        jinv[..., 1, 0] = -jac[..., 1, 0]
        jinv[..., 1, 1] = jac[..., 0, 0]
        jinv /= det[..., None, None]
        pts = self.grid.map_point(ss, tt)
        lam = 1.0 / (1.0 + 0.25 * self.eps * np.sum(pts * pts, axis=-1))
        return {"jinv": jinv, "det": det, "lam": lam}

    # face computational gradients (u_s, u_t) as arrays over faces
    def _sface_gradients(self, v):
        vp = np.roll(v, -1, axis=1)
        vm = np.roll(v, 1, axis=1)
        u_s = (v[1:] - v[:-1]) / self.hs
        u_t = (vp[:-1] + vp[1:] - vm[:-1] - vm[1:]) / (4.0 * self.ht)
        return u_s, u_t

    def _tface_gradients(self, v):
        vi = v[1:-1]
        u_t = (np.roll(vi, -1, axis=1) - vi) / self.ht
        hi = v[2:] + np.roll(v[2:], -1, axis=1)
        lo = v[:-2] + np.roll(v[:-2], -1, axis=1)
        u_s = (hi - lo) / (4.0 * self.hs)
        return u_s, u_t

    def _flux(self, geo, u_s, u_t):
        """Contravariant face flux G and the 2x2 sensitivity B = dG/d(u_s, u_t)."""
        jinv, det, lam = geo["jinv"], geo["det"], geo["lam"]
        d = np.stack([u_s, u_t], axis=-1)
        p = np.einsum("...ai,...a->...i", jinv, d)
        lam_pow = lam ** (self.n - 2)
        if self.linear:
            w = np.ones_like(lam)
            f = lam_pow[..., None] * p
            m = lam_pow[..., None, None] * np.eye(2)
        else:
            w = np.sqrt(1.0 + np.sum(p * p, axis=-1) / lam**2)
            f = lam_pow[..., None] * p / w[..., None]
            outer = p[..., :, None] * p[..., None, :]
            m = lam_pow[..., None, None] * (
                np.eye(2) / w[..., None, None]
                - outer / (lam**2 * w**3)[..., None, None]
            )
        g_flux = det[..., None] * np.einsum("...ai,...i->...a", jinv, f)
        b = det[..., None, None] * np.einsum("...ai,...ij,...bj->...ab", jinv, m, jinv)
        return g_flux, b

    def residual(self, v: np.ndarray, source: np.ndarray | None = None) -> np.ndarray:
        """Nodal residual on interior rows, shape (ns-2, ntheta)."""
        gs, _ = self._flux(self._sface, *self._sface_gradients(v))
        gt, _ = self._flux(self._tface, *self._tface_gradients(v))
        div = (gs[1:, :, 0] - gs[:-1, :, 0]) / self.hs
        div += (gt[..., 1] - np.roll(gt[..., 1], 1, axis=1)) / self.ht
        r = div / self.det_node
        if source is not None:
            r = r - self.lam_node_n * source
        return r

    def jacobian(self, v: np.ndarray) -> sp.csr_matrix:
        """Exact Jacobian of the residual w.r.t. interior values."""
        ns, nt = self.grid.ns, self.grid.ntheta
        n_int = (ns - 2) * nt

        def unknown(i, j):
            # flat unknown index for node (i, j); -1 for Dirichlet rows
            j = np.mod(j, nt)
            idx = (i - 1) * nt + j
            return np.where((i >= 1) & (i <= ns - 2), idx, -1)

        rows, cols, vals = [], [], []

        def add(face_rows, face_cols_i, face_cols_j, weight):
            """weight: per-face sensitivity of the residual row to the column node."""
            col = unknown(face_cols_i, face_cols_j)
            keep = (col >= 0) & (face_rows >= 0)
            rows.append(face_rows[keep])
            cols.append(col[keep])
            vals.append(weight[keep])

        # s-faces: flux G_s(i+1/2, j) feeds residual rows (i, j) and (i+1, j)
        _, b = self._flux(self._sface, *self._sface_gradients(v))
        b00, b01 = b[..., 0, 0], b[..., 0, 1]
        fi, fj = np.meshgrid(np.arange(ns - 1), np.arange(nt), indexing="ij")
        stencil_s = (
            (fi, fj, -b00 / self.hs),
            (fi + 1, fj, b00 / self.hs),
            (fi, fj - 1, -b01 / (4 * self.ht)),
            (fi + 1, fj - 1, -b01 / (4 * self.ht)),
            (fi, fj + 1, b01 / (4 * self.ht)),
            (fi + 1, fj + 1, b01 / (4 * self.ht)),
        )
        for sign, node_i in ((+1, fi), (-1, fi + 1)):
            row = unknown(node_i, fj)
            det = np.where(row >= 0, self.det_node[np.clip(node_i - 1, 0, ns - 3), fj], 1.0)
            scale = sign / (self.hs * det)
            for ci, cj, w in stencil_s:
                add(row, ci, cj, w * scale)

        # theta-faces: flux G_t(i, j+1/2) feeds residual rows (i, j) and (i, j+1)
        _, b = self._flux(self._tface, *self._tface_gradients(v))
        b10, b11 = b[..., 1, 0], b[..., 1, 1]
        fi, fj = np.meshgrid(np.arange(1, ns - 1), np.arange(nt), indexing="ij")
        stencil_t = (
            (fi, fj, -b11 / self.ht),
            (fi, fj + 1, b11 / self.ht),
            (fi + 1, fj, b10 / (4 * self.hs)),
            (fi + 1, fj + 1, b10 / (4 * self.hs)),
            (fi - 1, fj, -b10 / (4 * self.hs)),
            (fi - 1, fj + 1, -b10 / (4 * self.hs)),
        )
        for sign, node_j in ((+1, fj), (-1, fj + 1)):
            row = unknown(fi, node_j)
            det = self.det_node[fi - 1, np.mod(node_j, nt)]
            scale = sign / (self.ht * det)
            for ci, cj, w in stencil_t:
                add(row, ci, cj, w * scale)

        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        return sp.coo_matrix((vals, (rows, cols)), shape=(n_int, n_int)).tocsr()


def _linear_solve(matrix: sp.csr_matrix, rhs: np.ndarray, options: SolveOptions) -> np.ndarray:
    if options.linear_solver == "direct-banded":
        try:
            return spla.splu(matrix.tocsc()).solve(rhs)
        except RuntimeError as exc:  # singular factorization
            raise SolverError(f"direct linear solve failed: {exc}") from exc
    ilu = spla.spilu(matrix.tocsc(), drop_tol=1e-6, fill_factor=20)
    precond = spla.LinearOperator(matrix.shape, ilu.solve)
    x, info = spla.bicgstab(matrix, rhs, rtol=options.linear_tol, atol=0.0,
                            maxiter=2000, M=precond)
    if info != 0:
        raise SolverError(f"iterative linear solve failed (info={info})")
    return x


def _min_gradient_norms(f: ScalarField) -> tuple[float, float]:
    """(min interior |grad u|, min outer-boundary |grad u|)."""
    table = f.jet_table()
    norms = np.linalg.norm(table["grad"], axis=-1)
    return float(np.min(norms[1:-1])), float(np.min(norms[0]))


# -- public solvers -----------------------------------------------------------


def solve_harmonic(grid: AnnularGrid, tau: float,
                   options: SolveOptions | None = None) -> ScalarField:
    """Solve the conformal Laplace problem with data 0 outside, tau inside.

    One assembly and one linear solve; the result satisfies the discrete
    maximum principle (values in [0, tau])."""
    options = options or SolveOptions()
    tau = float(tau)
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    asm = _Assembler(grid, linear=True)
    v = np.zeros((grid.ns, grid.ntheta))
    v[-1] = tau
    r = asm.residual(v)
    delta = _linear_solve(asm.jacobian(v), -r.ravel(), options)
    v[1:-1] += delta.reshape(grid.ns - 2, grid.ntheta)

    rmax = float(np.max(np.abs(asm.residual(v))))
    if rmax > max(options.newton_tol, 1e3 * options.linear_tol):
        raise SolverError(f"harmonic solve left residual max {rmax:.3e}")
    if v.min() < -1e-10 or v.max() > tau + 1e-10:
        raise SolverError("harmonic solution violates the discrete maximum principle")
    return ScalarField(grid=grid, values=v, boundary_values=(0.0, tau))


def minimal_graph_residual(f: ScalarField) -> np.ndarray:
    """Divergence-form residual per node (zero rows for the Dirichlet data).

    This is -lambda^n times the mean curvature of the graph; it vanishes to
    O(h^2) on samples of an exact minimal graph and to the Newton tolerance
    on converged solver output."""
    asm = _Assembler(f.grid, linear=False)
    out = np.zeros_like(f.values)
    out[1:-1] = asm.residual(f.values)
    return out


def solve_minimal_graph(grid: AnnularGrid, tau: float,
                        options: SolveOptions | None = None,
                        init: ScalarField | None = None,
                        source: np.ndarray | None = None,
                        ) -> tuple[ScalarField, SolveReport]:
    """Damped Newton for the minimal graph with boundary data (0, tau).

    Starts from ``init`` (default: the harmonic field with the same data).
    Returns the final iterate and its report; ``report.converged`` is False
    when the residual target was not reached, the iterate is still returned.
    """
    options = options or SolveOptions()
    t0 = time.perf_counter()
    if init is None:
        init = solve_harmonic(grid, tau, options)
    v = init.values.copy()
    if not (np.all(v[0] == 0.0) and np.all(v[-1] == tau)):
        raise SolverError("initializer must carry the Dirichlet data (0, tau)")

    asm = _Assembler(grid, linear=False)
    r = asm.residual(v, source)
    rmax = float(np.max(np.abs(r)))
    iterations = 0
    converged = rmax <= options.newton_tol
    while not converged and iterations < options.max_newton:
        delta = _linear_solve(asm.jacobian(v), -r.ravel(), options)
        delta = delta.reshape(grid.ns - 2, grid.ntheta)
        # backtracking: accepted steps must strictly decrease the max residual
        alpha = 1.0
        while True:
            trial = v.copy()
            trial[1:-1] += alpha * delta
            r_trial = asm.residual(trial, source)
            rmax_trial = float(np.max(np.abs(r_trial)))
            if rmax_trial < rmax:
                break
            alpha *= 0.5
            if alpha < options.min_step:
                break
        if alpha < options.min_step:
            break
        v, r, rmax = trial, r_trial, rmax_trial
        iterations += 1
        converged = rmax <= options.newton_tol

    f = ScalarField(grid=grid, values=v, boundary_values=(0.0, float(tau)))
    min_grad, _ = _min_gradient_norms(f)
    report = SolveReport(
        converged=bool(converged),
        newton_iterations=iterations,
        final_residual_max=rmax,
        tau=float(tau),
        min_gradient_norm=min_grad,
        wall_time=time.perf_counter() - t0,
    )
    return f, report


def solve_prescribed_mean_curvature(grid: AnnularGrid, tau: float,
                                    h_fn: Callable[[np.ndarray], np.ndarray],
                                    options: SolveOptions | None = None,
                                    init: ScalarField | None = None,
                                    ) -> tuple[ScalarField, SolveReport]:
    """Same Newton contract with the source term lambda^n H(x).

    ``h_fn`` maps an (..., 2) array of chart points to H values.  H = 0
    recovers the minimal graph solve.  Non-solvable data yields a
    non-converged report, not an exception."""
    pts = grid.nodes[1:-1]
    source = np.asarray(h_fn(pts), dtype=float)
    if source.shape != pts.shape[:-1]:
        raise SolverError("H sampler must return one value per interior node")
    return solve_minimal_graph(grid, tau, options=options, init=init, source=source)


def build_supersolution(omega: ScalarField, tau: float) -> ScalarField:
    """Concave reparametrization v = g(omega), g(w) = -w^2/(4 tau) + 5 w / 4.

    g(0) = 0, g(tau) = tau, 3/4 <= g' <= 5/4 on [0, tau], g'' = -1/(2 tau):
    v dominates the minimal graph with the same boundary data."""
    if omega.boundary_values is None or omega.boundary_values != (0.0, float(tau)):
        raise SolverError("supersolution needs the harmonic field with data (0, tau)")
    w = omega.values
    v = -w * w / (4.0 * tau) + 1.25 * w
    v[0] = 0.0
    v[-1] = tau  # g(tau) = tau exactly
    return ScalarField(grid=omega.grid, values=v, boundary_values=(0.0, float(tau)))


def _step_diagnostics(f: ScalarField, tau: float) -> tuple[float, float, float]:
    min_grad, boundary_grad = _min_gradient_norms(f)
    kappa_min = np.inf
    for frac in (0.25, 0.5, 0.75):
        rep = extract_level(f, frac * tau)
        kappa_min = min(kappa_min, rep.kappa_min)
    return min_grad, float(kappa_min), boundary_grad


def continuation_solve(grid: AnnularGrid, targets: Sequence[float],
                       options: SolveOptions | None = None,
                       tau_start: float = 0.05) -> ContinuationTrace:
    """Predictor-corrector walk up the sorted tau targets.

    The first solve runs at min(tau_start, smallest target) from the harmonic
    initializer; later solves start from the previous solution rescaled to
    the new boundary value.  A failed solve halves the step toward the target
    (down to 2^-10 of the leg) before giving up with the partial trace."""
    options = options or SolveOptions()
    targets = [float(t) for t in targets]
    if any(not 0.0 < t <= 1.0 for t in targets):
        raise ValueError("targets must lie in (0, 1]")
    if any(b <= a for a, b in zip(targets, targets[1:])):
        raise ValueError("targets must be strictly increasing")
    trace = ContinuationTrace()
    if not targets:
        return trace

    schedule = [min(tau_start, targets[0])]
    schedule += [t for t in targets if t > schedule[0] + 1e-15]

    tau_prev = 0.0
    field_prev: ScalarField | None = None
    for target in schedule:
        leg = target - tau_prev
        step = leg
        while True:
            tau_try = tau_prev + step
            if field_prev is None:
                init = None
            else:
                v = field_prev.values * (tau_try / tau_prev)
                v[0] = 0.0
                v[-1] = tau_try
                init = ScalarField(grid=grid, values=v,
                                   boundary_values=(0.0, tau_try))
            f, report = solve_minimal_graph(grid, tau_try, options=options, init=init)
            if report.converged:
                min_grad, kappa_min, boundary_grad = _step_diagnostics(f, tau_try)
                trace.steps.append(StepRecord(
                    tau=tau_try, report=report, field=f,
                    min_interior_gradient=min_grad,
                    min_level_curvature=kappa_min,
                    outer_boundary_min_gradient=boundary_grad,
                ))
                tau_prev, field_prev = tau_try, f
                if tau_try >= target - 1e-15:
                    break
                step = target - tau_prev
            else:
                step *= 0.5
                if step < leg * 2.0**-10:
                    raise ContinuationError(
                        f"continuation stalled between tau={tau_prev} and {target}",
                        trace,
                    )
    return trace
