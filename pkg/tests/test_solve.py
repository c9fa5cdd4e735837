"""Solver tests against closed-form and structural oracles.

The harmonic solve has an exact radial answer on concentric circles,
ln(R0/r)/ln(R0/R1), which pins down both the discretization order and the
tau-linearity.  The nonlinear solve is checked structurally here (Jacobian
consistency, residual decrease, comparison with the supersolution); the
radial ODE oracle comparison lives with the verification suite.
"""

import numpy as np
import pytest

from convexring.field import ScalarField, interpolate
from convexring.ring import build_grid, make_curve, make_ring
from convexring.solve import (
    ContinuationError,
    SolveOptions,
    SolverError,
    _Assembler,
    build_supersolution,
    continuation_solve,
    minimal_graph_residual,
    solve_harmonic,
    solve_minimal_graph,
    solve_prescribed_mean_curvature,
)
from convexring.spaceform import SpaceFormChart


def _circle_ring(eps=0.0, r_out=2.0, r_in=1.0):
    chart = SpaceFormChart(epsilon=eps)
    return make_ring(chart, make_curve("circle", radius=r_out),
                     make_curve("circle", radius=r_in))


def _ellipse_ring():
    chart = SpaceFormChart(epsilon=0.0)
    outer = make_curve("ellipse", radii=(2.0, 1.4))
    inner = make_curve("circle", radius=0.5)
    return make_ring(chart, outer, inner)


def _harmonic_errors(ns, ntheta):
    grid = build_grid(_circle_ring(), ns, ntheta)
    f = solve_harmonic(grid, 1.0)
    r = np.linalg.norm(grid.nodes, axis=-1)
    exact = np.log(2.0 / r) / np.log(2.0)
    return float(np.max(np.abs(f.values - exact))), f


def test_harmonic_matches_radial_logarithm():
    err_coarse, _ = _harmonic_errors(17, 48)
    err_fine, f = _harmonic_errors(33, 96)
    order = np.log2(err_coarse / err_fine)
    assert err_fine < 1e-3
    assert order > 1.8
    # omega(sqrt(2)) = 1/2, the radial midpoint in the log variable
    mid = interpolate(f, np.array([np.sqrt(2.0), 0.0]))
    assert mid == pytest.approx(0.5, abs=5e-4)


def test_harmonic_tau_scaling_is_exact():
    grid = build_grid(_ellipse_ring(), 13, 40)
    full = solve_harmonic(grid, 1.0)
    scaled = solve_harmonic(grid, 0.3)
    assert np.allclose(scaled.values, 0.3 * full.values, atol=1e-12)


def test_harmonic_maximum_principle():
    grid = build_grid(_ellipse_ring(), 13, 40)
    f = solve_harmonic(grid, 0.7)
    assert f.values.min() >= -1e-12
    assert f.values.max() <= 0.7 + 1e-12
    assert np.all(f.values[0] == 0.0)
    assert np.all(f.values[-1] == 0.7)


def test_harmonic_rejects_tau_outside_unit_interval():
    grid = build_grid(_circle_ring(), 9, 24)
    with pytest.raises(ValueError):
        solve_harmonic(grid, 0.0)
    with pytest.raises(ValueError):
        solve_harmonic(grid, 1.5)


def test_residual_zero_for_constant_field():
    grid = build_grid(_ellipse_ring(), 9, 24)
    f = ScalarField(grid=grid, values=np.full((9, 24), 0.37))
    assert np.all(minimal_graph_residual(f) == 0.0)


def test_residual_affine_field_is_truncation_small():
    # planes are minimal in the flat chart; only mapping truncation remains
    def affine(p):
        return 0.2 + 0.5 * p[..., 0] - 0.3 * p[..., 1]

    errs = []
    for ns, ntheta in ((17, 48), (33, 96)):
        grid = build_grid(_ellipse_ring(), ns, ntheta)
        f = ScalarField(grid=grid, values=affine(grid.nodes))
        errs.append(float(np.max(np.abs(minimal_graph_residual(f)))))
    assert errs[1] < 2e-3
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_jacobian_matches_directional_difference():
    rng = np.random.default_rng(7)
    grid = build_grid(_circle_ring(eps=1.0, r_out=1.2, r_in=0.5), 7, 16)
    asm = _Assembler(grid)
    v = 0.3 * rng.standard_normal((7, 16))
    direction = rng.standard_normal((5, 16))
    jac = asm.jacobian(v)
    reference = (jac @ direction.ravel()).reshape(5, 16)

    h = 1e-6
    vp, vm = v.copy(), v.copy()
    vp[1:-1] += h * direction
    vm[1:-1] -= h * direction
    fd = (asm.residual(vp) - asm.residual(vm)) / (2 * h)
    assert np.max(np.abs(fd - reference)) < 1e-6 * max(1.0, np.max(np.abs(reference)))


def test_minimal_graph_converges_and_obeys_report_contract():
    grid = build_grid(_circle_ring(), 17, 48)
    f, report = solve_minimal_graph(grid, 0.5)
    assert report.converged
    assert report.final_residual_max <= 1e-10
    assert report.tau == 0.5
    assert report.min_gradient_norm > 0.0
    assert report.wall_time >= 0.0
    assert np.all(f.values[0] == 0.0)
    assert np.all(f.values[-1] == 0.5)
    # residual recomputed from the returned field agrees with the report
    r = minimal_graph_residual(f)
    assert np.max(np.abs(r)) <= 1e-10


def test_newton_count_is_mesh_independent():
    counts = []
    for ns, ntheta in ((17, 48), (33, 96)):
        grid = build_grid(_circle_ring(), ns, ntheta)
        _, report = solve_minimal_graph(grid, 0.5)
        counts.append(report.newton_iterations)
    assert abs(counts[0] - counts[1]) <= 2


def test_small_tau_solution_stays_near_harmonic():
    grid = build_grid(_circle_ring(), 17, 48)
    tau = 0.01
    omega = solve_harmonic(grid, tau)
    u, report = solve_minimal_graph(grid, tau)
    assert report.converged
    # the nonlinear correction enters at higher order in tau
    assert np.max(np.abs(u.values - omega.values)) < 1e-5 * tau


def test_supersolution_formula_and_boundary():
    grid = build_grid(_circle_ring(), 9, 24)
    tau = 0.4
    omega = solve_harmonic(grid, tau)
    v = build_supersolution(omega, tau)
    w = omega.values
    assert np.allclose(v.values[1:-1], -w[1:-1] ** 2 / (4 * tau) + 1.25 * w[1:-1])
    assert np.all(v.values[0] == 0.0)
    assert np.all(v.values[-1] == tau)
    # g(tau/2) = 9 tau / 16
    assert -((tau / 2) ** 2) / (4 * tau) + 1.25 * (tau / 2) == pytest.approx(9 * tau / 16)


def test_supersolution_requires_matching_boundary_data():
    grid = build_grid(_circle_ring(), 9, 24)
    omega = solve_harmonic(grid, 0.4)
    with pytest.raises(SolverError):
        build_supersolution(omega, 0.5)


def test_solution_below_supersolution():
    grid = build_grid(_ellipse_ring(), 17, 48)
    tau = 0.5
    omega = solve_harmonic(grid, tau)
    v = build_supersolution(omega, tau)
    u, report = solve_minimal_graph(grid, tau)
    assert report.converged
    slack = 10.0 * grid.max_spacing**2
    assert np.max(u.values - v.values) <= slack


def test_prescribed_zero_curvature_matches_minimal():
    grid = build_grid(_circle_ring(), 9, 24)
    u0, _ = solve_minimal_graph(grid, 0.3)
    u1, report = solve_prescribed_mean_curvature(grid, 0.3, lambda p: np.zeros(p.shape[:-1]))
    assert report.converged
    assert np.array_equal(u0.values, u1.values)


def test_prescribed_large_curvature_reports_failure():
    # the flux is bounded, so a large source has no solution; the solver
    # must hand back a non-converged report instead of raising
    grid = build_grid(_circle_ring(), 9, 24)
    options = SolveOptions(max_newton=8)
    _, report = solve_prescribed_mean_curvature(grid, 0.3, lambda p: np.full(p.shape[:-1], 20.0),
                                                options=options)
    assert not report.converged
    assert report.final_residual_max > 1e-10


def test_continuation_walks_targets_on_circles():
    grid = build_grid(_circle_ring(), 13, 32)
    trace = continuation_solve(grid, [0.25, 0.5, 1.0])
    assert trace.tau_schedule == [0.05, 0.25, 0.5, 1.0]
    assert all(s.report.converged for s in trace.steps)
    assert all(s.min_interior_gradient > 0.0 for s in trace.steps)
    assert all(s.min_level_curvature > 0.0 for s in trace.steps)
    assert all(s.outer_boundary_min_gradient > 0.0 for s in trace.steps)
    diffs = np.diff(trace.tau_schedule)
    assert np.all(diffs > 0)
    assert trace.final_field is trace.steps[-1].field
    assert trace.steps[-1].tau == 1.0


def test_continuation_single_target_needs_no_halving():
    grid = build_grid(_ellipse_ring(), 13, 32)
    trace = continuation_solve(grid, [1.0])
    assert trace.tau_schedule == [0.05, 1.0]
    assert all(s.report.converged for s in trace.steps)


def test_continuation_small_first_target_starts_there():
    grid = build_grid(_circle_ring(), 9, 24)
    trace = continuation_solve(grid, [0.02])
    assert trace.tau_schedule == [0.02]


def test_continuation_empty_targets_empty_trace():
    grid = build_grid(_circle_ring(), 9, 24)
    trace = continuation_solve(grid, [])
    assert trace.steps == []
    assert trace.final_field is None


def test_continuation_validates_targets():
    grid = build_grid(_circle_ring(), 9, 24)
    with pytest.raises(ValueError):
        continuation_solve(grid, [0.5, 0.25])
    with pytest.raises(ValueError):
        continuation_solve(grid, [0.5, 1.5])


def test_continuation_failure_carries_partial_trace():
    grid = build_grid(_circle_ring(), 9, 24)
    # an unreachable tolerance plus a line-search floor that forbids damping
    # makes every solve stagnate at the rounding level and report failure
    options = SolveOptions(newton_tol=1e-30, max_newton=6, min_step=0.6)
    with pytest.raises(ContinuationError) as excinfo:
        continuation_solve(grid, [0.05], options=options)
    assert excinfo.value.trace.steps == []
    assert "tau=0.0" in str(excinfo.value)


def test_iterative_linear_solver_agrees_with_direct():
    grid = build_grid(_circle_ring(), 13, 32)
    direct, _ = solve_minimal_graph(grid, 0.5)
    iterative, report = solve_minimal_graph(
        grid, 0.5, options=SolveOptions(linear_solver="stabilized-iterative"))
    assert report.converged
    assert np.max(np.abs(direct.values - iterative.values)) < 1e-8


def test_options_validation():
    with pytest.raises(SolverError):
        SolveOptions(linear_solver="gaussian")
    with pytest.raises(SolverError):
        SolveOptions(newton_tol=-1.0)
    with pytest.raises(SolverError):
        SolveOptions(max_newton=0)


def test_oracle_init_converges_fast():
    # initializing at the converged solution must need no further steps
    grid = build_grid(_circle_ring(), 17, 48)
    u, _ = solve_minimal_graph(grid, 0.5)
    _, report = solve_minimal_graph(grid, 0.5, init=u)
    assert report.converged
    assert report.newton_iterations == 0
