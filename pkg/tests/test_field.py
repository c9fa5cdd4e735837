"""Finite-difference jets, interpolation, distances, and snapshots."""

from __future__ import annotations

import numpy as np
import pytest

from convexring.field import (
    DomainError,
    FieldShapeError,
    ScalarField,
    discrete_c2_distance,
    fd_jet,
    field_from_dict,
    field_to_dict,
    interpolate,
    invert_blend_map,
    load_field,
    sample_field,
    save_field,
)
from convexring.ring import build_grid, make_curve, make_ring
from convexring.spaceform import SpaceFormChart, covariant_jet


def _circle_grid(ns=17, ntheta=32, eps=0.0, r_inner=1.0, r_outer=2.0):
    chart = SpaceFormChart(epsilon=eps, dim=2)
    ring = make_ring(
        chart,
        make_curve("circle", radius=r_outer),
        make_curve("circle", radius=r_inner),
    )
    return build_grid(ring, ns, ntheta)


def _ellipse_grid(ns=17, ntheta=48):
    chart = SpaceFormChart(epsilon=0.0, dim=2)
    ring = make_ring(
        chart,
        make_curve("ellipse", radii=(3.0, 2.0)),
        make_curve("ellipse", radii=(1.2, 0.8)),
    )
    return build_grid(ring, ns, ntheta)


def _trig(x):
    return np.sin(x[..., 0]) * np.cos(x[..., 1])


def _trig_jet(x):
    s0, c0 = np.sin(x[0]), np.cos(x[0])
    s1, c1 = np.sin(x[1]), np.cos(x[1])
    grad = np.array([c0 * c1, -s0 * s1])
    hess = np.array([[-s0 * c1, -c0 * s1], [-c0 * s1, -s0 * c1]])
    return _trig(x), grad, hess


def _fit_order(hs, errs):
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def test_field_shape_and_boundary_validation():
    grid = _circle_grid()
    vals = np.zeros((grid.ns, grid.ntheta))
    f = ScalarField(grid, vals, (0.0, 0.0))
    assert f.values.shape == (grid.ns, grid.ntheta)
    vals2 = vals.copy()
    vals2[0, 3] = 0.5
    with pytest.raises(FieldShapeError):
        ScalarField(grid, vals2, (0.0, 0.0))
    with pytest.raises(FieldShapeError):
        ScalarField(grid, np.zeros((3, 3)), (0.0, 0.0))


def test_jets_converge_at_second_order_flat():
    # smooth analytic field on an ellipse ring; compare frame jets (flat
    # chart: frame = coordinates) against closed-form derivatives
    errs, hs = [], []
    for ns, ntheta in ((17, 48), (33, 96), (65, 192)):
        grid = _ellipse_grid(ns, ntheta)
        fld = sample_field(grid, _trig)
        table = fld.jet_table()
        worst = 0.0
        for i in range(1, grid.ns - 1):
            for j in range(grid.ntheta):
                _, g, h = _trig_jet(grid.nodes[i, j])
                worst = max(
                    worst,
                    float(np.max(np.abs(table["grad"][i, j] - g))),
                    float(np.max(np.abs(table["hess"][i, j] - h))),
                )
        errs.append(worst)
        hs.append(grid.max_spacing)
    assert _fit_order(hs, errs) >= 1.9
    # spot-check that fd_jet agrees with the table it is built from
    jet = fd_jet(fld, (5, 7))
    assert np.array_equal(jet.grad, table["grad"][5, 7])


def test_jets_match_covariant_jet_on_sphere():
    # same field, curved chart: fd_jet must approach the analytic covariant jet
    errs, hs = [], []
    for ns, ntheta in ((17, 64), (33, 128)):
        grid = _circle_grid(ns, ntheta, eps=1.0, r_inner=0.15, r_outer=0.4)
        fld = sample_field(grid, _trig)
        chart = grid.ring.chart
        worst = 0.0
        for i in range(1, grid.ns - 1, 4):
            for j in range(0, grid.ntheta, 7):
                jet = fd_jet(fld, (i, j))
                ref = covariant_jet(chart, _trig_jet, grid.nodes[i, j])
                worst = max(
                    worst,
                    float(np.max(np.abs(jet.grad - ref.grad))),
                    float(np.max(np.abs(jet.hess - ref.hess))),
                )
        errs.append(worst)
        hs.append(grid.max_spacing)
    assert errs[1] < errs[0] * 0.35  # better than first order
    assert _fit_order(hs, errs) >= 1.7


def test_boundary_jets_are_flagged_one_sided():
    grid = _circle_grid()
    f = ScalarField(grid, np.zeros((grid.ns, grid.ntheta)), (0.0, 0.0))
    assert fd_jet(f, (0, 0)).one_sided
    assert fd_jet(f, (grid.ns - 1, 5)).one_sided
    assert not fd_jet(f, (3, 5)).one_sided


def test_invert_blend_map_round_trip():
    grid = _ellipse_grid()
    rng = np.random.default_rng(9)
    for _ in range(20):
        s = rng.uniform(0.0, 1.0)
        t = rng.uniform(0.0, 2 * np.pi)
        x = grid.map_point(s, t)
        s2, t2 = invert_blend_map(grid, x)
        assert abs(s2 - s) < 1e-9
        assert min(abs(t2 - t), 2 * np.pi - abs(t2 - t)) < 1e-9


def test_interpolate_exact_on_nodes_and_s_linear_fields():
    grid = _circle_grid(ns=9, ntheta=16)
    ss, _ = np.meshgrid(grid.s, grid.theta, indexing="ij")
    f = ScalarField(grid, 0.25 + 0.5 * ss, (0.25, 0.75))
    # node values reproduced exactly
    assert interpolate(f, grid.nodes[4, 3]) == pytest.approx(f.values[4, 3], abs=1e-12)
    # s-linear data is reproduced exactly by bilinear interpolation
    for s, t in ((0.123, 0.7), (0.61, 3.9), (0.95, 5.5)):
        x = grid.map_point(s, t)
        assert interpolate(f, x) == pytest.approx(0.25 + 0.5 * s, abs=1e-10)


def test_interpolate_rejects_points_outside_ring():
    grid = _circle_grid()
    f = ScalarField(grid, np.zeros((grid.ns, grid.ntheta)), (0.0, 0.0))
    with pytest.raises(DomainError):
        interpolate(f, [2.5, 0.0])
    with pytest.raises(DomainError):
        interpolate(f, [0.2, 0.1])


def test_discrete_c2_distance_linear_offset():
    grid = _circle_grid(ns=33, ntheta=64)
    base = sample_field(grid, lambda x: np.zeros(x.shape[:-1]), (0.0, 0.0))
    c = 0.35
    g = sample_field(grid, lambda x: c * x[..., 0])
    d = discrete_c2_distance(base, g)
    interior_x = np.abs(grid.nodes[1:-1, :, 0])
    # |dvalue| + |dgrad| exactly; the hessian term is pure O(h^2) mapping error
    expected = c * float(np.max(interior_x)) + c
    assert d >= expected - 1e-12
    assert d == pytest.approx(expected, abs=10 * grid.max_spacing**2)


def test_discrete_c2_distance_requires_same_grid():
    g1 = _circle_grid(ns=9, ntheta=16)
    g2 = _circle_grid(ns=11, ntheta=16)
    f1 = ScalarField(g1, np.zeros((9, 16)), (0.0, 0.0))
    f2 = ScalarField(g2, np.zeros((11, 16)), (0.0, 0.0))
    with pytest.raises(FieldShapeError):
        discrete_c2_distance(f1, f2)


def test_snapshot_round_trip_is_bit_exact(tmp_path):
    grid = _circle_grid(ns=9, ntheta=16)
    rng = np.random.default_rng(1)
    vals = rng.standard_normal((9, 16))
    vals[0] = 0.0
    vals[-1] = 0.3
    f = ScalarField(grid, vals, (0.0, 0.3))
    path = str(tmp_path / "field.json")
    save_field(f, path)
    g = load_field(path)
    assert np.array_equal(f.values, g.values)
    assert f.boundary_values == g.boundary_values
    assert np.array_equal(f.grid.nodes, g.grid.nodes)
    # serialization is deterministic: a second save produces identical bytes
    path2 = str(tmp_path / "field2.json")
    save_field(g, path2)
    assert open(path).read() == open(path2).read()


def test_snapshot_rejects_foreign_format():
    with pytest.raises(FieldShapeError):
        field_from_dict({"format": "something-else"})


def test_sample_field_boundary_snapping():
    grid = _circle_grid(ns=9, ntheta=16)
    # requested Dirichlet values must match what the sampler produces
    with pytest.raises(FieldShapeError):
        sample_field(grid, lambda x: x[..., 0], boundary_values=(0.0, 0.0))
    f = sample_field(grid, lambda x: np.sqrt(np.sum(x * x, axis=-1)) - 2.0,
                     boundary_values=(0.0, -1.0))
    assert f.boundary_values == (0.0, -1.0)
    assert np.all(f.values[0] == 0.0)
    # without a declaration any shape of data is a valid synthetic field
    g = sample_field(grid, lambda x: x[..., 0])
    assert g.boundary_values is None


def test_field_to_dict_is_self_describing():
    grid = _circle_grid(ns=9, ntheta=16)
    f = ScalarField(grid, np.zeros((9, 16)), (0.0, 0.0))
    d = field_to_dict(f)
    assert d["format"] == "convexring-field"
    assert d["ring"]["outer"]["kind"] == "circle"
    assert d["grid"] == {"ns": 9, "ntheta": 16}
