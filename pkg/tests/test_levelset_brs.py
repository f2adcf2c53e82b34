"""Converged avoid-game field: anchors, symmetries, and persistence."""

import numpy as np
import pytest

from reachlearn.dynamics import DubinsParams, RelativeState
from reachlearn.levelset import (
    Grid3,
    default_brs_grid,
    read_value_function,
    resample,
    signed_distance_capture,
    solve_brs,
    value_at,
    write_value_function,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid3(mins=(0, 0, -np.pi), maxs=(-1, 1, np.pi), dims=(5, 5, 5))
    with pytest.raises(ValueError):
        Grid3(mins=(0, 0, -np.pi), maxs=(1, 1, np.pi), dims=(2, 5, 5))
    with pytest.raises(ValueError):
        # Periodic axis must span one full turn.
        Grid3(mins=(0, 0, -1.0), maxs=(1, 1, 1.0), dims=(5, 5, 5))


def test_grid_spacing_conventions():
    g = default_brs_grid()
    assert g.spacing(0) == pytest.approx(40.0 / 80.0)
    # Periodic axis is cell-centered: spacing covers the span exactly.
    assert g.spacing(2) == pytest.approx(2.0 * np.pi / 40.0)
    th = g.coords(2)
    assert th[0] == pytest.approx(-np.pi)
    assert th[-1] == pytest.approx(np.pi - g.spacing(2))


def test_solver_requires_margin_around_disc(params):
    small = Grid3(mins=(-5, -5, -np.pi), maxs=(5, 5, np.pi), dims=(11, 11, 8))
    with pytest.raises(ValueError):
        solve_brs(small, params, capture_radius=3.0)


def test_exact_anchor_values(brs_coarse):
    # Zero separation sits at the bottom of the capture cone.
    assert value_at(brs_coarse, RelativeState(0, 0, np.pi)) == pytest.approx(
        -3.0, abs=1e-9
    )
    # A same-heading threat directly behind can never close the gap,
    # so the value equals the current clearance exactly.
    assert value_at(brs_coarse, RelativeState(-4, 0, 0)) == pytest.approx(
        1.0, abs=1e-6
    )


def test_value_below_terminal_everywhere(brs_coarse):
    l = signed_distance_capture(brs_coarse.grid, brs_coarse.capture_radius)
    assert (brs_coarse.values <= l + 1e-12).all()


def test_value_negative_inside_disc(brs_coarse):
    X, Y, _ = brs_coarse.grid.mesh()
    inside = np.hypot(X, Y) <= brs_coarse.capture_radius
    assert (brs_coarse.values[inside] <= 1e-12).all()


def test_mirror_symmetry(brs_coarse):
    # (y, theta) -> (-y, -theta); the cell-centered heading axis maps
    # index k to (n - k) mod n.
    refl = np.roll(brs_coarse.values[:, ::-1, ::-1], 1, axis=2)
    assert np.max(np.abs(brs_coarse.values - refl)) < 1e-9


def test_head_on_lobe_reaches_past_ten(brs_coarse):
    """Head-on conflicts are lost well before 10 m of clearance."""
    assert value_at(brs_coarse, RelativeState(10, 0, np.pi)) < 0.0
    assert value_at(brs_coarse, RelativeState(16, 0, np.pi)) > 0.0


def test_restart_from_fixed_point_is_a_noop(params):
    grid = Grid3(mins=(-20, -20, -np.pi), maxs=(20, 20, np.pi), dims=(31, 31, 16))
    cold = solve_brs(grid, params, capture_radius=3.0)
    again = solve_brs(
        grid, params, capture_radius=3.0, initial_values=cold.values
    )
    assert again.iterations == 1
    # one residual-sized step may still be taken before the stop check
    assert np.max(np.abs(again.values - cold.values)) <= 1e-3


def test_warm_start_lands_within_source_grid_accuracy(params):
    """Warm-start deviation is bounded by the source grid's cell size."""
    grid = Grid3(mins=(-20, -20, -np.pi), maxs=(20, 20, np.pi), dims=(31, 31, 16))
    cold = solve_brs(grid, params, capture_radius=3.0)
    cg = Grid3(mins=(-20, -20, -np.pi), maxs=(20, 20, np.pi), dims=(21, 21, 12))
    warm0 = solve_brs(cg, params, capture_radius=3.0)
    warm = solve_brs(
        grid, params, capture_radius=3.0, initial_values=resample(warm0, grid)
    )
    assert warm.converged
    assert np.max(np.abs(warm.values - cold.values)) < cg.spacing(0)


def test_first_order_scheme_is_more_conservative_than_limited(params):
    """Plain upwinding smears the lobe inward, never outward."""
    grid = Grid3(mins=(-20, -20, -np.pi), maxs=(20, 20, np.pi), dims=(41, 41, 24))
    v1 = solve_brs(grid, params, capture_radius=3.0, order=1)
    v2 = solve_brs(grid, params, capture_radius=3.0, order=2)
    frac1 = (v1.values <= 0).mean()
    frac2 = (v2.values <= 0).mean()
    assert frac2 > frac1


def test_nonconvergence_is_reported(params):
    grid = Grid3(mins=(-20, -20, -np.pi), maxs=(20, 20, np.pi), dims=(31, 31, 16))
    vf = solve_brs(grid, params, capture_radius=3.0, max_iters=3)
    assert not vf.converged
    assert vf.iterations == 3
    assert vf.residual > 1e-3


def test_value_function_io_roundtrip(tmp_path, brs_coarse):
    path = tmp_path / "field.hjvf"
    write_value_function(brs_coarse, path)
    back = read_value_function(path)
    assert back.kind == brs_coarse.kind
    assert back.grid.dims == brs_coarse.grid.dims
    assert back.capture_radius == brs_coarse.capture_radius
    assert np.array_equal(back.values, brs_coarse.values)
    assert back.converged is True
    assert back.iterations == brs_coarse.iterations
    assert back.residual == brs_coarse.residual
    assert back.horizon == "converged"
    # Byte determinism: a second write is identical.
    path2 = tmp_path / "field2.hjvf"
    write_value_function(brs_coarse, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_io_rejects_corrupt_header(tmp_path, brs_coarse):
    path = tmp_path / "field.hjvf"
    write_value_function(brs_coarse, path)
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XXXX"
    bad = tmp_path / "bad.hjvf"
    bad.write_bytes(bytes(blob))
    with pytest.raises(ValueError):
        read_value_function(bad)
