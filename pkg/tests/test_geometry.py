from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.stats import qmc

from ddgan.geometry import (QuarterPlate, dump_points, interior_acceptance, sample_boundary,
                            sample_interior, sample_test, sobol, sobol_2d)

GOLDEN = Path(__file__).parent / "data" / "sobol_2d_first64.txt"


def _golden():
    rows = [line.split() for line in GOLDEN.read_text().splitlines() if not line.startswith("#")]
    return np.array([[float.fromhex(v) for v in r] for r in rows])


def test_first_three_points():
    assert np.array_equal(sobol_2d(3), [[0.5, 0.5], [0.75, 0.25], [0.25, 0.75]])


def test_first_64_points_match_golden_file():
    ref = _golden()
    assert ref.shape == (64, 2)
    assert sobol_2d(64).tobytes() == ref.tobytes()


@pytest.mark.parametrize("dim", range(1, 8))
def test_matches_scipy_reference_all_dimensions(dim):
    ref = qmc.Sobol(dim, scramble=False).random_base2(10)[1:]
    assert np.array_equal(sobol(1023, dim), ref)


def test_skip_continues_sequence():
    full = sobol_2d(100)
    assert np.array_equal(sobol_2d(40, skip=60), full[60:])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 3000))
def test_coordinates_in_unit_interval(n):
    pts = sobol_2d(n)
    assert pts.shape == (n, 2)
    assert np.all((pts >= 0) & (pts < 1))


def test_unsupported_dimension():
    with pytest.raises(ValueError):
        sobol(4, 8)


def test_lower_discrepancy_than_random():
    pts = sobol_2d(4096)
    rnd = np.random.default_rng(0).random((4096, 2))
    assert qmc.discrepancy(pts, method="L2-star") < qmc.discrepancy(rnd, method="L2-star")


def test_acceptance_fraction_area_ratio():
    frac = interior_acceptance(100_000)
    assert abs(frac - (1 - np.pi / 16)) < 0.01


def test_interior_points():
    plate = QuarterPlate()
    pts = sample_interior(128**2)
    assert pts.shape == (128**2, 2)
    assert np.all(plate.strictly_inside(pts))
    assert np.all(pts[:, 0] ** 2 + pts[:, 1] ** 2 > 0.25)
    assert np.array_equal(pts, sample_interior(128**2))
    # a prefix of the accepted Sobol stream, independent of the requested size
    assert np.array_equal(sample_interior(100), pts[:100])


def test_interior_uniform_method_and_bad_method():
    assert sample_interior(50, method="uniform").shape == (50, 2)
    with pytest.raises(ValueError):
        sample_interior(10, method="grid")


def test_plate_validation():
    with pytest.raises(ValueError):
        QuarterPlate(side=1.0, hole_radius=1.5)


def test_test_points_inside_and_deterministic():
    plate = QuarterPlate()
    a = sample_test(5000, seed=3)
    assert a.shape == (5000, 2) and np.all(plate.strictly_inside(a))
    assert np.array_equal(a, sample_test(5000, seed=3))
    assert not np.array_equal(a, sample_test(5000, seed=4))


def test_test_points_uniform_chi_square():
    n, k = 100_000, 10
    pts = sample_test(n, seed=0)
    counts, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=k, range=[[0, 1], [0, 1]])
    # cell areas inside the domain from a fine midpoint grid
    m = 400
    g = (np.arange(k * m) + 0.5) / (k * m)
    X, Y = np.meshgrid(g, g, indexing="ij")
    inside = (X**2 + Y**2 > 0.25).reshape(k, m, k, m).mean(axis=(1, 3))
    mask = inside > 0.05
    expected = inside[mask] / inside[mask].sum() * counts[mask].sum()
    assert counts[~mask].sum() <= 0.002 * n
    assert stats.chisquare(counts[mask], expected).pvalue > 1e-3


def test_boundary_sets():
    b = sample_boundary(50)
    assert set(b.boundary) == {"x0", "y0", "x1", "y1", "hole"}
    for name, pts in b.boundary.items():
        assert pts.shape == (50, 2)
        nrm = b.normals[name]
        assert np.allclose(np.linalg.norm(nrm, axis=1), 1.0, rtol=0, atol=1e-15)
    hole = b.boundary["hole"]
    assert np.all(np.abs(hole[:, 0] ** 2 + hole[:, 1] ** 2 - 0.25) <= 1e-12)
    x0 = b.boundary["x0"]
    assert np.all(x0[:, 0] == 0) and x0[:, 1].min() == 0.5 and x0[:, 1].max() == 1.0
    y0 = b.boundary["y0"]
    assert np.all(y0[:, 1] == 0) and y0[:, 0].min() == 0.5
    assert np.all(b.boundary["x1"][:, 0] == 1) and np.all(b.boundary["y1"][:, 1] == 1)
    # hole normal points out of the body, i.e. towards the origin
    assert np.all(np.sum(hole * b.normals["hole"], axis=1) < 0)
    with pytest.raises(ValueError):
        sample_boundary(1)


def test_dump_points(tmp_path):
    b = sample_boundary(3)
    b.interior = sample_interior(4)
    p = tmp_path / "pts.csv"
    dump_points(p, b)
    lines = p.read_text().splitlines()
    assert lines[0] == "set,x,y" and len(lines) == 1 + 4 + 5 * 3
