from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from residual_lab import maps
from residual_lab.errors import ConfigError, MapError

F = Fraction


@pytest.mark.parametrize("x,expect", [(0.3, 0), (-0.2, -1), ((1.5, -2.25), (1, -3))])
def test_floor_lattice(x, expect):
    got = maps.floor_lattice(np.array(x) if isinstance(x, tuple) else x)
    assert np.array_equal(np.atleast_1d(got), np.atleast_1d(expect))


def test_floor_lattice_exact():
    assert maps.floor_lattice(F(-1, 5)) == -1
    assert maps.floor_lattice((F(3, 2), F(-9, 4))) == (1, -3)


@pytest.mark.parametrize("x,expect", [(1.75, 0.75), (-0.25, 0.75)])
def test_project_torus(x, expect):
    assert maps.project_torus(x) == expect


def test_project_torus_lattice_points_and_tiny_negatives():
    np.testing.assert_array_equal(maps.project_torus(np.array([2.0, -1.0])), [0.0, 0.0])
    assert maps.project_torus(-1e-20) == 0.0
    with pytest.raises(ValueError):
        maps.project_torus(np.nan)


def test_apply_map_examples(doubling, shifted):
    assert maps.apply_map(doubling, 0.3) == pytest.approx(0.6)
    assert maps.apply_map(doubling, 1.3) == pytest.approx(1.6)
    assert maps.apply_map(shifted, 0.3) == pytest.approx(0.1)
    assert maps.apply_map(doubling, F(13, 10)) == F(8, 5)
    assert maps.apply_map(shifted, F(3, 10)) == F(1, 10)


def test_coverage_gap_is_reported():
    p = maps.AffinePiece.build([0], ["1/2"], [[2]], [0], [0])
    m = maps.MapSpec(1, (p,), "half")
    with pytest.raises(MapError, match="gap"):
        maps.apply_map(m, F(3, 4))
    with pytest.raises(MapError):
        maps.apply_map(m, np.array([0.1, 0.8]))


def test_validate_doubling(doubling):
    rep = maps.validate_bernoulli(doubling.bernoulli)
    assert rep.passed
    assert all(pr.det_deviation == 0 for pr in rep.pieces)
    assert rep.gap_volume == 0 and rep.overlap_volume == 0
    assert maps.validate_map(doubling).passed


@pytest.mark.parametrize("form", [2, 3])
def test_shifted_doubling_partition_fails(form):
    rep = maps.validate_bernoulli(maps.shifted_doubling_partition(form))
    assert not rep.passed
    if form == 3:
        # the two outer pieces reach only half of their cubes
        assert sum(pr.image_mismatch for pr in rep.pieces) == 2


def test_single_piece_partition_fails():
    ident = maps.identity_map()
    rep = maps.validate_bernoulli(maps.BernoulliPartition(1, ident.pieces))
    assert not rep.passed
    assert any("M >= 2" in p for p in rep.problems)


def test_general_validation_accepts_non_bernoulli(shifted):
    assert shifted.bernoulli is None
    rep = maps.validate_map(shifted)
    assert rep.passed and rep.kind == "general"


def test_validation_rejects_non_measure_preserving():
    # slope 2 on [0,1/2) plus slope 1 on [1/2,1): covers the torus unevenly
    m = maps.MapSpec(1, (maps.AffinePiece.build([0], ["1/2"], [[2]], [0]),
                         maps.AffinePiece.build(["1/2"], [1], [[1]], [0])), "bad")
    assert not maps.validate_map(m).passed


def test_displacement_bound(doubling, shifted):
    assert doubling.displacement_bound == 1
    assert shifted.displacement_bound == 0.5
    assert maps.displacement_bound(maps.identity_map((3, -4))) == 5
    # dense-sampling oracle
    x = np.linspace(0, 1, 100001)[:-1]
    for m in (doubling, shifted):
        sampled = np.abs(maps.apply_map(m, x) - x).max()
        assert sampled <= m.displacement_bound + 1e-12
        assert sampled >= m.displacement_bound - 1e-4


def test_constructors(doubling, shifted):
    b = doubling.bernoulli
    assert b.M == 2
    assert [p.volume for p in b.pieces] == [F(1, 2), F(1, 2)]
    assert sorted(p.target for p in b.pieces) == [(0,), (1,)]
    prod = maps.product_map([doubling, doubling])
    assert prod.bernoulli.M == 4
    assert all(p.volume == F(1, 4) for p in prod.bernoulli.pieces)
    assert maps.validate_bernoulli(prod.bernoulli).passed
    assert maps.validate_map(maps.product_map([doubling, shifted])).passed
    assert maps.validate_map(maps.m_ary_expanding_1d(3, (0, 2, -1))).passed
    with pytest.raises(MapError):
        maps.m_ary_expanding_1d(1)
    with pytest.raises(MapError):
        maps.m_ary_expanding_1d(3, (0, 1))
    with pytest.raises(MapError):
        maps.m_ary_expanding_1d(2, (0, 0.5))


def test_bernoulli_det_volume_exact():
    for m in (maps.doubling_1d(), maps.m_ary_expanding_1d(5),
              maps.product_map([maps.doubling_1d(), maps.m_ary_expanding_1d(3)])):
        for p in m.bernoulli.pieces:
            assert abs(p.det) * p.volume == 1


ALL_MAPS = [maps.doubling_1d(), maps.shifted_doubling_1d(), maps.m_ary_expanding_1d(3, (1, 0, 2)),
            maps.identity_map((2,))]


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-50, 50, allow_nan=False), k=st.integers(-1000, 1000),
       idx=st.integers(0, len(ALL_MAPS) - 1))
def test_periodic_displacement(x, k, idx):
    m = ALL_MAPS[idx]
    xf = F(x)
    assert maps.apply_map(m, xf + k) == maps.apply_map(m, xf) + k


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-1e6, 1e6, allow_nan=False))
def test_floor_of_projection_is_zero(x):
    assert maps.floor_lattice(maps.project_torus(x)) == 0


@pytest.mark.parametrize("m", ALL_MAPS[:3], ids=lambda m: m.name)
def test_pushforward_uniform_1d(m, rng):
    u = rng.random(10**6)
    y = maps.project_torus(maps.apply_map(m, u))
    assert stats.kstest(y, "uniform").pvalue > 1e-3


def test_pushforward_uniform_2d(rng):
    m = maps.product_map([maps.doubling_1d(), maps.shifted_doubling_1d()])
    u = rng.random((10**6, 2))
    y = maps.project_torus(maps.apply_map(m, u))
    cells = np.floor(y * 16).astype(int) @ np.array([16, 1])
    counts = np.bincount(cells, minlength=256)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_map_file_roundtrip(tmp_path, shifted):
    for m in (maps.doubling_1d(), shifted, maps.product_map([shifted, maps.doubling_1d()])):
        path = tmp_path / f"{m.name}.yaml"
        maps.dump_map(m, path)
        back = maps.load_map(path)
        assert back == m
        assert (back.bernoulli is None) == (m.bernoulli is None)


def test_map_file_errors(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema: maps/v2\n")
    with pytest.raises(ConfigError):
        maps.load_map(bad)
    bad.write_text("schema: maps/v1\ndimension: 1\npieces: [{lo: [0], hi: [1]}]\n")
    with pytest.raises(ConfigError):
        maps.load_map(bad)
    with pytest.raises(ConfigError):
        maps.resolve_map("no-such-map")
    with pytest.raises(ConfigError):
        maps.as_fraction("1/0")


def test_rationals_parse():
    assert maps.as_fraction("3/4") == F(3, 4)
    assert maps.as_fraction(0.1) == F("0.1")
    assert maps.as_fraction(np.float64(0.25)) == F(1, 4)
    assert maps.as_fraction(np.int64(3)) == 3
