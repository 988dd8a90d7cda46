from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlmc.grid import EAST, NORTH, SOUTH, WEST, OversampleRegion, build_grid, face_list, oversample
from oracles import brute_force_faces


def test_degenerate_grid():
    g = build_grid(1, 1)
    assert g.n_fine == 1
    assert g.H == g.h == 1
    assert g.fine_to_coarse.tolist() == [0]


def test_256_fine_64_coarse():
    g = build_grid(64, 4)
    assert g.n_fine == 256
    assert g.H == Fraction(1, 64) and g.h == Fraction(1, 256)
    assert g.H * g.n_coarse == 1


def test_row_major_nesting():
    g = build_grid(8, 32)
    assert g.fine_to_coarse[0 * g.n_fine + 31] == 0
    assert g.fine_to_coarse[0 * g.n_fine + 32] == 1
    assert g.fine_to_coarse[32 * g.n_fine] == 8


@pytest.mark.parametrize("args", [(0, 1), (1, 0), (-2, 3)])
def test_rejects_nonpositive_sizes(args):
    with pytest.raises(ValueError):
        build_grid(*args)


def test_rejects_non_integers():
    with pytest.raises(TypeError):
        build_grid(2.0, 2)


def test_coarse_to_fine_partition_is_identity():
    g = build_grid(3, 4)
    seen = np.concatenate([g.coarse_fine_cells(j) for j in range(g.num_coarse)])
    assert sorted(seen.tolist()) == list(range(g.num_fine))
    for j in range(g.num_coarse):
        assert np.all(g.fine_to_coarse[g.coarse_fine_cells(j)] == j)


@pytest.mark.parametrize(
    "n, m, side, ratio",
    [
        (32, 6, 13, "16.50"),
        (64, 8, 17, "7.06"),
    ],
)
def test_interior_oversampling(n, m, side, ratio):
    g = build_grid(n, 1)
    j = (n // 2) * n + n // 2
    region = oversample(g, j, m)
    assert region.shape_coarse == (side, side)
    assert f"{100 * region.area_ratio:.2f}" == ratio


def test_corner_clipping():
    g = build_grid(8, 2)
    region = oversample(g, 0, 1)
    assert region.shape_coarse == (2, 2)
    assert sorted(region.cells.tolist()) == [0, 1, 8, 9]


def test_zero_layers_is_the_block():
    g = build_grid(5, 3)
    region = oversample(g, 7, 0)
    assert region.cells.tolist() == [7]
    assert np.array_equal(region.fine_cells, g.coarse_fine_cells(7))


def test_invalid_center():
    g = build_grid(2, 2)
    with pytest.raises(IndexError):
        oversample(g, 4, 1)
    with pytest.raises(ValueError):
        oversample(g, 0, -1)


@given(n=st.integers(1, 9), refine=st.integers(1, 3), data=st.data())
@settings(max_examples=50, deadline=None)
def test_oversampling_monotone(n, refine, data):
    g = build_grid(n, refine)
    j = data.draw(st.integers(0, g.num_coarse - 1))
    m = data.draw(st.integers(0, n))
    small, big = oversample(g, j, m), oversample(g, j, m + 1)
    assert set(small.fine_cells) <= set(big.fine_cells)
    R, C = divmod(j, n)
    if m <= min(R, C, n - 1 - R, n - 1 - C):
        assert small.cells.size == (2 * m + 1) ** 2
    loc = small.global_to_local
    assert np.array_equal(loc[small.fine_cells], np.arange(small.num_fine))
    assert np.count_nonzero(loc >= 0) == small.num_fine


def test_single_cell_faces():
    faces = face_list(build_grid(1, 1))
    assert len(faces.interior) == 0
    assert len(faces.boundary_cell) == 4
    assert sorted(faces.boundary_side.tolist()) == [WEST, EAST, SOUTH, NORTH]


def test_strip_faces():
    # bottom row of a 2x2 grid: a 2x1 strip of fine cells
    strip = OversampleRegion(build_grid(2, 1), None, None, 0, 1, 0, 2)
    faces = face_list(strip.grid, strip)
    assert faces.interior.tolist() == [[0, 1]]
    assert len(faces.boundary_cell) == 6


@pytest.mark.parametrize("n", [1, 2, 5, 17, 256])
def test_face_count_formula(n):
    faces = face_list(build_grid(1, n))
    expected = 2 * n * (n - 1)
    assert len(faces.interior) == expected
    assert len(faces.boundary_cell) == 4 * n
    if n <= 17:
        interior, boundary = brute_force_faces(n, n)
        assert interior == {tuple(sorted(p)) for p in faces.interior.tolist()}
        assert boundary == 4 * n


def test_region_text_dump():
    g = build_grid(4, 2)
    text = oversample(g, 5, 1).to_text()
    lines = text.splitlines()
    assert lines[0].startswith("center 5 layers 1")
    assert [int(t) for t in lines[1].split()[1:]] == [0, 1, 2, 4, 5, 6, 8, 9, 10]
    assert len(lines[2].split()) - 1 == 9 * 4
